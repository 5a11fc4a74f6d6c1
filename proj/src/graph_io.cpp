#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string_view>
#include <unordered_map>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "selfpro/error.hpp"
#include "selfpro/graph.hpp"

namespace fs = std::filesystem;

namespace selfpro {
namespace {

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::load, fmt::format("cannot open {}", path.string()));
  return in;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<std::string_view> split_char(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view tok, const fs::path& file, std::size_t line_no) {
  T value{};
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw Error(ErrorKind::parse,
                fmt::format("{}:{}: cannot parse '{}' as a number", file.string(), line_no, tok));
  }
  return value;
}

Matrix rows_to_matrix(const std::vector<std::vector<double>>& rows, const fs::path& file) {
  const std::size_t d = rows.empty() ? 0 : rows.front().size();
  Matrix x(rows.size(), d);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != d) {
      throw Error(ErrorKind::shape, fmt::format("{}: row {} has {} columns, expected {}",
                                                file.string(), r, rows[r].size(), d));
    }
    for (std::size_t c = 0; c < d; ++c) x(r, c) = rows[r][c];
  }
  return x;
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, fmt::format("cannot write {}", tmp.string()));
    out << contents;
    if (!out) throw Error(ErrorKind::io, fmt::format("write to {} failed", tmp.string()));
  }
  fs::rename(tmp, path);
}

}  // namespace

Graph load_graph(const fs::path& dir) {
  const fs::path edges_path = dir / "edges.tsv";
  const fs::path feat_path = dir / "features.csv";
  const fs::path label_path = dir / "labels.txt";

  std::vector<EdgePair> edges;
  int max_id = -1;
  {
    auto in = open_input(edges_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      auto toks = split_ws(line);
      if (toks.empty()) continue;
      if (toks.size() != 2) {
        throw Error(ErrorKind::parse,
                    fmt::format("{}:{}: expected two node ids", edges_path.string(), line_no));
      }
      int u = parse_number<int>(toks[0], edges_path, line_no);
      int v = parse_number<int>(toks[1], edges_path, line_no);
      if (u < 0 || v < 0) {
        throw Error(ErrorKind::parse,
                    fmt::format("{}:{}: negative node id", edges_path.string(), line_no));
      }
      max_id = std::max({max_id, u, v});
      edges.emplace_back(u, v);
    }
  }

  std::vector<std::vector<double>> rows;
  {
    auto in = open_input(feat_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      std::vector<double> row;
      for (auto tok : split_char(line, ',')) row.push_back(parse_number<double>(tok, feat_path, line_no));
      rows.push_back(std::move(row));
    }
  }
  // Trailing isolated nodes are allowed, so only too few rows is an error.
  if (static_cast<int>(rows.size()) < max_id + 1) {
    throw Error(ErrorKind::shape, fmt::format("{} has {} rows but edges reference node {}",
                                              feat_path.string(), rows.size(), max_id));
  }
  Matrix x = rows_to_matrix(rows, feat_path);

  std::optional<std::vector<int>> labels;
  if (fs::exists(label_path)) {
    auto in = open_input(label_path);
    labels.emplace();
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      auto tok = trim(line);
      if (tok.empty()) continue;
      labels->push_back(parse_number<int>(tok, label_path, line_no));
    }
    if (labels->size() != rows.size()) {
      throw Error(ErrorKind::shape, fmt::format("{} has {} labels for {} nodes", label_path.string(),
                                                labels->size(), rows.size()));
    }
    if (std::any_of(labels->begin(), labels->end(), [](int y) { return y < 0; })) {
      throw Error(ErrorKind::parse, fmt::format("{}: negative class id", label_path.string()));
    }
  }
  return Graph(edges, std::move(x), std::move(labels));
}

void save_graph(const Graph& g, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, fmt::format("cannot create {}: {}", dir.string(), ec.message()));

  std::string buf;
  for (auto [u, v] : g.edges()) fmt::format_to(std::back_inserter(buf), "{}\t{}\n", u, v);
  write_file_atomic(dir / "edges.tsv", buf);

  buf.clear();
  const Matrix& x = g.features();
  for (int r = 0; r < x.rows(); ++r) {
    for (int c = 0; c < x.cols(); ++c) {
      if (c) buf.push_back(',');
      fmt::format_to(std::back_inserter(buf), "{}", x(r, c));
    }
    buf.push_back('\n');
  }
  write_file_atomic(dir / "features.csv", buf);

  if (g.labeled()) {
    buf.clear();
    for (int y : g.labels()) fmt::format_to(std::back_inserter(buf), "{}\n", y);
    write_file_atomic(dir / "labels.txt", buf);
  }
}

ConvertedGraph convert_linqs(const fs::path& content, const fs::path& cites) {
  ConvertedGraph out;
  std::unordered_map<std::string, int> index;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> raw_labels;
  {
    auto in = open_input(content);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      auto toks = split_ws(line);
      if (toks.empty()) continue;
      if (toks.size() < 2) {
        throw Error(ErrorKind::parse, fmt::format("{}:{}: too few columns", content.string(), line_no));
      }
      std::string id(toks.front());
      if (!index.emplace(id, static_cast<int>(rows.size())).second) {
        throw Error(ErrorKind::parse,
                    fmt::format("{}:{}: duplicate node id {}", content.string(), line_no, id));
      }
      out.node_names.push_back(id);
      std::vector<double> row;
      for (std::size_t i = 1; i + 1 < toks.size(); ++i) {
        row.push_back(parse_number<double>(toks[i], content, line_no));
      }
      rows.push_back(std::move(row));
      raw_labels.emplace_back(toks.back());
    }
  }

  std::map<std::string, int> classes;
  for (const auto& l : raw_labels) classes.emplace(l, 0);
  int next = 0;
  for (auto& [name, id] : classes) {
    id = next++;
    out.class_names.push_back(name);
  }
  std::vector<int> labels;
  labels.reserve(raw_labels.size());
  for (const auto& l : raw_labels) labels.push_back(classes.at(l));

  std::vector<EdgePair> edges;
  std::size_t dangling = 0;
  {
    auto in = open_input(cites);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      auto toks = split_ws(line);
      if (toks.empty()) continue;
      if (toks.size() != 2) {
        throw Error(ErrorKind::parse, fmt::format("{}:{}: expected two ids", cites.string(), line_no));
      }
      auto a = index.find(std::string(toks[0]));
      auto b = index.find(std::string(toks[1]));
      if (a == index.end() || b == index.end()) {
        ++dangling;
        continue;
      }
      edges.emplace_back(a->second, b->second);
    }
  }
  if (dangling) spdlog::warn("skipped {} citations to papers missing from {}", dangling, content.string());

  out.graph = Graph(edges, rows_to_matrix(rows, content), std::move(labels),
                    static_cast<int>(out.class_names.size()));
  return out;
}

ConvertedGraph convert_edge_list(const fs::path& edges_path, const std::optional<fs::path>& features,
                                 const std::optional<fs::path>& labels_path) {
  ConvertedGraph out;
  std::unordered_map<std::string, int> index;
  auto intern = [&](std::string_view raw) {
    auto [it, inserted] = index.emplace(std::string(raw), static_cast<int>(out.node_names.size()));
    if (inserted) out.node_names.emplace_back(raw);
    return it->second;
  };

  std::vector<EdgePair> edges;
  {
    auto in = open_input(edges_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      auto body = trim(line);
      if (body.empty() || body.front() == '#') continue;
      auto toks = split_ws(body);
      if (toks.size() < 2) {
        throw Error(ErrorKind::parse, fmt::format("{}:{}: expected two ids", edges_path.string(), line_no));
      }
      int u = intern(toks[0]);
      int v = intern(toks[1]);
      edges.emplace_back(u, v);
    }
  }

  std::unordered_map<int, std::vector<double>> feat_rows;
  std::size_t d = 1;
  if (features) {
    auto in = open_input(*features);
    std::string line;
    std::size_t line_no = 0;
    d = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      auto toks = split_char(line, ',');
      int v = intern(toks[0]);
      std::vector<double> row;
      for (std::size_t i = 1; i < toks.size(); ++i) row.push_back(parse_number<double>(toks[i], *features, line_no));
      if (d == 0) d = row.size();
      if (row.size() != d) {
        throw Error(ErrorKind::shape, fmt::format("{}:{}: {} features, expected {}", features->string(),
                                                  line_no, row.size(), d));
      }
      feat_rows[v] = std::move(row);
    }
  }

  const int n = static_cast<int>(out.node_names.size());
  Matrix x = Matrix::Zero(n, static_cast<Eigen::Index>(d));
  if (features) {
    for (int v = 0; v < n; ++v) {
      auto it = feat_rows.find(v);
      if (it == feat_rows.end()) {
        throw Error(ErrorKind::shape,
                    fmt::format("node {} has no feature row in {}", out.node_names[v], features->string()));
      }
      for (std::size_t c = 0; c < d; ++c) x(v, c) = it->second[c];
    }
  } else {
    x.setOnes();
  }

  std::optional<std::vector<int>> labels;
  if (labels_path) {
    std::vector<std::string> raw(n);
    std::vector<char> seen(n, 0);
    auto in = open_input(*labels_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      auto toks = split_ws(line);
      if (toks.empty()) continue;
      if (toks.size() != 2) {
        throw Error(ErrorKind::parse, fmt::format("{}:{}: expected 'id label'", labels_path->string(), line_no));
      }
      auto it = index.find(std::string(toks[0]));
      if (it == index.end()) continue;
      raw[it->second] = std::string(toks[1]);
      seen[it->second] = 1;
    }
    for (int v = 0; v < n; ++v) {
      if (!seen[v]) {
        throw Error(ErrorKind::shape, fmt::format("node {} has no label", out.node_names[v]));
      }
    }
    std::map<std::string, int> classes;
    for (const auto& l : raw) classes.emplace(l, 0);
    int next = 0;
    for (auto& [name, id] : classes) {
      id = next++;
      out.class_names.push_back(name);
    }
    labels.emplace();
    for (const auto& l : raw) labels->push_back(classes.at(l));
  }

  out.graph = Graph(edges, std::move(x), std::move(labels), static_cast<int>(out.class_names.size()));
  return out;
}

void save_converted(const ConvertedGraph& cg, const fs::path& dir) {
  save_graph(cg.graph, dir);
  std::string buf;
  for (std::size_t v = 0; v < cg.node_names.size(); ++v) {
    fmt::format_to(std::back_inserter(buf), "{}\t{}\n", v, cg.node_names[v]);
  }
  write_file_atomic(dir / "node_map.tsv", buf);
  if (!cg.class_names.empty()) {
    buf.clear();
    for (std::size_t c = 0; c < cg.class_names.size(); ++c) {
      fmt::format_to(std::back_inserter(buf), "{}\t{}\n", c, cg.class_names[c]);
    }
    write_file_atomic(dir / "classes.txt", buf);
  }
}

}  // namespace selfpro

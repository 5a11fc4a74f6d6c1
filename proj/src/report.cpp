#include <algorithm>
#include <fstream>
#include <cmath>

#include <fmt/format.h>
#include <json.hpp>

#include "selfpro/error.hpp"
#include "selfpro/harness.hpp"

namespace selfpro {
namespace {

using nlohmann::json;

std::string join_seeds(const std::vector<std::uint64_t>& seeds) {
  std::string out;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) out += ';';
    out += std::to_string(seeds[i]);
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

json to_json(const EvalReport& r) {
  return json{{"task", r.task},
              {"variant", r.variant},
              {"values", r.values},
              {"mean", r.mean},
              {"std", r.std},
              {"n_repeats", r.n_repeats},
              {"config_hash", r.config_hash},
              {"seeds", r.seeds}};
}

EvalReport from_json(const json& j) {
  EvalReport r;
  j.at("task").get_to(r.task);
  j.at("variant").get_to(r.variant);
  j.at("values").get_to(r.values);
  j.at("mean").get_to(r.mean);
  j.at("std").get_to(r.std);
  j.at("n_repeats").get_to(r.n_repeats);
  j.at("config_hash").get_to(r.config_hash);
  j.at("seeds").get_to(r.seeds);
  return r;
}

void write_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, fmt::format("cannot write {}", path.string()));
    out << text;
    if (!out) throw Error(ErrorKind::io, fmt::format("write to {} failed", path.string()));
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

void emit_report(std::span<const EvalReport> reports, const std::filesystem::path& path, ReportFormat format) {
  std::string text;
  switch (format) {
    case ReportFormat::csv:
      text = "task,variant,mean,std,repeats,seeds,config_hash\n";
      for (const auto& r : reports) {
        text += fmt::format("{},{},{},{},{},{},{}\n", csv_field(r.task), csv_field(r.variant), r.mean, r.std,
                            r.n_repeats, join_seeds(r.seeds), csv_field(r.config_hash));
      }
      break;
    case ReportFormat::markdown:
      text = "| task | variant | mean | std | repeats | seeds | config hash |\n";
      text += "|---|---|---|---|---|---|---|\n";
      for (const auto& r : reports) {
        text += fmt::format("| {} | {} | {:.4f} | {:.4f} | {} | {} | {} |\n", r.task, r.variant, r.mean, r.std,
                            r.n_repeats, join_seeds(r.seeds), r.config_hash);
      }
      break;
    case ReportFormat::json: {
      json arr = json::array();
      for (const auto& r : reports) arr.push_back(to_json(r));
      text = arr.dump(2) + "\n";
      break;
    }
  }
  write_atomic(path, text);
}

std::vector<EvalReport> read_json_reports(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::load, fmt::format("cannot open {}", path.string()));
  try {
    const json j = json::parse(in);
    std::vector<EvalReport> out;
    for (const auto& item : j) out.push_back(from_json(item));
    return out;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, fmt::format("{}: {}", path.string(), e.what()));
  }
}

namespace {

constexpr double kW = 640, kH = 400, kLeft = 60, kRight = 20, kTop = 30, kBottom = 50;

std::string svg_open(const std::string& title) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
      "font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{}\" y=\"18\" text-anchor=\"middle\">{}</text>\n",
      kW, kH, kW / 2, title);
}

// y axis over [lo, hi] with 5 ticks.
std::string y_axis(double lo, double hi) {
  std::string s = fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", kLeft, kTop,
                              kH - kBottom);
  s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", kLeft, kH - kBottom,
                   kW - kRight);
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    const double y = kH - kBottom - (kH - kTop - kBottom) * i / 4.0;
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.2f}</text>\n", kLeft - 6, y + 4, v);
    s += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#ddd\"/>\n", kLeft, y, kW - kRight, y);
  }
  return s;
}

double y_of(double v, double lo, double hi) {
  return kH - kBottom - (kH - kTop - kBottom) * (v - lo) / (hi - lo);
}

std::pair<double, double> y_range(std::span<const EvalReport> reports) {
  double lo = 1.0, hi = 0.0;
  for (const auto& r : reports) {
    lo = std::min(lo, r.mean - r.std);
    hi = std::max(hi, r.mean + r.std);
  }
  lo = std::max(0.0, std::floor(lo * 10) / 10);
  hi = std::min(1.0, std::ceil(hi * 10) / 10);
  if (hi <= lo) hi = lo + 0.1;
  return {lo, hi};
}

}  // namespace

void write_sweep_svg(std::span<const EvalReport> reports, std::span<const int> k_values,
                     const std::filesystem::path& path) {
  if (reports.size() != k_values.size()) throw Error(ErrorKind::shape, "one k per sweep report");
  const auto [lo, hi] = y_range(reports);
  std::string s = svg_open("accuracy vs shots per class") + y_axis(lo, hi);
  const double span_x = kW - kLeft - kRight;
  const int kmin = k_values.empty() ? 0 : *std::min_element(k_values.begin(), k_values.end());
  const int kmax = k_values.empty() ? 1 : *std::max_element(k_values.begin(), k_values.end());
  auto x_of = [&](int k) { return kLeft + 20 + (span_x - 40) * (kmax == kmin ? 0.5 : double(k - kmin) / (kmax - kmin)); };
  std::string line;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const double x = x_of(k_values[i]);
    const auto& r = reports[i];
    s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#888\"/>\n", x,
                     y_of(std::max(lo, r.mean - r.std), lo, hi), y_of(std::min(hi, r.mean + r.std), lo, hi));
    s += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"steelblue\"/>\n", x, y_of(r.mean, lo, hi));
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", x, kH - kBottom + 16, k_values[i]);
    line += fmt::format("{}{},{}", line.empty() ? "" : " ", x, y_of(r.mean, lo, hi));
  }
  s += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"steelblue\"/>\n", line);
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">k</text>\n</svg>\n", kW / 2, kH - 12);
  write_atomic(path, s);
}

void write_bars_svg(std::span<const EvalReport> reports, const std::filesystem::path& path) {
  const auto [lo0, hi] = y_range(reports);
  const double lo = std::min(lo0, 0.0);
  std::string s = svg_open("accuracy by variant") + y_axis(lo, hi);
  const double slot = (kW - kLeft - kRight) / std::max<std::size_t>(reports.size(), 1);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    const double x = kLeft + slot * i + slot * 0.2;
    const double top = y_of(r.mean, lo, hi);
    s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"steelblue\"/>\n", x, top, slot * 0.6,
                     kH - kBottom - top);
    const double cx = x + slot * 0.3;
    s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", cx,
                     y_of(std::max(lo, r.mean - r.std), lo, hi), y_of(std::min(hi, r.mean + r.std), lo, hi));
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", cx, kH - kBottom + 16, r.variant);
  }
  s += "</svg>\n";
  write_atomic(path, s);
}

}  // namespace selfpro

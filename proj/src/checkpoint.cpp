// Binary archives for TrainState and tuned adapters.
//
// Layout: "<magic>\n", u64 little-endian length of a JSON header, the header,
// then every matrix listed in header["tensors"] as row-major little-endian
// doubles in listing order.

#include <bit>
#include <cstring>
#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "selfpro/error.hpp"
#include "selfpro/model.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "archives assume a little-endian host");

namespace selfpro {
namespace {

struct NamedTensor {
  std::string name;
  const Matrix* m;
};

void write_archive(const fs::path& path, const char* magic, json header,
                   const std::vector<NamedTensor>& tensors) {
  json listing = json::array();
  for (const auto& t : tensors) listing.push_back({{"name", t.name}, {"rows", t.m->rows()}, {"cols", t.m->cols()}});
  header["tensors"] = listing;
  const std::string text = header.dump();
  const std::uint64_t len = text.size();

  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, fmt::format("cannot write {}", tmp.string()));
    out << magic << '\n';
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& t : tensors) {
      out.write(reinterpret_cast<const char*>(t.m->data()),
                static_cast<std::streamsize>(t.m->size() * sizeof(double)));
    }
    if (!out) throw Error(ErrorKind::io, fmt::format("write to {} failed", tmp.string()));
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::io, fmt::format("cannot move {} into place: {}", path.string(), ec.message()));
}

struct Archive {
  json header;
  std::vector<std::pair<std::string, Matrix>> tensors;

  Matrix take(const std::string& name) {
    for (auto& [n, m] : tensors) {
      if (n == name) return std::move(m);
    }
    throw Error(ErrorKind::load, fmt::format("archive has no tensor '{}'", name));
  }
  bool has(const std::string& name) const {
    for (const auto& t : tensors) {
      if (t.first == name) return true;
    }
    return false;
  }
};

Archive read_archive(const fs::path& path, const char* magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::load, fmt::format("cannot open {}", path.string()));
  std::string line;
  std::getline(in, line);
  if (line != magic) {
    throw Error(ErrorKind::load, fmt::format("{}: expected header '{}', found '{}'", path.string(), magic, line));
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1u << 30)) throw Error(ErrorKind::load, fmt::format("{}: corrupt header", path.string()));
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  Archive a;
  try {
    a.header = json::parse(text);
    for (const auto& t : a.header.at("tensors")) {
      Matrix m(t.at("rows").get<Eigen::Index>(), t.at("cols").get<Eigen::Index>());
      in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
      a.tensors.emplace_back(t.at("name").get<std::string>(), std::move(m));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::load, fmt::format("{}: bad header: {}", path.string(), e.what()));
  }
  if (!in) throw Error(ErrorKind::load, fmt::format("{}: truncated archive", path.string()));
  return a;
}

void list_projector(const ProjectorParams& p, std::vector<NamedTensor>& out) {
  for (std::size_t l = 0; l < p.weights.size(); ++l) out.push_back({fmt::format("projector.w{}", l), &p.weights[l]});
  for (std::size_t l = 0; l < p.biases.size(); ++l) out.push_back({fmt::format("projector.b{}", l), &p.biases[l]});
}

ProjectorParams take_projector(Archive& a, const json& meta) {
  ProjectorParams p;
  const int depth = meta.at("projector_depth").get<int>();
  const bool bias = meta.at("projector_bias").get<bool>();
  for (int l = 0; l < depth; ++l) p.weights.push_back(a.take(fmt::format("projector.w{}", l)));
  if (bias) {
    for (int l = 0; l < depth; ++l) p.biases.push_back(a.take(fmt::format("projector.b{}", l)));
  }
  return p;
}

}  // namespace

void save_checkpoint(const TrainState& s, const fs::path& path) {
  json header = {
      {"tau", s.tau},
      {"ema_momentum", s.ema_momentum},
      {"step", s.step},
      {"seed", s.seed},
      {"config_hash", s.config_hash},
      {"encoder_depth", s.online.depth()},
      {"activation", s.online.activation == Activation::relu ? "relu" : "identity"},
      {"projector_depth", s.projector.depth()},
      {"projector_bias", s.projector.has_bias()},
  };
  std::vector<NamedTensor> tensors;
  for (std::size_t l = 0; l < s.online.weights.size(); ++l) tensors.push_back({fmt::format("online.w{}", l), &s.online.weights[l]});
  for (std::size_t l = 0; l < s.target.weights.size(); ++l) tensors.push_back({fmt::format("target.w{}", l), &s.target.weights[l]});
  list_projector(s.projector, tensors);
  write_archive(path, kCheckpointMagic, std::move(header), tensors);
}

TrainState load_checkpoint(const fs::path& path) {
  Archive a = read_archive(path, kCheckpointMagic);
  TrainState s;
  try {
    const json& h = a.header;
    s.tau = h.at("tau").get<double>();
    s.ema_momentum = h.at("ema_momentum").get<double>();
    s.step = h.at("step").get<std::uint64_t>();
    s.seed = h.at("seed").get<std::uint64_t>();
    s.config_hash = h.at("config_hash").get<std::string>();
    const int depth = h.at("encoder_depth").get<int>();
    const auto act = h.at("activation").get<std::string>() == "relu" ? Activation::relu : Activation::identity;
    s.online.activation = s.target.activation = act;
    for (int l = 0; l < depth; ++l) {
      s.online.weights.push_back(a.take(fmt::format("online.w{}", l)));
      s.target.weights.push_back(a.take(fmt::format("target.w{}", l)));
    }
    s.projector = take_projector(a, h);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::load, fmt::format("{}: bad checkpoint header: {}", path.string(), e.what()));
  }
  return s;
}

void save_adapter(const Adapter& adapter, const fs::path& path) {
  json header = {
      {"task", adapter.task},
      {"config_hash", adapter.config_hash},
      {"projector_depth", adapter.projector.depth()},
      {"projector_bias", adapter.projector.has_bias()},
  };
  std::vector<NamedTensor> tensors;
  list_projector(adapter.projector, tensors);
  if (adapter.prototypes) tensors.push_back({"prototypes", &*adapter.prototypes});
  write_archive(path, kAdapterMagic, std::move(header), tensors);
}

Adapter load_adapter(const fs::path& path) {
  Archive a = read_archive(path, kAdapterMagic);
  Adapter out;
  try {
    out.task = a.header.at("task").get<std::string>();
    out.config_hash = a.header.at("config_hash").get<std::string>();
    out.projector = take_projector(a, a.header);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::load, fmt::format("{}: bad adapter header: {}", path.string(), e.what()));
  }
  if (a.has("prototypes")) out.prototypes = a.take("prototypes");
  return out;
}

}  // namespace selfpro

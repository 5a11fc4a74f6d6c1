#include "selfpro/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "selfpro/digest.hpp"
#include "selfpro/error.hpp"
#include "selfpro/rng.hpp"

namespace selfpro {
namespace {

constexpr std::uint64_t kPromptSeedStream = 11;

[[noreturn]] void type_error(const std::string& key, const std::string& value, const char* expected) {
  throw Error(ErrorKind::config, fmt::format("{} = '{}': expected {}", key, value, expected));
}

template <class T>
T parse_number(const std::string& key, const std::string& s, const char* expected) {
  T v{};
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) type_error(key, s, expected);
  return v;
}

int parse_int(const std::string& key, const std::string& s) { return parse_number<int>(key, s, "an integer"); }
double parse_real(const std::string& key, const std::string& s) { return parse_number<double>(key, s, "a number"); }

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  type_error(key, s, "true or false");
}

template <class E>
struct EnumNames {
  std::vector<std::pair<std::string, E>> items;

  E parse(const std::string& key, const std::string& s) const {
    for (const auto& [name, v] : items) {
      if (name == s) return v;
    }
    std::string options;
    for (const auto& [name, v] : items) options += (options.empty() ? "" : "|") + name;
    throw Error(ErrorKind::config, fmt::format("{} = '{}': expected one of {}", key, s, options));
  }
  std::string name(E v) const {
    for (const auto& [n, e] : items) {
      if (e == v) return n;
    }
    return "?";
  }
};

const EnumNames<Pretext> kPretext{{{"graphacl", Pretext::graphacl}, {"smoothing", Pretext::smoothing}}};
const EnumNames<OptimizerKind> kOptim{
    {{"sgd", OptimizerKind::sgd}, {"momentum", OptimizerKind::momentum}, {"adam", OptimizerKind::adam}}};
const EnumNames<PromptMode> kMode{
    {{"none", PromptMode::none}, {"structural", PromptMode::structural}, {"semantic", PromptMode::semantic}}};
const EnumNames<Injection> kInjection{{{"fixed", Injection::fixed}, {"self_weight", Injection::self_weight}}};
const EnumNames<SimKind> kSim{{{"dot", SimKind::dot}, {"cosine", SimKind::cosine}}};
const EnumNames<TwoHopMode> kTwoHop{{{"union", TwoHopMode::union_}, {"pure", TwoHopMode::pure}}};
const EnumNames<SplitProtocol> kProtocol{
    {{"few_shot", SplitProtocol::few_shot}, {"semi_supervised", SplitProtocol::semi_supervised}}};

// Config before seeds and derived fields are resolved.
struct Raw {
  RunConfig cfg;
  bool lp_repretrain = true;
  int lp_epochs = 0;  // 0: the pretraining epochs
  std::optional<double> tau_tune;  // unset: the pretraining tau
};

struct Field {
  ConfigKey key;
  std::function<void(Raw&, const std::string& name, const std::string&)> set;
  std::function<std::string(const Raw&)> get;
};

std::string fmt_real(double v) { return fmt::format("{}", v); }
std::string fmt_bool(bool v) { return v ? "true" : "false"; }

#define INT_FIELD(sec, nm, def, expr, help)                                                         \
  Field {                                                                                            \
    {sec, nm, def, help}, [](Raw& r, const std::string& k, const std::string& s) { r.expr = parse_int(k, s); }, \
        [](const Raw& r) { return std::to_string(r.expr); }                                          \
  }
#define REAL_FIELD(sec, nm, def, expr, help)                                                         \
  Field {                                                                                             \
    {sec, nm, def, help}, [](Raw& r, const std::string& k, const std::string& s) { r.expr = parse_real(k, s); }, \
        [](const Raw& r) { return fmt_real(r.expr); }                                                 \
  }
#define BOOL_FIELD(sec, nm, def, expr, help)                                                         \
  Field {                                                                                             \
    {sec, nm, def, help}, [](Raw& r, const std::string& k, const std::string& s) { r.expr = parse_bool(k, s); }, \
        [](const Raw& r) { return fmt_bool(r.expr); }                                                 \
  }
#define ENUM_FIELD(sec, nm, def, expr, table, help)                                                  \
  Field {                                                                                             \
    {sec, nm, def, help}, [](Raw& r, const std::string& k, const std::string& s) { r.expr = table.parse(k, s); }, \
        [](const Raw& r) { return table.name(r.expr); }                                               \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      Field{{"run", "seed", "0", "base seed; every random stream derives from it"},
            [](Raw& r, const std::string& k, const std::string& s) {
              r.cfg.seed = parse_number<std::uint64_t>(k, s, "a non-negative integer");
            },
            [](const Raw& r) { return std::to_string(r.cfg.seed); }},

      INT_FIELD("pretrain", "epochs", "200", cfg.pretrain.epochs, "pretraining epochs"),
      REAL_FIELD("pretrain", "lr", "0.0005", cfg.pretrain.lr, "pretraining learning rate"),
      REAL_FIELD("pretrain", "tau", "10", cfg.pretrain.tau, "pretext temperature"),
      INT_FIELD("pretrain", "n_negatives", "256", cfg.pretrain.n_negatives, "negatives per anchor, capped at n-1"),
      REAL_FIELD("pretrain", "ema_momentum", "0.99", cfg.pretrain.ema_momentum, "target encoder EMA momentum"),
      ENUM_FIELD("pretrain", "pretext", "graphacl", cfg.pretrain.pretext, kPretext, "graphacl|smoothing"),
      INT_FIELD("pretrain", "hidden", "256", cfg.pretrain.hidden, "encoder width"),
      INT_FIELD("pretrain", "depth", "2", cfg.pretrain.depth, "GCN layers"),
      INT_FIELD("pretrain", "projector_depth", "1", cfg.pretrain.projector_depth, "1 or 2 linear layers"),
      BOOL_FIELD("pretrain", "projector_bias", "false", cfg.pretrain.projector_bias, "projector bias terms"),
      BOOL_FIELD("pretrain", "negatives_use_projector", "false", cfg.pretrain.negatives_use_projector,
                 "score negatives with z_v instead of h_v"),
      BOOL_FIELD("pretrain", "normalize", "true", cfg.pretrain.normalize, "unit-normalize representations in the pretext"),
      ENUM_FIELD("pretrain", "optimizer", "adam", cfg.pretrain.optimizer, kOptim, "sgd|momentum|adam"),
      REAL_FIELD("pretrain", "momentum", "0.9", cfg.pretrain.momentum, "momentum for the momentum optimizer"),
      REAL_FIELD("pretrain", "weight_decay", "0", cfg.pretrain.weight_decay, "L2 weight decay"),

      ENUM_FIELD("prompt", "mode", "structural", cfg.prompt.mode, kMode, "none|structural|semantic"),
      ENUM_FIELD("prompt", "injection", "fixed", cfg.prompt.injection, kInjection, "fixed|self_weight"),
      REAL_FIELD("prompt", "mu", "0.5", cfg.prompt.mu, "prompt mixing weight for fixed injection"),
      ENUM_FIELD("prompt", "sim", "cosine", cfg.prompt.sim, kSim, "dot|cosine"),
      Field{{"prompt", "tau_tune", "tau", "tuning temperature; 'tau' reuses the pretraining value"},
            [](Raw& r, const std::string& k, const std::string& s) {
              if (s == "tau") {
                r.tau_tune.reset();
              } else {
                r.tau_tune = parse_real(k, s);
              }
            },
            [](const Raw& r) { return fmt_real(r.tau_tune.value_or(r.cfg.pretrain.tau)); }},
      REAL_FIELD("prompt", "tune_lr", "0.001", cfg.prompt.tune_lr, "tuning learning rate"),
      INT_FIELD("prompt", "tune_epochs", "200", cfg.prompt.tune_epochs, "tuning epochs"),
      INT_FIELD("prompt", "patience", "50", cfg.prompt.patience, "early-stopping patience, 0 disables"),
      ENUM_FIELD("prompt", "two_hop", "union", cfg.prompt.two_hop, kTwoHop, "union|pure"),
      ENUM_FIELD("prompt", "tune_optimizer", "adam", cfg.prompt.optimizer, kOptim, "sgd|momentum|adam"),

      INT_FIELD("harness", "k", "1", cfg.harness.k, "shots per class"),
      INT_FIELD("harness", "n_val", "5", cfg.harness.n_val_per_class, "validation nodes per class"),
      INT_FIELD("harness", "repeats", "10", cfg.harness.repeats, "repeats per evaluation"),
      ENUM_FIELD("harness", "protocol", "few_shot", cfg.harness.protocol, kProtocol, "few_shot|semi_supervised"),
      INT_FIELD("harness", "semi_per_class", "20", cfg.harness.semi_per_class, "semi-supervised train nodes per class"),
      INT_FIELD("harness", "semi_val", "500", cfg.harness.semi_val, "semi-supervised validation nodes"),
      INT_FIELD("harness", "semi_test", "1000", cfg.harness.semi_test, "semi-supervised test nodes"),
      REAL_FIELD("harness", "val_frac", "0.2", cfg.harness.val_frac, "validation edge fraction"),
      REAL_FIELD("harness", "test_frac", "0.1", cfg.harness.test_frac, "test edge fraction"),
      BOOL_FIELD("harness", "lp_repretrain", "true", lp_repretrain, "pretrain on each repeat's training edges"),
      INT_FIELD("harness", "lp_epochs", "0", lp_epochs, "pretraining epochs per link repeat, 0 = epochs"),
      ENUM_FIELD("harness", "lp_mode", "none", cfg.harness.link_mode, kMode, "prompt mode for link prediction"),
  };
  return f;
}

#undef INT_FIELD
#undef REAL_FIELD
#undef BOOL_FIELD
#undef ENUM_FIELD

const Field* find_field(const std::string& name) {
  for (const auto& f : fields()) {
    if (f.key.name == name) return &f;
  }
  return nullptr;
}

[[noreturn]] void unknown_key(const std::string& name) {
  std::string best;
  std::size_t best_d = static_cast<std::size_t>(-1);
  std::string all;
  for (const auto& f : fields()) {
    const std::size_t d = edit_distance(name, f.key.name);
    if (d < best_d) {
      best_d = d;
      best = f.key.name;
    }
    all += (all.empty() ? "" : ", ") + f.key.name;
  }
  throw Error(ErrorKind::config, fmt::format("unknown config key '{}' (did you mean '{}'?); valid keys: {}", name, best,
                                             all));
}

void set_key(Raw& raw, const std::string& section, const std::string& name, const std::string& value) {
  const Field* f = find_field(name);
  if (!f) unknown_key(section.empty() ? name : section + "." + name);
  if (!section.empty() && section != f->key.section) {
    throw Error(ErrorKind::config, fmt::format("key '{}' belongs in [{}], not [{}]", name, f->key.section, section));
  }
  f->set(raw, name, value);
}

void validate(const RunConfig& c) {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::config, msg); };
  if (c.pretrain.tau <= 0) fail("tau must be positive");
  if (c.pretrain.lr <= 0) fail("lr must be positive");
  if (c.pretrain.n_negatives < 1) fail("n_negatives must be >= 1");
  if (c.pretrain.epochs < 0) fail("epochs must be >= 0");
  if (c.pretrain.ema_momentum < 0 || c.pretrain.ema_momentum > 1) fail("ema_momentum must lie in [0, 1]");
  if (c.pretrain.hidden < 1 || c.pretrain.depth < 1) fail("hidden and depth must be >= 1");
  if (c.pretrain.projector_depth != 1 && c.pretrain.projector_depth != 2) fail("projector_depth must be 1 or 2");
  if (c.prompt.mu < 0 || c.prompt.mu > 1) fail("mu must lie in [0, 1]");
  if (c.prompt.tau_tune <= 0) fail("tau_tune must be positive");
  if (c.prompt.tune_lr <= 0) fail("tune_lr must be positive");
  if (c.prompt.tune_epochs < 0 || c.prompt.patience < 0) fail("tune_epochs and patience must be >= 0");
  if (c.harness.k < 1 || c.harness.n_val_per_class < 0) fail("k must be >= 1 and n_val >= 0");
  if (c.harness.repeats < 1) fail("repeats must be >= 1");
  if (c.harness.link_pretrain && c.harness.link_pretrain->epochs < 0) fail("lp_epochs must be >= 0");
  if (c.harness.val_frac < 0 || c.harness.test_frac < 0 || c.harness.val_frac + c.harness.test_frac >= 1) {
    fail("val_frac and test_frac must be non-negative and sum below 1");
  }
}

std::string dump(const Raw& raw) {
  std::vector<std::string> lines;
  for (const auto& f : fields()) lines.push_back(fmt::format("{}.{}={}", f.key.section, f.key.name, f.get(raw)));
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

RunConfig resolve(Raw raw) {
  raw.cfg.prompt.tau_tune = raw.tau_tune.value_or(raw.cfg.pretrain.tau);
  if (raw.lp_repretrain) {
    raw.cfg.harness.link_pretrain = raw.cfg.pretrain;
    if (raw.lp_epochs != 0) raw.cfg.harness.link_pretrain->epochs = raw.lp_epochs;
  } else {
    raw.cfg.harness.link_pretrain.reset();
  }
  validate(raw.cfg);
  RunConfig c = raw.cfg;
  c.hash = sha256_hex(dump(raw));
  c.pretrain.seed = c.seed;
  c.pretrain.config_hash = c.hash;
  c.prompt.seed = derive_seed(c.seed, kPromptSeedStream);
  c.harness.seed = c.seed;
  c.harness.config_hash = c.hash;
  if (c.harness.link_pretrain) {
    const int epochs = c.harness.link_pretrain->epochs;
    c.harness.link_pretrain = c.pretrain;
    c.harness.link_pretrain->epochs = epochs;
  }
  return c;
}

Raw defaults() {
  Raw raw;
  for (const auto& f : fields()) f.set(raw, f.key.name, f.key.default_value);
  return raw;
}

Raw to_raw(const RunConfig& c) {
  Raw raw;
  raw.cfg = c;
  raw.lp_repretrain = c.harness.link_pretrain.has_value();
  if (raw.lp_repretrain && c.harness.link_pretrain->epochs != c.pretrain.epochs) {
    raw.lp_epochs = c.harness.link_pretrain->epochs;
  }
  raw.tau_tune = c.prompt.tau_tune;
  return raw;
}

}  // namespace

std::span<const ConfigKey> config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

RunConfig default_config() { return resolve(defaults()); }

RunConfig parse_config(const std::optional<std::filesystem::path>& file, std::span<const std::string> overrides) {
  Raw raw = defaults();
  if (file) {
    if (!std::filesystem::exists(*file)) {
      throw Error(ErrorKind::load, fmt::format("config file {} does not exist", file->string()));
    }
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::read_ini(file->string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw Error(ErrorKind::config, fmt::format("{}: {}", file->string(), e.what()));
    }
    for (const auto& [name, node] : tree) {
      if (node.empty()) {
        set_key(raw, "", name, node.data());
        continue;
      }
      if (name != "run" && name != "pretrain" && name != "prompt" && name != "harness") {
        throw Error(ErrorKind::config,
                    fmt::format("unknown config section [{}]; sections are run, pretrain, prompt, harness", name));
      }
      for (const auto& [key, leaf] : node) set_key(raw, name, key, leaf.data());
    }
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(ErrorKind::config, fmt::format("override '{}' is not key=value", o));
    }
    std::string key = o.substr(0, eq);
    std::string section;
    if (const auto dot = key.find('.'); dot != std::string::npos) {
      section = key.substr(0, dot);
      key = key.substr(dot + 1);
    }
    set_key(raw, section, key, o.substr(eq + 1));
  }
  return resolve(std::move(raw));
}

std::string canonical_dump(const RunConfig& cfg) { return dump(to_raw(cfg)); }

void write_config(const RunConfig& cfg, const std::filesystem::path& path) {
  const Raw raw = to_raw(cfg);
  std::map<std::string, std::vector<std::string>> by_section;
  for (const auto& f : fields()) by_section[f.key.section].push_back(fmt::format("{} = {}", f.key.name, f.get(raw)));
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, fmt::format("cannot write {}", path.string()));
  bool first = true;
  for (const auto& [section, lines] : by_section) {
    out << (first ? "" : "\n") << "[" << section << "]\n";
    for (const auto& l : lines) out << l << "\n";
    first = false;
  }
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace selfpro

#include "selfpro/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "selfpro/error.hpp"
#include "selfpro/rng.hpp"

namespace selfpro {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Runs body(r) for r in [0, n) on up to `threads` workers. The first failure
// (lowest repeat index) is rethrown with the repeat attached.
template <class Body>
void for_each_repeat(int n, int threads, Body&& body) {
  std::vector<std::exception_ptr> errors(n);
  auto guarded = [&](int r) {
    try {
      body(r);
    } catch (...) {
      errors[r] = std::current_exception();
    }
  };
  const int workers = std::clamp(threads, 1, std::max(n, 1));
  if (workers == 1) {
    for (int r = 0; r < n; ++r) guarded(r);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (int r = next++; r < n; r = next++) guarded(r);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (int r = 0; r < n; ++r) {
    if (!errors[r]) continue;
    try {
      std::rethrow_exception(errors[r]);
    } catch (const Error& e) {
      throw Error(e.kind(), fmt::format("repeat {}: {}", r, e.what()));
    } catch (const std::exception& e) {
      throw Error(ErrorKind::tuning, fmt::format("repeat {}: {}", r, e.what()));
    }
  }
}

EvalReport make_report(std::string task, std::string variant, const HarnessOptions& options) {
  EvalReport r;
  r.task = std::move(task);
  r.variant = std::move(variant);
  r.config_hash = options.config_hash;
  r.values.assign(options.repeats, 0.0);
  r.seeds.resize(options.repeats);
  for (int i = 0; i < options.repeats; ++i) r.seeds[i] = options.seed + static_cast<std::uint64_t>(i);
  return r;
}

void check_repeats(const HarnessOptions& options) {
  if (options.repeats < 1) throw Error(ErrorKind::argument, "repeats must be >= 1");
}

void require_labels(const Graph& g) {
  if (!g.labeled()) throw Error(ErrorKind::argument, "node classification needs a labeled graph");
}

// Test labels, read once after tuning has finished.
std::vector<int> test_labels(const LabelGuard& guard, const SplitSpec& split) {
  if (guard.reads(LabelGuard::Role::test) != 0) {
    throw Error(ErrorKind::split, "test labels were read before evaluation");
  }
  std::vector<int> truth;
  truth.reserve(split.test_nodes.size());
  for (NodeId v : split.test_nodes) truth.push_back(guard.label(v));
  return truth;
}

PromptConfig repeat_prompt(const PromptConfig& cfg, std::uint64_t seed) {
  PromptConfig c = cfg;
  c.seed = derive_seed(cfg.seed, seed);
  return c;
}

}  // namespace

void finalize(EvalReport& report) {
  const auto n = report.values.size();
  report.n_repeats = static_cast<int>(n);
  if (n == 0) {
    report.mean = report.std = 0.0;
    return;
  }
  report.mean = std::accumulate(report.values.begin(), report.values.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double x : report.values) ss += (x - report.mean) * (x - report.mean);
  report.std = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
}

SplitSpec repeat_split(const Graph& g, const HarnessOptions& options, int repeat) {
  const std::uint64_t seed = options.seed + static_cast<std::uint64_t>(repeat);
  if (options.protocol == SplitProtocol::semi_supervised) {
    return sample_semi_supervised(g, options.semi_per_class, options.semi_val, options.semi_test, seed);
  }
  return sample_k_shot(g, options.k, options.n_val_per_class, seed);
}

EvalReport run_few_shot(const Graph& g, const TrainState& state, const PromptConfig& cfg,
                        const HarnessOptions& options) {
  require_labels(g);
  check_repeats(options);
  const auto t0 = Clock::now();
  const TokenSet tokens = build_tokens(state, g, cfg);
  EvalReport report = make_report("node_cls", "selfpro", options);

  for_each_repeat(options.repeats, options.threads, [&](int r) {
    const SplitSpec split = repeat_split(g, options, r);
    const LabelGuard guard(g.labels(), g.n_classes(), &split);
    const auto tuned = tune_node_classification(state, tokens, split, guard, repeat_prompt(cfg, report.seeds[r]));
    const auto predicted = predict_classes(tuned.projector, tuned.prototypes, tokens, split.test_nodes, cfg.sim);
    report.values[r] = accuracy(predicted, test_labels(guard, split));
    spdlog::debug("few-shot repeat {} (seed {}): acc {:.4f}, best epoch {}", r, report.seeds[r], report.values[r],
                  tuned.best_epoch);
  });
  finalize(report);
  report.wall_seconds = seconds_since(t0);
  return report;
}

LinkReports run_link_prediction(const Graph& g, const TrainState& state, const PromptConfig& cfg,
                                const HarnessOptions& options) {
  check_repeats(options);
  const auto t0 = Clock::now();
  LinkReports out{make_report("link_pred_auc", "selfpro", options), make_report("link_pred_ap", "selfpro", options)};
  PromptConfig link_cfg = cfg;
  link_cfg.mode = options.link_mode;

  for_each_repeat(options.repeats, options.threads, [&](int r) {
    const std::uint64_t seed = out.auc.seeds[r];
    const EdgeSplit split = split_edges(g, options.val_frac, options.test_frac, seed);
    const Graph train_graph = g.with_edges(split.train_edges);

    TrainState local;
    const TrainState* used = &state;
    if (options.link_pretrain) {
      PretrainConfig pc = *options.link_pretrain;
      pc.seed = derive_seed(pc.seed, seed);
      local = pretrain(train_graph, pc).state;
      used = &local;
    }
    const TokenSet tokens = build_tokens(*used, train_graph, link_cfg);
    const auto tuned = tune_link_prediction(*used, tokens, split, repeat_prompt(link_cfg, seed));

    std::vector<EdgePair> pairs = split.test_edges;
    pairs.insert(pairs.end(), split.test_neg.begin(), split.test_neg.end());
    std::vector<int> truth(split.test_edges.size(), 1);
    truth.resize(pairs.size(), 0);
    const auto scores = score_links(tuned.projector, tokens, pairs, cfg.sim);
    out.auc.values[r] = auc(scores, truth);
    out.ap.values[r] = average_precision(scores, truth);
    spdlog::debug("link repeat {} (seed {}): auc {:.4f} ap {:.4f}", r, seed, out.auc.values[r], out.ap.values[r]);
  });
  finalize(out.auc);
  finalize(out.ap);
  out.auc.wall_seconds = out.ap.wall_seconds = seconds_since(t0);
  return out;
}

std::vector<EvalReport> run_ablation(const Graph& g, const TrainState& state, const PromptConfig& cfg,
                                     const HarnessOptions& options) {
  require_labels(g);
  check_repeats(options);
  const auto t0 = Clock::now();

  const TokenSet contextual = contextual_tokens(state, g);
  const TokenSet stru = inject(contextual, structural_tokens(state, g, cfg.two_hop), cfg);
  const TokenSet sem = inject(contextual, semantic_tokens(state, g), cfg);

  const char* names[] = {"Hard", "Temp", "Tune", "Stru", "Sem"};
  std::vector<EvalReport> reports;
  for (const char* name : names) reports.push_back(make_report("node_cls", name, options));

  for_each_repeat(options.repeats, options.threads, [&](int r) {
    const SplitSpec split = repeat_split(g, options, r);
    const LabelGuard guard(g.labels(), g.n_classes(), &split);
    const PromptConfig rc = repeat_prompt(cfg, options.seed + static_cast<std::uint64_t>(r));
    std::vector<int> predicted[5];

    // Hard: nearest prototype in raw token space.
    predicted[0] = predict_raw(init_prototypes(contextual, split, guard), contextual, split.test_nodes, cfg.sim);

    // Temp: template only, the pretrained projector untouched.
    {
      const auto protos = init_prototypes(contextual, split, guard);
      predicted[1] = predict_classes(state.projector, protos, contextual, split.test_nodes, cfg.sim);
    }

    const TokenSet* sets[] = {&contextual, &stru, &sem};
    for (int i = 0; i < 3; ++i) {
      const auto tuned = tune_node_classification(state, *sets[i], split, guard, rc);
      predicted[2 + i] = predict_classes(tuned.projector, tuned.prototypes, *sets[i], split.test_nodes, cfg.sim);
    }
    const auto truth = test_labels(guard, split);
    for (int i = 0; i < 5; ++i) reports[i].values[r] = accuracy(predicted[i], truth);
  });
  const double wall = seconds_since(t0);
  for (auto& rep : reports) {
    finalize(rep);
    rep.wall_seconds = wall;
  }
  return reports;
}

std::vector<EvalReport> shot_sweep(const Graph& g, const TrainState& state, const PromptConfig& cfg,
                                   const HarnessOptions& options, std::span<const int> k_values) {
  require_labels(g);
  std::vector<int> class_size(g.n_classes(), 0);
  for (int y : g.labels()) ++class_size[y];
  const int smallest = class_size.empty() ? 0 : *std::min_element(class_size.begin(), class_size.end());

  std::vector<EvalReport> out;
  for (int k : k_values) {
    if (k < 1 || k + options.n_val_per_class > smallest) {
      spdlog::warn("shot sweep: skipping k = {} (smallest class has {} nodes, {} needed)", k, smallest,
                   k + options.n_val_per_class);
      continue;
    }
    HarnessOptions o = options;
    o.k = k;
    o.protocol = SplitProtocol::few_shot;
    EvalReport rep = run_few_shot(g, state, cfg, o);
    rep.variant = fmt::format("k={}", k);
    out.push_back(std::move(rep));
  }
  return out;
}

ParameterAudit parameter_audit(const TrainState& state) {
  ParameterAudit a;
  a.frozen = state.online.parameter_count() + state.target.parameter_count();
  for (const Matrix* t : state.projector.tensors()) a.tuned += static_cast<std::size_t>(t->size());
  a.added = 0;
  return a;
}

}  // namespace selfpro

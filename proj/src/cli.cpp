#include "selfpro/cli.hpp"

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "selfpro/config.hpp"
#include "selfpro/digest.hpp"
#include "selfpro/error.hpp"
#include "selfpro/harness.hpp"
#include "selfpro/pretrain.hpp"
#include "selfpro/prompt.hpp"
#include "selfpro/rng.hpp"

namespace selfpro {
namespace {

constexpr const char* kUsage =
    "usage: selfpro <command> [options]\n"
    "\n"
    "commands:\n"
    "  convert   turn a LINQS or edge-list dataset into an edge_list_dir\n"
    "  synth     write a stochastic block model graph\n"
    "  pretrain  pretrain the encoder and projector, write a checkpoint\n"
    "  tune      prompt-tune one split from a checkpoint, write an adapter\n"
    "  eval      repeated few-shot or link prediction evaluation\n"
    "  ablate    Hard / Temp / Tune / Stru / Sem on shared splits\n"
    "  sweep     few-shot accuracy for k = 1..kmax\n"
    "  audit     frozen / tuned / added parameter counts of a checkpoint\n"
    "\n"
    "run `selfpro <command> --help` for options.\n";

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("selfpro");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* lvl = std::getenv("SELFPRO_LOG")) {
    const std::string s = lvl;
    if (s == "debug") spdlog::set_level(spdlog::level::debug);
    else if (s == "info") spdlog::set_level(spdlog::level::info);
    else if (s == "warn") spdlog::set_level(spdlog::level::warn);
    else spdlog::warn("SELFPRO_LOG={} not recognized; using info", s);
  }
}

int env_threads() {
  const char* s = std::getenv("SELFPRO_THREADS");
  if (!s) return 1;
  const int n = std::atoi(s);
  return n >= 1 ? n : 1;
}

// Options shared by the config-driven commands.
struct ConfigOpts {
  std::optional<std::string> file;
  std::vector<std::string> overrides;

  void attach(CLI::App* app) {
    app->add_option("--config", file, "INI config file")->check(CLI::ExistingFile);
    app->add_option("--set", overrides, "key=value override (repeatable)");
  }

  RunConfig load() const {
    std::optional<std::filesystem::path> path;
    if (file) path = *file;
    RunConfig cfg = parse_config(path, overrides);
    cfg.harness.threads = env_threads();
    spdlog::info("config hash {}", cfg.hash);
    spdlog::info("seeds: base {} pretrain {} prompt {}", cfg.seed, cfg.pretrain.seed, cfg.prompt.seed);
    spdlog::debug("config:\n{}", canonical_dump(cfg));
    return cfg;
  }
};

ReportFormat parse_format(const std::string& s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "json") return ReportFormat::json;
  if (s == "markdown" || s == "md") return ReportFormat::markdown;
  throw Error(ErrorKind::usage, fmt::format("unknown report format '{}'", s));
}

ReportFormat format_for(const std::string& flag, const std::string& out) {
  if (!flag.empty()) return parse_format(flag);
  const auto ext = std::filesystem::path(out).extension().string();
  if (ext == ".json") return ReportFormat::json;
  if (ext == ".md") return ReportFormat::markdown;
  return ReportFormat::csv;
}

void log_report(const EvalReport& r) {
  spdlog::info("{} {}: {:.4f} +- {:.4f} over {} repeats ({:.1f}s)", r.task, r.variant, r.mean, r.std, r.n_repeats,
               r.wall_seconds);
}

TrainState checkpoint_or_pretrain(const std::optional<std::string>& ckpt, const Graph& g, const RunConfig& cfg) {
  if (ckpt) {
    TrainState s = load_checkpoint(*ckpt);
    if (s.online.input_dim() != g.n_features()) {
      throw Error(ErrorKind::shape, fmt::format("checkpoint expects {} features, data has {}", s.online.input_dim(),
                                                g.n_features()));
    }
    if (s.config_hash != cfg.hash) {
      spdlog::warn("checkpoint config hash {} differs from the run config {}", s.config_hash, cfg.hash);
    }
    return s;
  }
  spdlog::info("no --ckpt given; pretraining in-process");
  return pretrain(g, cfg.pretrain).state;
}

int cmd_convert(const std::string& format, const std::string& content, const std::string& cites,
                const std::string& edges, const std::optional<std::string>& features,
                const std::optional<std::string>& labels, const std::string& out) {
  ConvertedGraph cg = [&] {
    if (format == "linqs") {
      if (content.empty() || cites.empty()) throw Error(ErrorKind::usage, "linqs needs --content and --cites");
      return convert_linqs(content, cites);
    }
    if (format == "edgelist") {
      if (edges.empty()) throw Error(ErrorKind::usage, "edgelist needs --edges");
      std::optional<std::filesystem::path> f, l;
      if (features) f = *features;
      if (labels) l = *labels;
      return convert_edge_list(edges, f, l);
    }
    throw Error(ErrorKind::usage, fmt::format("unknown format '{}'", format));
  }();
  save_converted(cg, out);
  std::cout << fmt::format("nodes {} edges {} features {} classes {}\n", cg.graph.n_nodes(), cg.graph.n_edges(),
                           cg.graph.n_features(), cg.graph.n_classes());
  return 0;
}

}  // namespace

int dispatch(int argc, char** argv) {
  setup_logging();
  if (argc < 2) {
    std::cerr << kUsage;
    return 2;
  }

  CLI::App app{"Self-supervised graph prompt tuning"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // convert
  auto* convert = app.add_subcommand("convert", "convert a dataset into an edge_list_dir");
  std::string conv_format = "linqs", conv_content, conv_cites, conv_edges, conv_out;
  std::optional<std::string> conv_features, conv_labels;
  convert->add_option("--format", conv_format, "linqs|edgelist")->capture_default_str();
  convert->add_option("--content", conv_content, "LINQS .content file");
  convert->add_option("--cites", conv_cites, "LINQS .cites file");
  convert->add_option("--edges", conv_edges, "edge list file");
  convert->add_option("--features", conv_features, "feature rows: id,f1,f2,...");
  convert->add_option("--labels", conv_labels, "label rows: id label");
  convert->add_option("--out", conv_out, "output directory")->required();

  // synth
  auto* synth = app.add_subcommand("synth", "write a stochastic block model graph");
  SbmParams sbm;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  synth->add_option("--n", sbm.n, "nodes")->capture_default_str();
  synth->add_option("--classes", sbm.n_classes, "blocks")->capture_default_str();
  synth->add_option("--p-in", sbm.p_in, "within-block edge probability")->capture_default_str();
  synth->add_option("--p-out", sbm.p_out, "across-block edge probability")->capture_default_str();
  synth->add_option("--noise", sbm.feature_noise, "feature noise std")->capture_default_str();
  synth->add_option("--features", sbm.n_features, "feature columns")->capture_default_str();
  synth->add_option("--seed", synth_seed, "seed")->capture_default_str();
  synth->add_option("--out", synth_out, "output directory")->required();

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "pretrain and write a checkpoint");
  ConfigOpts pre_cfg;
  std::string pre_data, pre_out;
  std::optional<std::string> pre_trace;
  pre_cfg.attach(pre);
  pre->add_option("--data", pre_data, "edge_list_dir")->required();
  pre->add_option("--out", pre_out, "checkpoint path")->required();
  pre->add_option("--trace", pre_trace, "loss trace CSV (default: <out>.loss.csv)");

  // tune
  auto* tune = app.add_subcommand("tune", "prompt-tune one split and write an adapter");
  ConfigOpts tune_cfg;
  std::string tune_task = "node_cls", tune_data, tune_ckpt, tune_out;
  int tune_repeat = 0;
  tune_cfg.attach(tune);
  tune->add_option("--task", tune_task, "node_cls|link_pred")->capture_default_str();
  tune->add_option("--data", tune_data, "edge_list_dir")->required();
  tune->add_option("--ckpt", tune_ckpt, "checkpoint")->required();
  tune->add_option("--out", tune_out, "adapter path")->required();
  tune->add_option("--repeat", tune_repeat, "split index (seed = base + repeat)")->capture_default_str();
  std::optional<std::string> tune_mode, tune_injection;
  std::optional<double> tune_mu;
  tune->add_option("--mode", tune_mode, "none|structural|semantic");
  tune->add_option("--injection", tune_injection, "fixed|self");
  tune->add_option("--mu", tune_mu, "prompt weight for fixed injection");

  // eval / ablate / sweep
  struct EvalOpts {
    ConfigOpts cfg;
    std::string data, out, format;
    std::optional<std::string> ckpt, svg;
    bool random_encoder = false;
  };
  auto attach_eval = [](CLI::App* sub, EvalOpts& o) {
    o.cfg.attach(sub);
    sub->add_option("--data", o.data, "edge_list_dir")->required();
    sub->add_option("--ckpt", o.ckpt, "checkpoint (pretrains in-process when omitted)");
    sub->add_option("--out", o.out, "report path")->required();
    sub->add_option("--format", o.format, "csv|json|markdown (default from extension)");
    sub->add_flag("--random-encoder", o.random_encoder, "skip pretraining: randomly initialized encoder control");
  };
  auto* eval = app.add_subcommand("eval", "repeated evaluation");
  EvalOpts eval_o;
  std::string eval_task = "node_cls";
  attach_eval(eval, eval_o);
  eval->add_option("--task", eval_task, "node_cls|link_pred")->capture_default_str();

  auto* ablate = app.add_subcommand("ablate", "ablation variants on shared splits");
  EvalOpts abl_o;
  attach_eval(ablate, abl_o);
  ablate->add_option("--svg", abl_o.svg, "bar chart output");

  auto* sweep = app.add_subcommand("sweep", "shot sweep");
  EvalOpts sw_o;
  int sw_kmax = 10;
  attach_eval(sweep, sw_o);
  sweep->add_option("--kmax", sw_kmax, "largest k")->capture_default_str();
  sweep->add_option("--svg", sw_o.svg, "line chart output");

  // audit
  auto* audit = app.add_subcommand("audit", "parameter counts of a checkpoint");
  std::string audit_ckpt;
  audit->add_option("--ckpt", audit_ckpt, "checkpoint")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << kUsage;
    return 2;
  }

  auto state_for = [](const EvalOpts& o, const Graph& g, const RunConfig& cfg) {
    if (o.random_encoder) {
      if (o.ckpt) throw Error(ErrorKind::usage, "--random-encoder and --ckpt are exclusive");
      spdlog::info("control run: randomly initialized encoder and projector");
      return init_train_state(g.n_features(), cfg.pretrain);
    }
    return checkpoint_or_pretrain(o.ckpt, g, cfg);
  };

  try {
    if (*convert) {
      return cmd_convert(conv_format, conv_content, conv_cites, conv_edges, conv_features, conv_labels, conv_out);
    }
    if (*synth) {
      const Graph g = generate_sbm(sbm, synth_seed);
      save_graph(g, synth_out);
      spdlog::info("seed {}", synth_seed);
      std::cout << fmt::format("nodes {} edges {} homophily {:.4f}\n", g.n_nodes(), g.n_edges(), homophily_ratio(g));
      return 0;
    }
    if (*pre) {
      const RunConfig cfg = pre_cfg.load();
      const Graph g = load_graph(pre_data);
      spdlog::info("data digest {}", data_digest(pre_data));
      const auto result = pretrain(g, cfg.pretrain);
      save_checkpoint(result.state, pre_out);
      write_loss_trace(result.loss_trace, pre_trace ? std::filesystem::path(*pre_trace)
                                                    : std::filesystem::path(pre_out + ".loss.csv"));
      if (!result.loss_trace.empty()) {
        std::cout << fmt::format("epochs {} loss {} -> {}\n", result.loss_trace.size(), result.loss_trace.front(),
                                 result.loss_trace.back());
      }
      return 0;
    }
    if (*tune) {
      if (tune_mode) tune_cfg.overrides.push_back("mode=" + *tune_mode);
      if (tune_injection) tune_cfg.overrides.push_back("injection=" + (*tune_injection == "self" ? std::string("self_weight") : *tune_injection));
      if (tune_mu) tune_cfg.overrides.push_back(fmt::format("mu={}", *tune_mu));
      const RunConfig cfg = tune_cfg.load();
      const Graph g = load_graph(tune_data);
      const TrainState state = load_checkpoint(tune_ckpt);
      const std::string before = params_digest(state.online);
      PromptConfig pc = cfg.prompt;
      pc.seed = derive_seed(pc.seed, cfg.seed + static_cast<std::uint64_t>(tune_repeat));
      Adapter adapter;
      adapter.task = tune_task;
      adapter.config_hash = cfg.hash;
      if (tune_task == "node_cls") {
        const SplitSpec split = repeat_split(g, cfg.harness, tune_repeat);
        const LabelGuard guard(g.labels(), g.n_classes(), &split);
        const TokenSet tokens = build_tokens(state, g, pc);
        const auto tuned = tune_node_classification(state, tokens, split, guard, pc);
        std::vector<int> truth;
        for (NodeId v : split.test_nodes) truth.push_back(g.labels()[v]);
        const double acc =
            accuracy(predict_classes(tuned.projector, tuned.prototypes, tokens, split.test_nodes, pc.sim), truth);
        adapter.projector = tuned.projector;
        adapter.prototypes = tuned.prototypes.tokens;
        std::cout << fmt::format("split seed {} best epoch {} val {:.4f} test accuracy {:.4f}\n", split.seed,
                                 tuned.best_epoch, tuned.val_trace[tuned.best_epoch], acc);
      } else if (tune_task == "link_pred") {
        const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(tune_repeat);
        const EdgeSplit split = split_edges(g, cfg.harness.val_frac, cfg.harness.test_frac, seed);
        const Graph train_graph = g.with_edges(split.train_edges);
        pc.mode = cfg.harness.link_mode;
        const TokenSet tokens = build_tokens(state, train_graph, pc);
        const auto tuned = tune_link_prediction(state, tokens, split, pc);
        std::vector<EdgePair> pairs = split.test_edges;
        pairs.insert(pairs.end(), split.test_neg.begin(), split.test_neg.end());
        std::vector<int> truth(split.test_edges.size(), 1);
        truth.resize(pairs.size(), 0);
        const auto scores = score_links(tuned.projector, tokens, pairs, pc.sim);
        adapter.projector = tuned.projector;
        std::cout << fmt::format("split seed {} best epoch {} test auc {:.4f} ap {:.4f}\n", seed, tuned.best_epoch,
                                 auc(scores, truth), average_precision(scores, truth));
      } else {
        throw Error(ErrorKind::usage, fmt::format("unknown task '{}'", tune_task));
      }
      if (params_digest(state.online) != before) throw Error(ErrorKind::tuning, "encoder changed during tuning");
      save_adapter(adapter, tune_out);
      return 0;
    }
    if (*eval) {
      const RunConfig cfg = eval_o.cfg.load();
      const Graph g = load_graph(eval_o.data);
      spdlog::info("data digest {}", data_digest(eval_o.data));
      std::vector<EvalReport> reports;
      if (eval_task == "node_cls") {
        const TrainState state = state_for(eval_o, g, cfg);
        if (cfg.prompt.mode == PromptMode::none) {
          reports.push_back(run_few_shot(g, state, cfg.prompt, cfg.harness));
          reports.back().variant = "Tune";
        } else {
          // Both prompt modes and the better of the two.
          for (auto [mode, name] : {std::pair{PromptMode::structural, "Stru"}, std::pair{PromptMode::semantic, "Sem"}}) {
            PromptConfig pc = cfg.prompt;
            pc.mode = mode;
            reports.push_back(run_few_shot(g, state, pc, cfg.harness));
            reports.back().variant = name;
          }
          EvalReport best = reports[0].mean >= reports[1].mean ? reports[0] : reports[1];
          best.variant = "best:" + best.variant;
          reports.push_back(best);
        }
      } else if (eval_task == "link_pred") {
        HarnessOptions opts = cfg.harness;
        TrainState state;
        if (eval_o.ckpt || eval_o.random_encoder) {
          state = state_for(eval_o, g, cfg);
          opts.link_pretrain.reset();
          spdlog::warn("link prediction with a fixed encoder: it saw every edge, including held-out ones");
        }
        const LinkReports lr = run_link_prediction(g, state, cfg.prompt, opts);
        reports = {lr.auc, lr.ap};
      } else {
        throw Error(ErrorKind::usage, fmt::format("unknown task '{}'", eval_task));
      }
      for (const auto& r : reports) log_report(r);
      emit_report(reports, eval_o.out, format_for(eval_o.format, eval_o.out));
      return 0;
    }
    if (*ablate) {
      const RunConfig cfg = abl_o.cfg.load();
      const Graph g = load_graph(abl_o.data);
      const TrainState state = state_for(abl_o, g, cfg);
      const auto reports = run_ablation(g, state, cfg.prompt, cfg.harness);
      for (const auto& r : reports) log_report(r);
      emit_report(reports, abl_o.out, format_for(abl_o.format, abl_o.out));
      if (abl_o.svg) write_bars_svg(reports, *abl_o.svg);
      return 0;
    }
    if (*sweep) {
      const RunConfig cfg = sw_o.cfg.load();
      const Graph g = load_graph(sw_o.data);
      const TrainState state = state_for(sw_o, g, cfg);
      std::vector<int> ks;
      for (int k = 1; k <= sw_kmax; ++k) ks.push_back(k);
      const auto reports = shot_sweep(g, state, cfg.prompt, cfg.harness, ks);
      for (const auto& r : reports) log_report(r);
      emit_report(reports, sw_o.out, format_for(sw_o.format, sw_o.out));
      if (sw_o.svg) {
        std::vector<int> kept;
        for (const auto& r : reports) kept.push_back(std::stoi(r.variant.substr(2)));
        write_sweep_svg(reports, kept, *sw_o.svg);
      }
      return 0;
    }
    if (*audit) {
      const TrainState state = load_checkpoint(audit_ckpt);
      const ParameterAudit a = parameter_audit(state);
      std::cout << fmt::format("frozen {}\ntuned {}\nadded {}\n", a.frozen, a.tuned, a.added);
      std::cout << fmt::format("online digest {}\ntarget digest {}\n", params_digest(state.online),
                               params_digest(state.target));
      return 0;
    }
  } catch (const Error& e) {
    spdlog::error("{} error: {}", to_string(e.kind()), e.what());
    if (e.kind() == ErrorKind::usage) {
      std::cerr << kUsage;
      return 2;
    }
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  std::cerr << kUsage;
  return 2;
}

}  // namespace selfpro

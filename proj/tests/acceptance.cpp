// Acceptance run: prints one PASS/FAIL line per criterion, exits 1 if any fail.
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <random>
#include <unistd.h>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "selfpro/config.hpp"
#include "selfpro/digest.hpp"
#include "selfpro/gradcheck.hpp"
#include "selfpro/harness.hpp"
#include "selfpro/metrics.hpp"
#include "selfpro/rng.hpp"

using namespace selfpro;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void emit(int id, const std::string& name, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::cout << fmt::format("{} {:>2} {}: {}", pass ? "PASS" : "FAIL", id, name, detail) << std::endl;
}

template <class F>
void criterion(int id, const std::string& name, F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    emit(id, name, false, fmt::format("exception: {}", e.what()));
  }
}

Graph random_graph(int n, double p, int dim, std::uint64_t seed) {
  Rng rng(seed);
  std::bernoulli_distribution edge(p);
  std::normal_distribution<double> nd;
  std::vector<EdgePair> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (edge(rng)) edges.push_back({i, j});
    }
  }
  for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1});
  Matrix x(n, dim);
  for (auto& v : x.reshaped()) v = nd(rng);
  return Graph(edges, x);
}

std::string bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 1 ------------------------------------------------------------------------

void gradients() {
  const auto t0 = Clock::now();
  const Graph g = random_graph(10, 0.3, 4, 1);
  const EncoderInput in(g);
  PretrainConfig pc;
  pc.hidden = 4;
  pc.seed = 3;
  TrainState s = init_train_state(4, pc);
  s.target = init_params(4, 4, 4, 2, 99);
  const NegativeTable neg = sample_negative_table(g, 5, 2);

  LossFn pretext = [&](std::vector<Matrix>* grads) {
    PretextGrad pg;
    const double l = graphacl_loss(s, in, g, neg, {}, grads ? &pg : nullptr);
    if (grads) {
      *grads = pg.encoder;
      grads->insert(grads->end(), pg.projector.begin(), pg.projector.end());
    }
    return l;
  };
  std::vector<Matrix*> params = s.online.tensors();
  for (Matrix* m : s.projector.tensors()) params.push_back(m);
  const double e_pre = grad_check(pretext, params, 1e-6, 100, 7).max_rel_error;

  const Matrix tokens = encode(s.online, in);
  const std::vector<int> y = {0, 1, 2, 0, 1, 2, 0, 1, 2, 0};
  PrototypeSet protos;
  protos.tokens = Matrix::Random(3, 4);
  ProjectorParams proj = s.projector;
  LossFn node = [&](std::vector<Matrix>* grads) {
    return node_template_loss(proj, tokens, y, protos, 0.5, SimKind::dot, grads);
  };
  const double e_node = grad_check(node, proj.tensors(), 1e-6, 100, 8).max_rel_error;

  const auto triplets = sample_triplets(g, 4);
  LossFn link = [&](std::vector<Matrix>* grads) { return link_template_loss(proj, tokens, triplets, 0.5, SimKind::dot, grads); };
  const double e_link = grad_check(link, proj.tensors(), 1e-6, 100, 9).max_rel_error;

  const double secs = since(t0);
  const double worst = std::max({e_pre, e_node, e_link});
  emit(1, "gradient fidelity", worst < 1e-4 && secs < 10,
       fmt::format("max rel err pretext {:.2e} node {:.2e} link {:.2e}, {:.2f}s", e_pre, e_node, e_link, secs));
}

// 2 ------------------------------------------------------------------------

void two_hop() {
  Rng rng(5);
  int mismatches = 0;
  for (int t = 0; t < 100; ++t) {
    const int n = 2 + static_cast<int>(rng() % 49);
    const double p = std::uniform_real_distribution<double>(0.02, 0.3)(rng);
    std::bernoulli_distribution edge(p);
    std::vector<EdgePair> edges;
    std::vector<std::vector<int>> a(n, std::vector<int>(n, 0));
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (edge(rng)) {
          edges.push_back({i, j});
          a[i][j] = a[j][i] = 1;
        }
      }
    }
    const Graph g(edges, Matrix::Ones(n, 1));
    const Graph h = two_hop_graph(g, TwoHopMode::pure);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < n; ++k) {
        int sq = 0;
        for (int j = 0; j < n; ++j) sq += a[i][j] * a[j][k];
        const bool expect = i != k && sq > 0;
        if (expect != h.has_edge(i, k)) ++mismatches;
      }
    }
  }
  emit(2, "two-hop oracle", mismatches == 0, fmt::format("{} mismatched entries over 100 graphs", mismatches));
}

// 3 ------------------------------------------------------------------------

void metric_oracles() {
  Rng rng(11);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int n = 2 + static_cast<int>(rng() % 11);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (int i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng() % 6) / 5.0;
      y[i] = static_cast<int>(rng() % 2);
    }
    y[0] = 1;
    y[n - 1] = 0;
    double wins = 0, pairs = 0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (y[i] == 1 && y[j] == 0) {
          pairs += 1;
          wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
        }
      }
    }
    auto pos = [&](int i) {
      int p = 1;
      for (int j = 0; j < n; ++j) p += s[j] > s[i] || (s[j] == s[i] && j < i);
      return p;
    };
    double ap = 0;
    int n_pos = 0;
    for (int i = 0; i < n; ++i) {
      if (!y[i]) continue;
      ++n_pos;
      int above = 0;
      for (int j = 0; j < n; ++j) above += y[j] && pos(j) <= pos(i);
      ap += static_cast<double>(above) / pos(i);
    }
    ap /= n_pos;
    worst = std::max({worst, std::abs(auc(s, y) - wins / pairs), std::abs(average_precision(s, y) - ap)});
  }
  emit(3, "metric oracles", worst <= 1e-12, fmt::format("max abs deviation {:.1e} over 1000 cases", worst));
}

// Synthetic graphs ----------------------------------------------------------

Graph sbm(double p_in, double p_out, double noise, std::uint64_t seed) {
  SbmParams sp;
  sp.n = 400;
  sp.n_classes = 5;
  sp.p_in = p_in;
  sp.p_out = p_out;
  sp.feature_noise = noise;
  sp.n_features = 16;
  return generate_sbm(sp, seed);
}

struct Setup {
  RunConfig cfg;
  Graph g;
  TrainState state;
};

Setup pretrained(const Graph& g) {
  Setup s{default_config(), g, {}};
  s.cfg.harness.threads = 1;
  if (const char* t = std::getenv("SELFPRO_THREADS")) s.cfg.harness.threads = std::max(1, std::atoi(t));
  s.state = pretrain(g, s.cfg.pretrain).state;
  return s;
}

// 4, 5 -----------------------------------------------------------------------

void freeze_and_identities(const Setup& homo) {
  criterion(4, "freeze and zero-parameter audit", [&] {
    const std::string before = params_digest(homo.state.online) + params_digest(homo.state.target) +
                               params_digest(homo.state.projector);
    PromptConfig pc = homo.cfg.prompt;
    HarnessOptions o = homo.cfg.harness;
    o.repeats = 3;
    run_few_shot(homo.g, homo.state, pc, o);
    run_ablation(homo.g, homo.state, pc, o);
    const std::string after = params_digest(homo.state.online) + params_digest(homo.state.target) +
                              params_digest(homo.state.projector);
    const ParameterAudit a = parameter_audit(homo.state);
    emit(4, "freeze and zero-parameter audit", before == after && a.added == 0,
         fmt::format("digests {}, frozen {} tuned {} added {}", before == after ? "unchanged" : "CHANGED", a.frozen,
                     a.tuned, a.added));
  });
  criterion(5, "ablation identities", [&] {
    PromptConfig pc = homo.cfg.prompt;
    pc.mu = 0.0;
    pc.injection = Injection::fixed;
    const auto tuned = run_ablation(homo.g, homo.state, pc, homo.cfg.harness);
    pc.tune_epochs = 0;
    const auto frozen = run_ablation(homo.g, homo.state, pc, homo.cfg.harness);
    const bool stru = tuned[3].values == tuned[2].values;
    const bool temp = frozen[1].values == frozen[2].values;
    emit(5, "ablation identities", stru && temp,
         fmt::format("Stru(mu=0) == Tune: {} ({:.4f} vs {:.4f}); Temp == Tune at 0 epochs: {}", stru, tuned[3].mean,
                     tuned[2].mean, temp));
  });
}

// 6, 7 -----------------------------------------------------------------------

void cora() {
  const std::filesystem::path dir = SELFPRO_CORA_DIR;
  if (!std::filesystem::exists(dir / "edges.tsv")) {
    emit(6, "cora 1-shot node classification", false, fmt::format("dataset missing at {}", dir.string()));
    emit(7, "cora link prediction", false, fmt::format("dataset missing at {}", dir.string()));
    return;
  }
  const Graph g = load_graph(dir);
  RunConfig cfg = default_config();
  if (const char* t = std::getenv("SELFPRO_THREADS")) cfg.harness.threads = std::max(1, std::atoi(t));

  criterion(6, "cora 1-shot node classification", [&] {
    const auto t0 = Clock::now();
    const TrainState state = pretrain(g, cfg.pretrain).state;
    const EvalReport r = run_few_shot(g, state, cfg.prompt, cfg.harness);
    const double secs = since(t0);
    const TrainState random = init_train_state(g.n_features(), cfg.pretrain);
    const EvalReport control = run_few_shot(g, random, cfg.prompt, cfg.harness);
    const bool pass = secs < 1200 && r.mean >= 0.50 && r.mean - control.mean >= 0.10;
    emit(6, "cora 1-shot node classification", pass,
         fmt::format("accuracy {:.4f} +- {:.4f} (random encoder {:.4f}, gap {:+.2f} points), {:.0f}s", r.mean, r.std,
                     control.mean, 100 * (r.mean - control.mean), secs));
  });
  criterion(7, "cora link prediction", [&] {
    const auto t0 = Clock::now();
    RunConfig lc = cfg;
    lc.prompt.mode = cfg.harness.link_mode;
    const TrainState placeholder = init_train_state(g.n_features(), cfg.pretrain);
    const LinkReports r = run_link_prediction(g, placeholder, lc.prompt, lc.harness);
    const double secs = since(t0);
    emit(7, "cora link prediction", secs < 1200 && r.auc.mean >= 0.90 && r.ap.mean >= 0.90,
         fmt::format("AUC {:.4f} +- {:.4f}, AP {:.4f} +- {:.4f}, {:.0f}s", r.auc.mean, r.auc.std, r.ap.mean, r.ap.std,
                     secs));
  });
}

// 8, 9 -----------------------------------------------------------------------

void synthetic(const Setup& homo, const Setup& hetero) {
  criterion(8, "synthetic prompt directions", [&] {
    const auto a = run_ablation(homo.g, homo.state, homo.cfg.prompt, homo.cfg.harness);
    const auto b = run_ablation(hetero.g, hetero.state, hetero.cfg.prompt, hetero.cfg.harness);
    const bool stru = a[3].mean >= a[2].mean;
    const bool sem = b[4].mean >= b[2].mean;
    emit(8, "synthetic prompt directions", stru && sem,
         fmt::format("homophilous (h={:.2f}) Stru {:.4f} vs Tune {:.4f}; heterophilous (h={:.2f}) Sem {:.4f} vs Tune "
                     "{:.4f}",
                     homophily_ratio(homo.g), a[3].mean, a[2].mean, homophily_ratio(hetero.g), b[4].mean, b[2].mean));
  });
  criterion(9, "shot sweep", [&] {
    const int ks[] = {1, 10};
    const auto r = shot_sweep(homo.g, homo.state, homo.cfg.prompt, homo.cfg.harness, ks);
    const bool pass = r.size() == 2 && r[1].mean - r[0].mean >= 0.05;
    emit(9, "shot sweep", pass,
         r.size() == 2 ? fmt::format("k=1 {:.4f}, k=10 {:.4f} ({:+.2f} points)", r[0].mean, r[1].mean,
                                     100 * (r[1].mean - r[0].mean))
                       : std::string("k=10 infeasible"));
  });
}

// 10 -------------------------------------------------------------------------

void determinism(const Graph& g) {
  const auto tmp = std::filesystem::temp_directory_path() / fmt::format("selfpro-acceptance-{}", ::getpid());
  std::filesystem::create_directories(tmp);
  RunConfig cfg = parse_config(std::nullopt, std::vector<std::string>{"epochs=60", "seed=21", "repeats=4"});
  std::vector<std::string> files;
  for (int run = 0; run < 2; ++run) {
    cfg.harness.threads = run + 1;
    const TrainState s = pretrain(g, cfg.pretrain).state;
    save_checkpoint(s, tmp / fmt::format("run{}.ckpt", run));
    const TrainState loaded = load_checkpoint(tmp / fmt::format("run{}.ckpt", run));
    std::vector<EvalReport> reports = run_ablation(g, loaded, cfg.prompt, cfg.harness);
    const LinkReports lr = run_link_prediction(g, loaded, cfg.prompt, cfg.harness);
    reports.push_back(lr.auc);
    reports.push_back(lr.ap);
    emit_report(reports, tmp / fmt::format("run{}.json", run), ReportFormat::json);
    emit_report(reports, tmp / fmt::format("run{}.csv", run), ReportFormat::csv);
  }
  const bool ckpt = bytes(tmp / "run0.ckpt") == bytes(tmp / "run1.ckpt");
  const bool json = bytes(tmp / "run0.json") == bytes(tmp / "run1.json");
  const bool csv = bytes(tmp / "run0.csv") == bytes(tmp / "run1.csv");
  std::filesystem::remove_all(tmp);
  emit(10, "determinism", ckpt && json && csv,
       fmt::format("checkpoints {}, json reports {}, csv reports {} (config {})", ckpt ? "identical" : "DIFFER",
                   json ? "identical" : "DIFFER", csv ? "identical" : "DIFFER", cfg.hash.substr(0, 12)));
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  criterion(1, "gradient fidelity", gradients);
  criterion(2, "two-hop oracle", two_hop);
  criterion(3, "metric oracles", metric_oracles);

  // noise 4: one-hot signal still visible but 1-shot does not saturate
  const Setup homo = pretrained(sbm(0.3, 0.05, 4.0, 1));
  const Setup hetero = pretrained(sbm(0.05, 0.3, 0.1, 2));
  freeze_and_identities(homo);
  cora();
  synthetic(homo, hetero);
  criterion(10, "determinism", [&] { determinism(homo.g); });

  std::cout << (failures == 0 ? "all criteria passed" : fmt::format("{} criteria failed", failures)) << std::endl;
  return failures == 0 ? 0 : 1;
}

#include "selfpro/pretrain.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "selfpro/error.hpp"
#include "selfpro/rng.hpp"

namespace selfpro {
namespace {

constexpr std::uint64_t kEncoderStream = 1;
constexpr std::uint64_t kProjectorStream = 2;
constexpr std::uint64_t kNegativeStream = 3;

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Floyd's algorithm over the n-1 candidates obtained by skipping the anchor.
// `stamp` is scratch of size n, reused across calls.
void floyd_sample(int n, NodeId anchor, int m, Rng& rng, std::vector<std::uint32_t>& stamp,
                  std::uint32_t mark, std::vector<NodeId>& out) {
  out.clear();
  const int pool = n - 1;
  for (int j = pool - m; j < pool; ++j) {
    int r = std::uniform_int_distribution<int>(0, j)(rng);
    NodeId cand = r >= anchor ? r + 1 : r;
    if (stamp[cand] == mark) {
      r = j;
      cand = r >= anchor ? r + 1 : r;
    }
    stamp[cand] = mark;
    out.push_back(cand);
  }
}

void check_negative_count(const Graph& g, int m) {
  if (m < 0 || m > g.n_nodes() - 1) {
    throw Error(ErrorKind::sampling,
                fmt::format("cannot draw {} negatives from a {}-node graph", m, g.n_nodes()));
  }
}

int count_valid(const Graph& g) {
  int n = 0;
  for (NodeId v = 0; v < g.n_nodes(); ++v) n += g.degree(v) > 0;
  if (n == 0) throw Error(ErrorKind::pretext, "every node is isolated; the pretext has no positive pairs");
  return n;
}

// Shared body of both pretexts. `pos_key` rows score positives against
// `pos_target` rows; `neg_key` rows score negatives against `h` rows.
struct ContrastTerms {
  double loss = 0.0;
  Matrix d_pos_key, d_pos_target, d_neg_key, d_h;
};

ContrastTerms contrast(const Graph& g, const NegativeTable& negatives, double tau, const Matrix& pos_key,
                       const Matrix& pos_target, const Matrix& neg_key, const Matrix& h, bool want_grad) {
  const int n = g.n_nodes();
  const int n_valid = count_valid(g);
  if (static_cast<int>(negatives.size()) != n) {
    throw Error(ErrorKind::shape, "negative table does not cover every node");
  }
  ContrastTerms out;
  if (want_grad) {
    out.d_pos_key = Matrix::Zero(pos_key.rows(), pos_key.cols());
    out.d_pos_target = Matrix::Zero(pos_target.rows(), pos_target.cols());
    out.d_neg_key = Matrix::Zero(neg_key.rows(), neg_key.cols());
    out.d_h = Matrix::Zero(h.rows(), h.cols());
  }
  std::vector<double> scores;
  for (NodeId v = 0; v < n; ++v) {
    const auto& nbrs = g.neighbors(v);
    if (nbrs.empty()) continue;
    const auto& negs = negatives[v];

    // log sum_u exp(s_u), s_u = neg_key_v . h_u / tau
    scores.resize(negs.size());
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < negs.size(); ++i) {
      scores[i] = neg_key.row(v).dot(h.row(negs[i])) / tau;
      top = std::max(top, scores[i]);
    }
    double lse = top;
    if (!negs.empty()) {
      double acc = 0.0;
      for (double s : scores) acc += std::exp(s - top);
      lse = top + std::log(acc);
    }

    const double c = 1.0 / (static_cast<double>(n_valid) * static_cast<double>(nbrs.size()));
    double sig_sum = 0.0;
    for (NodeId p : nbrs) {
      const double pos = pos_key.row(v).dot(pos_target.row(p)) / tau;
      // -log(e^pos / (e^pos + e^lse)) = softplus(lse - pos)
      out.loss += c * softplus(lse - pos);
      if (want_grad) {
        const double sig = negs.empty() ? 0.0 : sigmoid(lse - pos);
        sig_sum += sig;
        out.d_pos_key.row(v) -= (c * sig / tau) * pos_target.row(p);
        out.d_pos_target.row(p) -= (c * sig / tau) * pos_key.row(v);
      }
    }
    if (want_grad && !negs.empty()) {
      const double coef = c * sig_sum / tau;
      for (std::size_t i = 0; i < negs.size(); ++i) {
        const double w = std::exp(scores[i] - lse);
        out.d_neg_key.row(v) += (coef * w) * h.row(negs[i]);
        out.d_h.row(negs[i]) += (coef * w) * neg_key.row(v);
      }
    }
  }
  return out;
}

std::vector<Matrix> zeros_like(const EncoderParams& p) {
  std::vector<Matrix> out;
  for (const auto& w : p.weights) out.push_back(Matrix::Zero(w.rows(), w.cols()));
  return out;
}

std::vector<Matrix> zeros_like(const ProjectorParams& p) {
  std::vector<Matrix> out;
  for (const Matrix* t : p.tensors()) out.push_back(Matrix::Zero(t->rows(), t->cols()));
  return out;
}

}  // namespace

std::vector<NodeId> sample_negatives(const Graph& g, NodeId anchor, int m, std::uint64_t seed) {
  check_negative_count(g, m);
  Rng rng(seed);
  std::vector<std::uint32_t> stamp(g.n_nodes(), 0);
  std::vector<NodeId> out;
  floyd_sample(g.n_nodes(), anchor, m, rng, stamp, 1, out);
  return out;
}

NegativeTable sample_negative_table(const Graph& g, int m, std::uint64_t seed) {
  check_negative_count(g, m);
  Rng rng(seed);
  NegativeTable table(g.n_nodes());
  std::vector<std::uint32_t> stamp(g.n_nodes(), 0);
  for (NodeId v = 0; v < g.n_nodes(); ++v) {
    if (g.degree(v) == 0) continue;
    floyd_sample(g.n_nodes(), v, m, rng, stamp, static_cast<std::uint32_t>(v) + 1, table[v]);
  }
  return table;
}

double graphacl_loss(const TrainState& state, const EncoderInput& input, const Graph& g,
                     const NegativeTable& negatives, PretextOptions opts, PretextGrad* grad) {
  EncoderTape tape;
  ProjectorTape ptape;
  RowNormTape h_norm, z_norm;
  Matrix h = encode(state.online, input, grad ? &tape : nullptr);
  Matrix h_target = encode(state.target, input);
  Matrix z = project(state.projector, h, grad ? &ptape : nullptr);
  if (opts.normalize) {
    h = normalize_rows(h, &h_norm);
    h_target = normalize_rows(h_target);
    z = normalize_rows(z, &z_norm);
  }

  const Matrix& neg_key = opts.negatives_use_projector ? z : h;
  ContrastTerms t = contrast(g, negatives, state.tau, z, h_target, neg_key, h, grad != nullptr);
  if (!grad) return t.loss;

  Matrix d_z = std::move(t.d_pos_key);
  Matrix d_h = std::move(t.d_h);
  if (opts.negatives_use_projector) {
    d_z += t.d_neg_key;
  } else {
    d_h += t.d_neg_key;
  }
  if (opts.normalize) {
    d_z = normalize_rows_backward(z_norm, d_z);
    d_h = normalize_rows_backward(h_norm, d_h);
  }
  Matrix d_h_from_z;
  grad->projector = project_backward(state.projector, ptape, d_z, &d_h_from_z);
  d_h += d_h_from_z;
  grad->encoder = encode_backward(state.online, input, tape, d_h);
  grad->target = zeros_like(state.target);
  return t.loss;
}

double smoothing_loss(const TrainState& state, const EncoderInput& input, const Graph& g,
                      const NegativeTable& negatives, PretextOptions opts, PretextGrad* grad) {
  EncoderTape tape;
  RowNormTape h_norm;
  Matrix h = encode(state.online, input, grad ? &tape : nullptr);
  if (opts.normalize) h = normalize_rows(h, &h_norm);
  ContrastTerms t = contrast(g, negatives, state.tau, h, h, h, h, grad != nullptr);
  if (!grad) return t.loss;
  Matrix d_h = t.d_pos_key + t.d_pos_target + t.d_neg_key + t.d_h;
  if (opts.normalize) d_h = normalize_rows_backward(h_norm, d_h);
  grad->encoder = encode_backward(state.online, input, tape, d_h);
  grad->projector = zeros_like(state.projector);
  grad->target = zeros_like(state.target);
  return t.loss;
}

TrainState init_train_state(int n_features, const PretrainConfig& cfg) {
  if (cfg.tau <= 0) throw Error(ErrorKind::argument, "tau must be positive");
  if (cfg.ema_momentum < 0 || cfg.ema_momentum > 1) throw Error(ErrorKind::argument, "ema_momentum must lie in [0, 1]");
  TrainState s;
  s.online = init_params(n_features, cfg.hidden, cfg.hidden, cfg.depth, derive_seed(cfg.seed, kEncoderStream));
  s.target = s.online;
  s.projector = init_projector(cfg.hidden, cfg.projector_depth, cfg.projector_bias,
                               derive_seed(cfg.seed, kProjectorStream));
  s.tau = cfg.tau;
  s.ema_momentum = cfg.ema_momentum;
  s.seed = cfg.seed;
  s.config_hash = cfg.config_hash;
  return s;
}

PretrainResult pretrain(const Graph& g, const PretrainConfig& cfg) {
  if (cfg.n_negatives < 1) throw Error(ErrorKind::argument, "n_negatives must be >= 1");
  PretrainResult result{init_train_state(g.n_features(), cfg), {}};
  if (cfg.epochs <= 0) return result;

  TrainState& state = result.state;
  const EncoderInput input(g);
  const int m = std::min(cfg.n_negatives, g.n_nodes() - 1);
  const int isolated = g.n_nodes() - count_valid(g);
  if (isolated > 0) spdlog::info("pretrain: {} isolated nodes contribute no positive pairs", isolated);

  OptimizerConfig ocfg;
  ocfg.kind = cfg.optimizer;
  ocfg.lr = cfg.lr;
  ocfg.momentum = cfg.momentum;
  ocfg.weight_decay = cfg.weight_decay;
  Optimizer opt(ocfg);
  const bool tune_projector = cfg.pretext == Pretext::graphacl;
  const PretextOptions opts{cfg.negatives_use_projector, cfg.normalize};

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto table = sample_negative_table(g, m, derive_seed(derive_seed(cfg.seed, kNegativeStream), state.step));
    PretextGrad grad;
    const double loss = cfg.pretext == Pretext::graphacl
                            ? graphacl_loss(state, input, g, table, opts, &grad)
                            : smoothing_loss(state, input, g, table, opts, &grad);
    if (!std::isfinite(loss)) {
      throw Error(ErrorKind::divergence, fmt::format("pretraining loss became non-finite at epoch {}", epoch));
    }
    result.loss_trace.push_back(loss);

    std::vector<Matrix*> params = state.online.tensors();
    std::vector<Matrix> grads = std::move(grad.encoder);
    if (tune_projector) {
      for (Matrix* p : state.projector.tensors()) params.push_back(p);
      for (auto& gp : grad.projector) grads.push_back(std::move(gp));
    }
    opt.step(params, grads);
    ema_update(state);
    ++state.step;
    if (epoch % 50 == 0 || epoch + 1 == cfg.epochs) spdlog::debug("pretrain epoch {} loss {:.6f}", epoch, loss);
  }
  return result;
}

void write_loss_trace(std::span<const double> trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, fmt::format("cannot write {}", path.string()));
  out << "epoch,loss\n";
  for (std::size_t i = 0; i < trace.size(); ++i) out << fmt::format("{},{}\n", i, trace[i]);
}

}  // namespace selfpro

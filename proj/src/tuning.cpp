#include <cmath>
#include <limits>
#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "selfpro/error.hpp"
#include "selfpro/metrics.hpp"
#include "selfpro/prompt.hpp"
#include "selfpro/rng.hpp"

namespace selfpro {
namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<Matrix*> mutable_tensors(ProjectorParams& p) { return p.tensors(); }

OptimizerConfig tune_optimizer(const PromptConfig& cfg) {
  OptimizerConfig o;
  o.kind = cfg.optimizer;
  o.lr = cfg.tune_lr;
  return o;
}

Matrix gather(const Matrix& m, std::span<const NodeId> nodes) {
  Matrix out(nodes.size(), m.cols());
  for (std::size_t i = 0; i < nodes.size(); ++i) out.row(i) = m.row(nodes[i]);
  return out;
}

}  // namespace

double node_template_loss(const ProjectorParams& projector, const Matrix& node_tokens,
                          std::span<const int> node_labels, const PrototypeSet& prototypes, double tau,
                          SimKind sim, std::vector<Matrix>* grad) {
  const Eigen::Index n = node_tokens.rows();
  const Eigen::Index c_count = prototypes.tokens.rows();
  if (static_cast<Eigen::Index>(node_labels.size()) != n) throw Error(ErrorKind::shape, "one label per node token");
  if (tau <= 0) throw Error(ErrorKind::argument, "tau must be positive");

  Matrix stacked(n + c_count, node_tokens.cols());
  stacked << node_tokens, prototypes.tokens;
  ProjectorTape tape;
  Matrix p = project(projector, stacked, grad ? &tape : nullptr);
  RowNormTape norm;
  if (sim == SimKind::cosine) p = normalize_rows(p, &norm);

  const Matrix scores = p.topRows(n) * p.bottomRows(c_count).transpose() / tau;
  Matrix d_scores(n, c_count);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double top = scores.row(i).maxCoeff();
    const double lse = top + std::log((scores.row(i).array() - top).exp().sum());
    loss += lse - scores(i, node_labels[i]);
    if (grad) {
      d_scores.row(i) = (scores.row(i).array() - lse).exp();
      d_scores(i, node_labels[i]) -= 1.0;
    }
  }
  if (!grad) return loss;

  Matrix d_p(n + c_count, p.cols());
  d_p.topRows(n) = d_scores * p.bottomRows(c_count) / tau;
  d_p.bottomRows(c_count) = d_scores.transpose() * p.topRows(n) / tau;
  if (sim == SimKind::cosine) d_p = normalize_rows_backward(norm, d_p);
  *grad = project_backward(projector, tape, d_p);
  return loss;
}

double link_template_loss(const ProjectorParams& projector, const Matrix& tokens,
                          std::span<const Triplet> triplets, double tau, SimKind sim, std::vector<Matrix>* grad) {
  if (tau <= 0) throw Error(ErrorKind::argument, "tau must be positive");
  ProjectorTape tape;
  Matrix p = project(projector, tokens, grad ? &tape : nullptr);
  RowNormTape norm;
  if (sim == SimKind::cosine) p = normalize_rows(p, &norm);
  Matrix d_p;
  if (grad) d_p = Matrix::Zero(p.rows(), p.cols());
  double loss = 0.0;
  for (const auto& t : triplets) {
    const double s_pos = p.row(t.anchor).dot(p.row(t.positive)) / tau;
    const double s_neg = p.row(t.anchor).dot(p.row(t.negative)) / tau;
    // -log(e^a / (e^a + e^b)) = softplus(b - a)
    loss += softplus(s_neg - s_pos);
    if (grad) {
      const double sig = sigmoid(s_neg - s_pos) / tau;
      d_p.row(t.anchor) += sig * (p.row(t.negative) - p.row(t.positive));
      d_p.row(t.positive) -= sig * p.row(t.anchor);
      d_p.row(t.negative) += sig * p.row(t.anchor);
    }
  }
  if (!grad) return loss;
  if (sim == SimKind::cosine) d_p = normalize_rows_backward(norm, d_p);
  *grad = project_backward(projector, tape, d_p);
  return loss;
}

NodeTuneResult tune_node_classification(const TrainState& state, const TokenSet& tokens, const SplitSpec& split,
                                        const LabelGuard& labels, const PromptConfig& cfg) {
  if (split.train_nodes.empty()) throw Error(ErrorKind::split, "node classification needs labeled training nodes");
  if (cfg.tau_tune <= 0) throw Error(ErrorKind::argument, "tau_tune must be positive");

  NodeTuneResult result;
  result.projector = state.projector;
  result.prototypes = init_prototypes(tokens, split, labels);

  const Matrix train_tokens = gather(tokens.tokens, split.train_nodes);
  std::vector<int> train_labels;
  for (NodeId v : split.train_nodes) train_labels.push_back(labels.label(v));
  std::vector<int> val_labels;
  for (NodeId v : split.val_nodes) val_labels.push_back(labels.label(v));

  auto val_score = [&](const ProjectorParams& p) {
    if (split.val_nodes.empty()) return 0.0;
    return accuracy(predict_classes(p, result.prototypes, tokens, split.val_nodes, cfg.sim), val_labels);
  };

  ProjectorParams current = state.projector;
  double best = val_score(current);
  result.val_trace.push_back(best);
  Optimizer opt(tune_optimizer(cfg));
  const auto params = mutable_tensors(current);

  for (int epoch = 1; epoch <= cfg.tune_epochs; ++epoch) {
    std::vector<Matrix> grad;
    const double loss = node_template_loss(current, train_tokens, train_labels, result.prototypes, cfg.tau_tune,
                                           cfg.sim, &grad);
    if (!std::isfinite(loss)) throw Error(ErrorKind::tuning, fmt::format("tuning loss non-finite at epoch {}", epoch));
    result.loss_trace.push_back(loss);
    opt.step(params, grad);

    const double score = val_score(current);
    result.val_trace.push_back(score);
    if (split.val_nodes.empty() || score > best) {
      best = score;
      result.best_epoch = epoch;
      result.projector = current;
    } else if (cfg.patience > 0 && epoch - result.best_epoch >= cfg.patience) {
      break;
    }
  }
  return result;
}

NodeTuneResult tune_node_classification(const TrainState& state, const Graph& g, const SplitSpec& split,
                                        const PromptConfig& cfg) {
  LabelGuard labels(g.labels(), g.n_classes(), &split);
  return tune_node_classification(state, build_tokens(state, g, cfg), split, labels, cfg);
}

std::vector<Triplet> sample_triplets(const Graph& train_graph, std::uint64_t seed) {
  Rng rng(seed);
  const int n = train_graph.n_nodes();
  std::vector<Triplet> out;
  out.reserve(2 * train_graph.n_edges());
  std::uniform_int_distribution<int> pick(0, std::max(n - 1, 0));
  int skipped = 0;
  for (NodeId v = 0; v < n; ++v) {
    const auto& nbrs = train_graph.neighbors(v);
    // A node adjacent to everything has no negative to offer.
    if (nbrs.empty() || static_cast<int>(nbrs.size()) >= n - 1) {
      ++skipped;
      continue;
    }
    for (NodeId a : nbrs) {
      NodeId b;
      do {
        b = pick(rng);
      } while (b == v || train_graph.has_edge(v, b));
      out.push_back({v, a, b});
    }
  }
  if (skipped) spdlog::debug("link tuning: skipped {} nodes without a usable triplet", skipped);
  return out;
}

LinkTuneResult tune_link_prediction(const TrainState& state, const TokenSet& tokens, const EdgeSplit& split,
                                    const PromptConfig& cfg) {
  if (split.train_edges.empty()) throw Error(ErrorKind::split, "link prediction needs training edges");
  if (cfg.tau_tune <= 0) throw Error(ErrorKind::argument, "tau_tune must be positive");
  const Graph train_graph(split.train_edges, Matrix(tokens.size(), 0));

  std::vector<EdgePair> val_pairs = split.val_edges;
  val_pairs.insert(val_pairs.end(), split.val_neg.begin(), split.val_neg.end());
  std::vector<int> val_labels(split.val_edges.size(), 1);
  val_labels.resize(val_pairs.size(), 0);
  const bool has_val = !split.val_edges.empty() && !split.val_neg.empty();
  auto val_score = [&](const ProjectorParams& p) {
    return has_val ? auc(score_links(p, tokens, val_pairs, cfg.sim), val_labels) : 0.0;
  };

  LinkTuneResult result;
  result.projector = state.projector;
  ProjectorParams current = state.projector;
  double best = val_score(current);
  result.val_trace.push_back(best);
  Optimizer opt(tune_optimizer(cfg));
  const auto params = mutable_tensors(current);

  for (int epoch = 1; epoch <= cfg.tune_epochs; ++epoch) {
    const auto triplets = sample_triplets(train_graph, derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    std::vector<Matrix> grad;
    const double loss = link_template_loss(current, tokens.tokens, triplets, cfg.tau_tune, cfg.sim, &grad);
    if (!std::isfinite(loss)) throw Error(ErrorKind::tuning, fmt::format("tuning loss non-finite at epoch {}", epoch));
    result.loss_trace.push_back(loss);
    opt.step(params, grad);

    const double score = val_score(current);
    result.val_trace.push_back(score);
    if (!has_val || score > best) {
      best = score;
      result.best_epoch = epoch;
      result.projector = current;
    } else if (cfg.patience > 0 && epoch - result.best_epoch >= cfg.patience) {
      break;
    }
  }
  return result;
}

}  // namespace selfpro

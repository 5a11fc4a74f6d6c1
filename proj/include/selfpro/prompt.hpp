#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "selfpro/graph.hpp"
#include "selfpro/model.hpp"
#include "selfpro/optim.hpp"

namespace selfpro {

enum class PromptMode { none, structural, semantic };
enum class Injection { fixed, self_weight };
enum class SimKind { dot, cosine };

struct PromptConfig {
  PromptMode mode = PromptMode::none;
  Injection injection = Injection::fixed;
  double mu = 0.5;
  SimKind sim = SimKind::cosine;
  double tau_tune = 10.0;
  double tune_lr = 1e-3;
  int tune_epochs = 200;
  // Early stopping on the validation metric; 0 disables it.
  int patience = 50;
  TwoHopMode two_hop = TwoHopMode::union_;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::uint64_t seed = 0;
};

enum class TokenKind { contextual, semantic, structural, injected };

struct TokenSet {
  Matrix tokens;
  TokenKind provenance = TokenKind::contextual;
  // Per-node mixing weights, present for self-weight injection.
  std::optional<Vector> weights;

  int size() const { return static_cast<int>(tokens.rows()); }
};

// Row c is the prototype token of class c.
struct PrototypeSet {
  Matrix tokens;

  int n_classes() const { return static_cast<int>(tokens.rows()); }
};

double similarity(const Eigen::Ref<const RowVector>& a, const Eigen::Ref<const RowVector>& b, SimKind kind);

// Frozen online-encoder outputs on the original, identity and two-hop graphs.
TokenSet contextual_tokens(const TrainState& state, const Graph& g);
TokenSet semantic_tokens(const TrainState& state, const Graph& g);
TokenSet structural_tokens(const TrainState& state, const Graph& g, TwoHopMode mode);

// fixed:       t_v = mu s_v + (1 - mu) h_v
// self_weight: t_v = w_v s_v + (1 - w_v) h_v, w_v = (1 + cos(h_v, s_v)) / 2
TokenSet inject(const TokenSet& h, const TokenSet& s, const PromptConfig& cfg);

// Node tokens for the configured prompt mode: contextual tokens for `none`,
// otherwise the structural or semantic prompt injected into them.
TokenSet build_tokens(const TrainState& state, const Graph& g, const PromptConfig& cfg);

// Mean token of the labeled training nodes of each class.
PrototypeSet init_prototypes(const TokenSet& tokens, const SplitSpec& split, const LabelGuard& labels);

// Template loss over labeled nodes, summed:
//   -sum_v log softmax_c(sim(g(t_v), g(t_c)) / tau)[y_v]
// Gradients (projector tensors order) are written to *grad when non-null.
double node_template_loss(const ProjectorParams& projector, const Matrix& node_tokens,
                          std::span<const int> node_labels, const PrototypeSet& prototypes, double tau,
                          SimKind sim, std::vector<Matrix>* grad = nullptr);

struct Triplet {
  NodeId anchor;
  NodeId positive;
  NodeId negative;
};

// -sum log exp(s_va) / (exp(s_va) + exp(s_vb)), s = sim(g(t_v), g(t_x)) / tau.
double link_template_loss(const ProjectorParams& projector, const Matrix& tokens,
                          std::span<const Triplet> triplets, double tau, SimKind sim,
                          std::vector<Matrix>* grad = nullptr);

// argmax_c sim(g(t_v), g(t_c)); ties go to the lowest class id. In these
// batched paths a zero vector has cosine 0 with everything.
int predict_class(const ProjectorParams& projector, const PrototypeSet& prototypes, const TokenSet& tokens,
                  NodeId v, SimKind sim);
std::vector<int> predict_classes(const ProjectorParams& projector, const PrototypeSet& prototypes,
                                 const TokenSet& tokens, std::span<const NodeId> nodes, SimKind sim);

// Nearest prototype straight in token space, no projector.
std::vector<int> predict_raw(const PrototypeSet& prototypes, const TokenSet& tokens,
                             std::span<const NodeId> nodes, SimKind sim);

struct NodeTuneResult {
  ProjectorParams projector;
  PrototypeSet prototypes;
  std::vector<double> loss_trace;
  std::vector<double> val_trace;
  int best_epoch = 0;
};

// Prompt tuning for node classification. Only a private copy of the
// projector is optimized; prototypes stay fixed after initialization and
// the encoder is never touched. Validation accuracy picks the best epoch.
NodeTuneResult tune_node_classification(const TrainState& state, const TokenSet& tokens, const SplitSpec& split,
                                        const LabelGuard& labels, const PromptConfig& cfg);
NodeTuneResult tune_node_classification(const TrainState& state, const Graph& g, const SplitSpec& split,
                                        const PromptConfig& cfg);

struct LinkTuneResult {
  ProjectorParams projector;
  std::vector<double> loss_trace;
  std::vector<double> val_trace;
  int best_epoch = 0;
};

// One triplet per training edge endpoint: anchor v, its neighbor a as the
// positive and a uniform non-neighbor b of v as the negative.
std::vector<Triplet> sample_triplets(const Graph& train_graph, std::uint64_t seed);

// tokens must come from the training graph (train edges only).
LinkTuneResult tune_link_prediction(const TrainState& state, const TokenSet& tokens, const EdgeSplit& split,
                                    const PromptConfig& cfg);

// sim(g(t_u), g(t_v))
double score_link(const ProjectorParams& projector, const TokenSet& tokens, NodeId u, NodeId v,
                  SimKind sim = SimKind::dot);
std::vector<double> score_links(const ProjectorParams& projector, const TokenSet& tokens,
                                std::span<const EdgePair> pairs, SimKind sim = SimKind::dot);

}  // namespace selfpro

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "selfpro/graph.hpp"
#include "selfpro/model.hpp"
#include "selfpro/optim.hpp"

namespace selfpro {

enum class Pretext { graphacl, smoothing };

struct PretrainConfig {
  int epochs = 200;
  double lr = 5e-4;
  double tau = 10.0;
  int n_negatives = 256;  // capped at n_nodes - 1
  double ema_momentum = 0.99;
  Pretext pretext = Pretext::graphacl;
  std::uint64_t seed = 0;
  int hidden = 256;
  int depth = 2;
  int projector_depth = 1;
  bool projector_bias = false;
  // Score negatives with z_v instead of h_v (the upstream asymmetric form).
  bool negatives_use_projector = false;
  // L2-normalize h, z and h~ before scoring.
  bool normalize = true;
  OptimizerKind optimizer = OptimizerKind::adam;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::string config_hash;
};

// m distinct nodes drawn uniformly without replacement from V \ {anchor}.
std::vector<NodeId> sample_negatives(const Graph& g, NodeId anchor, int m, std::uint64_t seed);

// One negative list per anchor. Isolated anchors get an empty list.
using NegativeTable = std::vector<std::vector<NodeId>>;
NegativeTable sample_negative_table(const Graph& g, int m, std::uint64_t seed);

// Gradients of a pretext loss. `target` is always zero-filled: the target
// encoder sits behind a stop-gradient.
struct PretextGrad {
  std::vector<Matrix> encoder;
  std::vector<Matrix> projector;
  std::vector<Matrix> target;
};

struct PretextOptions {
  bool negatives_use_projector = false;
  bool normalize = false;
};

// Asymmetric neighbor contrast:
//   -1/|V'| sum_v 1/|N(v)| sum_{p in N(v)}
//        log exp(z_v.h~_p/tau) / (exp(z_v.h~_p/tau) + sum_{u in neg(v)} exp(h_v.h_u/tau))
// with z = g_phi(h), h from the online encoder, h~ from the target encoder,
// and V' the non-isolated nodes. With opts.normalize every representation is
// unit-normalized first, so scores are cosines.
double graphacl_loss(const TrainState& state, const EncoderInput& input, const Graph& g,
                     const NegativeTable& negatives, PretextOptions opts = {}, PretextGrad* grad = nullptr);

// Symmetric smoothing baseline: the same sum with every representation taken
// from the online encoder and no projector.
double smoothing_loss(const TrainState& state, const EncoderInput& input, const Graph& g,
                      const NegativeTable& negatives, PretextOptions opts = {}, PretextGrad* grad = nullptr);

// Online and target encoders start identical.
TrainState init_train_state(int n_features, const PretrainConfig& cfg);

struct PretrainResult {
  TrainState state;
  std::vector<double> loss_trace;
};

PretrainResult pretrain(const Graph& g, const PretrainConfig& cfg);

// "epoch,loss" rows.
void write_loss_trace(std::span<const double> trace, const std::filesystem::path& path);

}  // namespace selfpro

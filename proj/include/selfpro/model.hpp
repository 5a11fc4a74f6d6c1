#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "selfpro/graph.hpp"
#include "selfpro/types.hpp"

namespace selfpro {

enum class Activation { relu, identity };

// GCN encoder weights. Layer l maps d_{l-1} -> d_l; the activation sits
// between layers and never after the last one.
struct EncoderParams {
  std::vector<Matrix> weights;
  Activation activation = Activation::relu;

  int depth() const { return static_cast<int>(weights.size()); }
  int input_dim() const { return weights.empty() ? 0 : static_cast<int>(weights.front().rows()); }
  int output_dim() const { return weights.empty() ? 0 : static_cast<int>(weights.back().cols()); }
  std::size_t parameter_count() const;

  std::vector<Matrix*> tensors();
  std::vector<const Matrix*> tensors() const;
};

// Glorot-uniform weights: every entry within +-sqrt(6 / (fan_in + fan_out)).
EncoderParams init_params(int d_in, int d_hidden, int d_out, int depth, std::uint64_t seed);

// g_phi: one linear layer, or two with a ReLU between them. Square overall.
// Biases (1 x d rows) are present only when the projector was built with them.
struct ProjectorParams {
  std::vector<Matrix> weights;
  std::vector<Matrix> biases;

  int dim() const { return weights.empty() ? 0 : static_cast<int>(weights.front().rows()); }
  int depth() const { return static_cast<int>(weights.size()); }
  bool has_bias() const { return !biases.empty(); }
  std::size_t parameter_count() const;

  std::vector<Matrix*> tensors();
  std::vector<const Matrix*> tensors() const;
};

ProjectorParams init_projector(int dim, int depth, bool bias, std::uint64_t seed);
ProjectorParams identity_projector(int dim);

// D^{-1/2} (A + I) D^{-1/2}, D the degree matrix of A + I.
SparseMatrix normalize_adjacency(const Graph& g);

// Normalized adjacency plus features, prepared once per graph. Mostly-zero
// feature matrices (bag-of-words style) are kept sparse.
class EncoderInput {
 public:
  explicit EncoderInput(const Graph& g);

  int n_nodes() const { return static_cast<int>(adjacency_.rows()); }
  int n_features() const { return n_features_; }
  const SparseMatrix& adjacency() const { return adjacency_; }

  // X * W and X^T * G without caring how X is stored.
  Matrix features_times(const Matrix& w) const;
  Matrix features_transpose_times(const Matrix& g) const;

 private:
  SparseMatrix adjacency_;
  std::optional<Matrix> dense_;
  std::optional<SparseMatrix> sparse_;
  int n_features_ = 0;
};

// Intermediate values kept by encode() for the backward pass.
struct EncoderTape {
  std::vector<Matrix> pre_activation;  // Â H_{l-1} W_l per layer
};

Matrix encode(const EncoderParams& params, const EncoderInput& input, EncoderTape* tape = nullptr);
Matrix encode(const EncoderParams& params, const Graph& g);

// Gradients of the weights given dL/dH for the encoder output.
std::vector<Matrix> encode_backward(const EncoderParams& params, const EncoderInput& input,
                                    const EncoderTape& tape, const Matrix& d_out);

struct ProjectorTape {
  std::vector<Matrix> layer_input;
  std::vector<Matrix> pre_activation;
};

Matrix project(const ProjectorParams& p, const Matrix& h, ProjectorTape* tape = nullptr);

// Returns gradients in ProjectorParams::tensors() order; fills *d_input with
// dL/dH when requested.
std::vector<Matrix> project_backward(const ProjectorParams& p, const ProjectorTape& tape,
                                     const Matrix& d_out, Matrix* d_input = nullptr);

// Row-wise L2 normalization. Zero rows stay zero.
struct RowNormTape {
  Vector norms;
  Matrix normalized;
};
Matrix normalize_rows(const Matrix& m, RowNormTape* tape = nullptr);
Matrix normalize_rows_backward(const RowNormTape& tape, const Matrix& d_out);

struct TrainState {
  EncoderParams online;
  EncoderParams target;
  ProjectorParams projector;
  double tau = 0.5;
  double ema_momentum = 0.99;
  std::uint64_t step = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
};

// target <- m * target + (1 - m) * online.
void ema_update(TrainState& state);

inline constexpr const char* kCheckpointMagic = "selfpro-ckpt-v1";
inline constexpr const char* kAdapterMagic = "selfpro-adapter-v1";

// Atomic: written to a temporary sibling, then renamed.
void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

struct Adapter {
  ProjectorParams projector;
  std::optional<Matrix> prototypes;
  std::string task;
  std::string config_hash;
};

void save_adapter(const Adapter& adapter, const std::filesystem::path& path);
Adapter load_adapter(const std::filesystem::path& path);

}  // namespace selfpro

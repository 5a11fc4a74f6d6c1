#include "selfpro/model.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>

#include "selfpro/error.hpp"
#include "selfpro/rng.hpp"

namespace selfpro {
namespace {

Matrix glorot(int rows, int cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix w(rows, cols);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  return w;
}

void relu_inplace(Matrix& m) { m = m.cwiseMax(0.0); }

void relu_mask(Matrix& grad, const Matrix& pre) {
  grad = (pre.array() > 0.0).select(grad, 0.0);
}

}  // namespace

std::size_t EncoderParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
  return n;
}

std::vector<Matrix*> EncoderParams::tensors() {
  std::vector<Matrix*> out;
  for (auto& w : weights) out.push_back(&w);
  return out;
}

std::vector<const Matrix*> EncoderParams::tensors() const {
  std::vector<const Matrix*> out;
  for (const auto& w : weights) out.push_back(&w);
  return out;
}

EncoderParams init_params(int d_in, int d_hidden, int d_out, int depth, std::uint64_t seed) {
  if (d_in <= 0 || d_hidden <= 0 || d_out <= 0 || depth <= 0) {
    throw Error(ErrorKind::argument, "encoder dimensions and depth must be positive");
  }
  Rng rng(seed);
  EncoderParams p;
  for (int l = 0; l < depth; ++l) {
    const int rows = l == 0 ? d_in : d_hidden;
    const int cols = l == depth - 1 ? d_out : d_hidden;
    p.weights.push_back(glorot(rows, cols, rng));
  }
  return p;
}

std::size_t ProjectorParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
  for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
  return n;
}

std::vector<Matrix*> ProjectorParams::tensors() {
  std::vector<Matrix*> out;
  for (auto& w : weights) out.push_back(&w);
  for (auto& b : biases) out.push_back(&b);
  return out;
}

std::vector<const Matrix*> ProjectorParams::tensors() const {
  std::vector<const Matrix*> out;
  for (const auto& w : weights) out.push_back(&w);
  for (const auto& b : biases) out.push_back(&b);
  return out;
}

ProjectorParams init_projector(int dim, int depth, bool bias, std::uint64_t seed) {
  if (dim <= 0 || depth < 1 || depth > 2) {
    throw Error(ErrorKind::argument, fmt::format("projector needs dim > 0 and depth 1 or 2 (got {}, {})", dim, depth));
  }
  Rng rng(seed);
  ProjectorParams p;
  for (int l = 0; l < depth; ++l) {
    p.weights.push_back(glorot(dim, dim, rng));
    if (bias) p.biases.push_back(Matrix::Zero(1, dim));
  }
  return p;
}

ProjectorParams identity_projector(int dim) {
  ProjectorParams p;
  p.weights.push_back(Matrix::Identity(dim, dim));
  return p;
}

SparseMatrix normalize_adjacency(const Graph& g) {
  const int n = g.n_nodes();
  Vector inv_sqrt(n);
  for (int v = 0; v < n; ++v) inv_sqrt[v] = 1.0 / std::sqrt(static_cast<double>(g.degree(v) + 1));
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(2 * g.n_edges() + static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) {
    entries.emplace_back(v, v, inv_sqrt[v] * inv_sqrt[v]);
    for (NodeId u : g.neighbors(v)) entries.emplace_back(v, u, inv_sqrt[v] * inv_sqrt[u]);
  }
  SparseMatrix a(n, n);
  a.setFromTriplets(entries.begin(), entries.end());
  return a;
}

EncoderInput::EncoderInput(const Graph& g)
    : adjacency_(normalize_adjacency(g)), n_features_(g.n_features()) {
  const Matrix& x = g.features();
  const Eigen::Index nnz = (x.array() != 0.0).count();
  if (x.size() > 0 && static_cast<double>(nnz) < 0.1 * static_cast<double>(x.size())) {
    sparse_ = x.sparseView();
  } else {
    dense_ = x;
  }
}

Matrix EncoderInput::features_times(const Matrix& w) const {
  if (sparse_) return *sparse_ * w;
  return *dense_ * w;
}

Matrix EncoderInput::features_transpose_times(const Matrix& g) const {
  if (sparse_) return sparse_->transpose() * g;
  return dense_->transpose() * g;
}

Matrix encode(const EncoderParams& params, const EncoderInput& input, EncoderTape* tape) {
  if (params.depth() == 0) throw Error(ErrorKind::shape, "encoder has no layers");
  if (params.input_dim() != input.n_features()) {
    throw Error(ErrorKind::shape, fmt::format("encoder expects {} features, graph has {}",
                                              params.input_dim(), input.n_features()));
  }
  if (tape) tape->pre_activation.clear();
  Matrix h;
  for (int l = 0; l < params.depth(); ++l) {
    Matrix mixed = l == 0 ? input.features_times(params.weights[0]) : Matrix(h * params.weights[l]);
    Matrix pre = input.adjacency() * mixed;
    if (tape) tape->pre_activation.push_back(pre);
    h = std::move(pre);
    if (l + 1 < params.depth() && params.activation == Activation::relu) relu_inplace(h);
  }
  return h;
}

Matrix encode(const EncoderParams& params, const Graph& g) { return encode(params, EncoderInput(g)); }

std::vector<Matrix> encode_backward(const EncoderParams& params, const EncoderInput& input,
                                    const EncoderTape& tape, const Matrix& d_out) {
  const int depth = params.depth();
  std::vector<Matrix> grads(depth);
  Matrix d = d_out;
  for (int l = depth - 1; l >= 0; --l) {
    // Â is symmetric, so Â^T d = Â d.
    Matrix d_mixed = input.adjacency() * d;
    if (l == 0) {
      grads[0] = input.features_transpose_times(d_mixed);
    } else {
      Matrix h_prev = tape.pre_activation[l - 1];
      if (params.activation == Activation::relu) relu_inplace(h_prev);
      grads[l] = h_prev.transpose() * d_mixed;
      d = d_mixed * params.weights[l].transpose();
      if (params.activation == Activation::relu) relu_mask(d, tape.pre_activation[l - 1]);
    }
  }
  return grads;
}

Matrix project(const ProjectorParams& p, const Matrix& h, ProjectorTape* tape) {
  if (p.depth() == 0) throw Error(ErrorKind::shape, "projector has no layers");
  if (h.cols() != p.dim()) {
    throw Error(ErrorKind::shape, fmt::format("projector expects dim {}, got {}", p.dim(), h.cols()));
  }
  if (tape) {
    tape->layer_input.clear();
    tape->pre_activation.clear();
  }
  Matrix cur = h;
  for (int l = 0; l < p.depth(); ++l) {
    if (tape) tape->layer_input.push_back(cur);
    Matrix pre = cur * p.weights[l];
    if (p.has_bias()) pre.rowwise() += p.biases[l].row(0);
    if (tape) tape->pre_activation.push_back(pre);
    cur = std::move(pre);
    if (l + 1 < p.depth()) relu_inplace(cur);
  }
  return cur;
}

std::vector<Matrix> project_backward(const ProjectorParams& p, const ProjectorTape& tape,
                                     const Matrix& d_out, Matrix* d_input) {
  const int depth = p.depth();
  std::vector<Matrix> w_grads(depth), b_grads(p.has_bias() ? depth : 0);
  Matrix d = d_out;
  for (int l = depth - 1; l >= 0; --l) {
    w_grads[l] = tape.layer_input[l].transpose() * d;
    if (p.has_bias()) b_grads[l] = d.colwise().sum();
    if (l > 0 || d_input) {
      Matrix d_in = d * p.weights[l].transpose();
      if (l > 0) {
        relu_mask(d_in, tape.pre_activation[l - 1]);
        d = std::move(d_in);
      } else {
        *d_input = std::move(d_in);
      }
    }
  }
  std::vector<Matrix> out = std::move(w_grads);
  for (auto& b : b_grads) out.push_back(std::move(b));
  return out;
}

void ema_update(TrainState& state) {
  const double m = state.ema_momentum;
  if (state.online.depth() != state.target.depth()) {
    throw Error(ErrorKind::shape, "online and target encoders differ in depth");
  }
  for (int l = 0; l < state.online.depth(); ++l) {
    auto& t = state.target.weights[l];
    const auto& o = state.online.weights[l];
    if (t.rows() != o.rows() || t.cols() != o.cols()) {
      throw Error(ErrorKind::shape, "online and target encoder shapes differ");
    }
    t = m * t + (1.0 - m) * o;
  }
}

Matrix normalize_rows(const Matrix& m, RowNormTape* tape) {
  Matrix out = m;
  Vector norms(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    norms[i] = m.row(i).norm();
    if (norms[i] > 0.0) out.row(i) /= norms[i];
  }
  if (tape) {
    tape->norms = std::move(norms);
    tape->normalized = out;
  }
  return out;
}

Matrix normalize_rows_backward(const RowNormTape& tape, const Matrix& d_out) {
  Matrix d = Matrix::Zero(d_out.rows(), d_out.cols());
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    if (tape.norms[i] == 0.0) continue;
    const double along = tape.normalized.row(i).dot(d_out.row(i));
    d.row(i) = (d_out.row(i) - along * tape.normalized.row(i)) / tape.norms[i];
  }
  return d;
}

}  // namespace selfpro

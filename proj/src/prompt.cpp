#include "selfpro/prompt.hpp"

#include <cmath>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "selfpro/error.hpp"

namespace selfpro {

double similarity(const Eigen::Ref<const RowVector>& a, const Eigen::Ref<const RowVector>& b, SimKind kind) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::shape, fmt::format("similarity of vectors with {} and {} entries", a.size(), b.size()));
  }
  const double dot = a.dot(b);
  if (kind == SimKind::dot) return dot;
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw Error(ErrorKind::similarity, "cosine similarity with a zero vector");
  return dot / (na * nb);
}

namespace {

TokenSet tokens_of(const TrainState& state, const Graph& g, TokenKind kind) {
  return TokenSet{encode(state.online, EncoderInput(g)), kind, std::nullopt};
}

}  // namespace

TokenSet contextual_tokens(const TrainState& state, const Graph& g) {
  return tokens_of(state, g, TokenKind::contextual);
}

TokenSet semantic_tokens(const TrainState& state, const Graph& g) {
  return tokens_of(state, identity_graph(g), TokenKind::semantic);
}

TokenSet structural_tokens(const TrainState& state, const Graph& g, TwoHopMode mode) {
  return tokens_of(state, two_hop_graph(g, mode), TokenKind::structural);
}

TokenSet inject(const TokenSet& h, const TokenSet& s, const PromptConfig& cfg) {
  if (h.tokens.rows() != s.tokens.rows() || h.tokens.cols() != s.tokens.cols()) {
    throw Error(ErrorKind::shape, "contextual and prompt tokens differ in shape");
  }
  TokenSet out;
  out.provenance = TokenKind::injected;
  if (cfg.injection == Injection::fixed) {
    if (cfg.mu < 0.0 || cfg.mu > 1.0) throw Error(ErrorKind::argument, fmt::format("mu = {} is outside [0, 1]", cfg.mu));
    out.tokens = cfg.mu * s.tokens + (1.0 - cfg.mu) * h.tokens;
    return out;
  }
  const Eigen::Index n = h.tokens.rows();
  Vector w(n);
  int fallbacks = 0;
  out.tokens.resize(n, h.tokens.cols());
  for (Eigen::Index v = 0; v < n; ++v) {
    const double nh = h.tokens.row(v).norm();
    const double ns = s.tokens.row(v).norm();
    if (nh == 0.0 || ns == 0.0) {
      w[v] = 0.5;
      ++fallbacks;
    } else {
      w[v] = 0.5 * (1.0 + h.tokens.row(v).dot(s.tokens.row(v)) / (nh * ns));
    }
    out.tokens.row(v) = w[v] * s.tokens.row(v) + (1.0 - w[v]) * h.tokens.row(v);
  }
  if (fallbacks) spdlog::info("self-weight injection: {} zero token rows fell back to w = 0.5", fallbacks);
  out.weights = std::move(w);
  return out;
}

TokenSet build_tokens(const TrainState& state, const Graph& g, const PromptConfig& cfg) {
  TokenSet h = contextual_tokens(state, g);
  switch (cfg.mode) {
    case PromptMode::none:
      return h;
    case PromptMode::structural:
      return inject(h, structural_tokens(state, g, cfg.two_hop), cfg);
    case PromptMode::semantic:
      return inject(h, semantic_tokens(state, g), cfg);
  }
  return h;
}

PrototypeSet init_prototypes(const TokenSet& tokens, const SplitSpec& split, const LabelGuard& labels) {
  const int c_count = labels.n_classes();
  PrototypeSet p{Matrix::Zero(c_count, tokens.tokens.cols())};
  std::vector<int> counts(c_count, 0);
  for (NodeId v : split.train_nodes) {
    const int y = labels.label(v);
    p.tokens.row(y) += tokens.tokens.row(v);
    ++counts[y];
  }
  for (int c = 0; c < c_count; ++c) {
    if (counts[c] == 0) throw Error(ErrorKind::prototype, fmt::format("class {} has no labeled training node", c));
    p.tokens.row(c) /= static_cast<double>(counts[c]);
  }
  return p;
}

namespace {

Matrix prompted(const ProjectorParams& projector, const Matrix& rows, SimKind sim) {
  Matrix out = project(projector, rows);
  return sim == SimKind::cosine ? normalize_rows(out) : out;
}

int argmax_lowest(const RowVector& scores) {
  int best = 0;
  for (int c = 1; c < scores.size(); ++c) {
    if (scores[c] > scores[best]) best = c;
  }
  return best;
}

std::vector<int> nearest(const Matrix& queries, const Matrix& protos) {
  const Matrix scores = queries * protos.transpose();
  std::vector<int> out(queries.rows());
  for (Eigen::Index i = 0; i < queries.rows(); ++i) out[i] = argmax_lowest(scores.row(i));
  return out;
}

Matrix gather_rows(const Matrix& m, std::span<const NodeId> nodes) {
  Matrix out(nodes.size(), m.cols());
  for (std::size_t i = 0; i < nodes.size(); ++i) out.row(i) = m.row(nodes[i]);
  return out;
}

}  // namespace

int predict_class(const ProjectorParams& projector, const PrototypeSet& prototypes, const TokenSet& tokens,
                  NodeId v, SimKind sim) {
  const NodeId ids[] = {v};
  return predict_classes(projector, prototypes, tokens, ids, sim).front();
}

std::vector<int> predict_classes(const ProjectorParams& projector, const PrototypeSet& prototypes,
                                 const TokenSet& tokens, std::span<const NodeId> nodes, SimKind sim) {
  return nearest(prompted(projector, gather_rows(tokens.tokens, nodes), sim),
                 prompted(projector, prototypes.tokens, sim));
}

std::vector<int> predict_raw(const PrototypeSet& prototypes, const TokenSet& tokens,
                             std::span<const NodeId> nodes, SimKind sim) {
  const Matrix q = gather_rows(tokens.tokens, nodes);
  if (sim == SimKind::dot) return nearest(q, prototypes.tokens);
  return nearest(normalize_rows(q), normalize_rows(prototypes.tokens));
}

double score_link(const ProjectorParams& projector, const TokenSet& tokens, NodeId u, NodeId v, SimKind sim) {
  const EdgePair pair[] = {{u, v}};
  return score_links(projector, tokens, pair, sim).front();
}

std::vector<double> score_links(const ProjectorParams& projector, const TokenSet& tokens,
                                std::span<const EdgePair> pairs, SimKind sim) {
  Matrix p = project(projector, tokens.tokens);
  if (sim == SimKind::cosine) p = normalize_rows(p);
  std::vector<double> out;
  out.reserve(pairs.size());
  for (auto [u, v] : pairs) out.push_back(p.row(u).dot(p.row(v)));
  return out;
}

}  // namespace selfpro

#include "selfpro/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "selfpro/error.hpp"
#include "selfpro/rng.hpp"

namespace selfpro {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::load: return "load";
    case ErrorKind::parse: return "parse";
    case ErrorKind::shape: return "shape";
    case ErrorKind::infeasible_split: return "infeasible-split";
    case ErrorKind::sampling: return "sampling";
    case ErrorKind::argument: return "argument";
    case ErrorKind::metric: return "metric";
    case ErrorKind::pretext: return "pretext";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::tuning: return "tuning";
    case ErrorKind::split: return "split";
    case ErrorKind::similarity: return "similarity";
    case ErrorKind::prototype: return "prototype";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::usage: return "usage";
  }
  return "unknown";
}

Graph::Graph(std::span<const EdgePair> edges, Matrix features,
             std::optional<std::vector<int>> labels, int n_classes)
    : adjacency_(features.rows()),
      features_(std::move(features)),
      labels_(std::move(labels)),
      n_classes_(n_classes) {
  const int n = n_nodes();
  for (auto [u, v] : edges) {
    if (u < 0 || v < 0 || u >= n || v >= n) {
      throw Error(ErrorKind::shape,
                  fmt::format("edge ({}, {}) references a node outside [0, {})", u, v, n));
    }
    if (u == v) continue;
    adjacency_[u].push_back(v);
    adjacency_[v].push_back(u);
  }
  for (auto& nbrs : adjacency_) {
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    n_edges_ += nbrs.size();
  }
  n_edges_ /= 2;
  if (labels_ && n_classes_ == 0 && !labels_->empty()) {
    n_classes_ = *std::max_element(labels_->begin(), labels_->end()) + 1;
  }
  validate();
}

bool Graph::has_edge(NodeId u, NodeId v) const {
  const auto& nbrs = adjacency_[u];
  return std::binary_search(nbrs.begin(), nbrs.end(), v);
}

std::vector<EdgePair> Graph::edges() const {
  std::vector<EdgePair> out;
  out.reserve(n_edges_);
  for (NodeId u = 0; u < n_nodes(); ++u) {
    for (NodeId v : adjacency_[u]) {
      if (u < v) out.emplace_back(u, v);
    }
  }
  return out;
}

const std::vector<int>& Graph::labels() const {
  if (!labels_) throw Error(ErrorKind::argument, "graph has no labels");
  return *labels_;
}

Graph Graph::with_edges(std::span<const EdgePair> edges) const {
  return Graph(edges, features_, labels_, n_classes_);
}

Graph Graph::without_labels() const {
  Graph g = *this;
  g.labels_.reset();
  g.n_classes_ = 0;
  return g;
}

void Graph::validate() const {
  if (!features_.allFinite()) throw Error(ErrorKind::shape, "feature matrix has non-finite entries");
  if (labels_) {
    if (static_cast<int>(labels_->size()) != n_nodes()) {
      throw Error(ErrorKind::shape, fmt::format("{} labels for {} nodes", labels_->size(), n_nodes()));
    }
    for (std::size_t v = 0; v < labels_->size(); ++v) {
      int y = (*labels_)[v];
      if (y < 0 || y >= n_classes_) {
        throw Error(ErrorKind::argument,
                    fmt::format("node {} has label {} outside [0, {})", v, y, n_classes_));
      }
    }
  }
}

Graph two_hop_graph(const Graph& g, TwoHopMode mode) {
  const int n = g.n_nodes();
  std::vector<EdgePair> edges;
  std::vector<int> mark(n, -1);
  for (NodeId i = 0; i < n; ++i) {
    if (mode == TwoHopMode::union_) {
      for (NodeId j : g.neighbors(i)) {
        if (i < j) edges.emplace_back(i, j);
      }
    }
    for (NodeId j : g.neighbors(i)) {
      for (NodeId k : g.neighbors(j)) {
        if (k <= i || mark[k] == i) continue;
        mark[k] = i;
        edges.emplace_back(i, k);
      }
    }
  }
  return g.with_edges(edges);
}

Graph identity_graph(const Graph& g) { return g.with_edges({}); }

Graph permute_nodes(const Graph& g, std::span<const NodeId> perm) {
  const int n = g.n_nodes();
  if (static_cast<int>(perm.size()) != n) {
    throw Error(ErrorKind::shape, "permutation length does not match node count");
  }
  Matrix x(n, g.n_features());
  for (int v = 0; v < n; ++v) x.row(perm[v]) = g.features().row(v);
  std::vector<EdgePair> edges;
  for (auto [u, v] : g.edges()) edges.emplace_back(perm[u], perm[v]);
  std::optional<std::vector<int>> labels;
  if (g.labeled()) {
    labels.emplace(n);
    for (int v = 0; v < n; ++v) (*labels)[perm[v]] = g.labels()[v];
  }
  return Graph(edges, std::move(x), std::move(labels), g.n_classes());
}

namespace {

std::vector<std::vector<NodeId>> nodes_by_class(const Graph& g) {
  if (!g.labeled()) throw Error(ErrorKind::argument, "split sampling needs a labeled graph");
  std::vector<std::vector<NodeId>> by_class(g.n_classes());
  for (NodeId v = 0; v < g.n_nodes(); ++v) by_class[g.labels()[v]].push_back(v);
  return by_class;
}

}  // namespace

SplitSpec sample_k_shot(const Graph& g, int k, int n_val_per_class, std::uint64_t seed) {
  if (k < 0 || n_val_per_class < 0) throw Error(ErrorKind::argument, "negative split size");
  auto by_class = nodes_by_class(g);
  for (int c = 0; c < static_cast<int>(by_class.size()); ++c) {
    if (static_cast<int>(by_class[c].size()) < k + n_val_per_class) {
      throw Error(ErrorKind::infeasible_split,
                  fmt::format("class {} has {} nodes, fewer than k + n_val = {}", c,
                              by_class[c].size(), k + n_val_per_class));
    }
  }
  SplitSpec split;
  split.seed = seed;
  Rng rng(seed);
  std::vector<char> taken(g.n_nodes(), 0);
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    for (int i = 0; i < k; ++i) split.train_nodes.push_back(members[i]);
    for (int i = k; i < k + n_val_per_class; ++i) split.val_nodes.push_back(members[i]);
    for (int i = 0; i < k + n_val_per_class; ++i) taken[members[i]] = 1;
  }
  for (NodeId v = 0; v < g.n_nodes(); ++v) {
    if (!taken[v]) split.test_nodes.push_back(v);
  }
  return split;
}

SplitSpec sample_semi_supervised(const Graph& g, int per_class, int n_val, int n_test,
                                 std::uint64_t seed) {
  auto by_class = nodes_by_class(g);
  SplitSpec split;
  split.seed = seed;
  Rng rng(seed);
  std::vector<char> taken(g.n_nodes(), 0);
  for (int c = 0; c < static_cast<int>(by_class.size()); ++c) {
    auto& members = by_class[c];
    if (static_cast<int>(members.size()) < per_class) {
      throw Error(ErrorKind::infeasible_split,
                  fmt::format("class {} has {} nodes, fewer than {}", c, members.size(), per_class));
    }
    std::shuffle(members.begin(), members.end(), rng);
    for (int i = 0; i < per_class; ++i) {
      split.train_nodes.push_back(members[i]);
      taken[members[i]] = 1;
    }
  }
  std::vector<NodeId> rest;
  for (NodeId v = 0; v < g.n_nodes(); ++v) {
    if (!taken[v]) rest.push_back(v);
  }
  if (static_cast<int>(rest.size()) < n_val + n_test) {
    throw Error(ErrorKind::infeasible_split,
                fmt::format("{} unlabeled nodes cannot hold {} val + {} test", rest.size(), n_val, n_test));
  }
  std::shuffle(rest.begin(), rest.end(), rng);
  split.val_nodes.assign(rest.begin(), rest.begin() + n_val);
  split.test_nodes.assign(rest.begin() + n_val, rest.begin() + n_val + n_test);
  std::sort(split.val_nodes.begin(), split.val_nodes.end());
  std::sort(split.test_nodes.begin(), split.test_nodes.end());
  return split;
}

EdgeSplit split_edges(const Graph& g, double val_frac, double test_frac, std::uint64_t seed) {
  if (val_frac < 0 || test_frac < 0 || val_frac + test_frac >= 1.0) {
    throw Error(ErrorKind::argument,
                fmt::format("edge split fractions {} + {} must be in [0, 1)", val_frac, test_frac));
  }
  EdgeSplit split;
  split.seed = seed;
  auto edges = g.edges();
  const std::size_t m = edges.size();
  const auto n_val = static_cast<std::size_t>(std::floor(val_frac * static_cast<double>(m)));
  const auto n_test = static_cast<std::size_t>(std::floor(test_frac * static_cast<double>(m)));

  Rng rng(seed);
  std::shuffle(edges.begin(), edges.end(), rng);
  split.val_edges.assign(edges.begin(), edges.begin() + n_val);
  split.test_edges.assign(edges.begin() + n_val, edges.begin() + n_val + n_test);
  split.train_edges.assign(edges.begin() + n_val + n_test, edges.end());

  const std::size_t wanted = n_val + n_test;
  const auto n = static_cast<std::uint64_t>(g.n_nodes());
  const std::uint64_t pairs = n < 2 ? 0 : n * (n - 1) / 2;
  if (pairs - m < wanted) {
    throw Error(ErrorKind::sampling,
                fmt::format("graph has {} non-edges, cannot sample {} negatives", pairs - m, wanted));
  }
  if (wanted == 0) return split;

  // Rejection sampling with a retry cap of 100x the requested count.
  std::unordered_set<std::uint64_t> seen;
  std::vector<EdgePair> negatives;
  negatives.reserve(wanted);
  std::uniform_int_distribution<int> pick(0, g.n_nodes() - 1);
  const std::size_t cap = 100 * wanted;
  std::size_t tries = 0;
  while (negatives.size() < wanted) {
    if (++tries > cap) {
      throw Error(ErrorKind::sampling,
                  fmt::format("negative sampling exhausted {} tries with {} of {} pairs", cap,
                              negatives.size(), wanted));
    }
    int u = pick(rng);
    int v = pick(rng);
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    if (g.has_edge(u, v)) continue;
    if (!seen.insert(static_cast<std::uint64_t>(u) * n + static_cast<std::uint64_t>(v)).second) continue;
    negatives.emplace_back(u, v);
  }
  split.val_neg.assign(negatives.begin(), negatives.begin() + n_val);
  split.test_neg.assign(negatives.begin() + n_val, negatives.end());
  return split;
}

Graph generate_sbm(const SbmParams& p, std::uint64_t seed) {
  if (p.n < p.n_classes || p.n_classes < 1) {
    throw Error(ErrorKind::argument,
                fmt::format("SBM needs n >= n_classes >= 1 (got n={}, classes={})", p.n, p.n_classes));
  }
  if (p.p_in < 0 || p.p_in > 1 || p.p_out < 0 || p.p_out > 1) {
    throw Error(ErrorKind::argument, "SBM probabilities must lie in [0, 1]");
  }
  if (p.feature_noise < 0) throw Error(ErrorKind::argument, "feature_noise must be >= 0");

  Rng rng(seed);
  std::vector<int> labels(p.n);
  for (int v = 0; v < p.n; ++v) labels[v] = v % p.n_classes;

  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<EdgePair> edges;
  for (int u = 0; u < p.n; ++u) {
    for (int v = u + 1; v < p.n; ++v) {
      double prob = labels[u] == labels[v] ? p.p_in : p.p_out;
      if (coin(rng) < prob) edges.emplace_back(u, v);
    }
  }

  const int d = std::max(p.n_features, p.n_classes);
  std::normal_distribution<double> noise(0.0, 1.0);
  Matrix x(p.n, d);
  for (int v = 0; v < p.n; ++v) {
    for (int j = 0; j < d; ++j) x(v, j) = p.feature_noise * noise(rng);
    x(v, labels[v]) += 1.0;
  }
  return Graph(edges, std::move(x), std::move(labels), p.n_classes);
}

double homophily_ratio(const Graph& g) {
  if (!g.labeled()) throw Error(ErrorKind::metric, "homophily ratio needs labels");
  if (g.n_edges() == 0) throw Error(ErrorKind::metric, "homophily ratio of an edgeless graph");
  std::size_t same = 0;
  const auto& y = g.labels();
  for (auto [u, v] : g.edges()) same += y[u] == y[v];
  return static_cast<double>(same) / static_cast<double>(g.n_edges());
}

LabelGuard::LabelGuard(std::vector<int> labels, int n_classes, const SplitSpec* split)
    : labels_(std::move(labels)), roles_(labels_.size(), Role::other), n_classes_(n_classes) {
  if (split) {
    for (NodeId v : split->train_nodes) roles_.at(v) = Role::train;
    for (NodeId v : split->val_nodes) roles_.at(v) = Role::val;
    for (NodeId v : split->test_nodes) roles_.at(v) = Role::test;
  }
}

int LabelGuard::label(NodeId v) const {
  ++reads_[static_cast<int>(roles_.at(v))];
  return labels_[v];
}

}  // namespace selfpro

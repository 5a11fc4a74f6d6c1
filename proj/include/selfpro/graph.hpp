#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "selfpro/types.hpp"

namespace selfpro {

using NodeId = int;
using EdgePair = std::pair<NodeId, NodeId>;

// Undirected simple graph with dense node features and optional labels.
// Node ids are dense integers 0..n-1. Edges are stored as sorted adjacency
// lists; self-loops and duplicates are dropped on construction.
class Graph {
 public:
  Graph() = default;

  // Builds a graph from an arbitrary (possibly directed, duplicated,
  // self-looped) edge list. n_nodes is features.rows().
  Graph(std::span<const EdgePair> edges, Matrix features,
        std::optional<std::vector<int>> labels = std::nullopt, int n_classes = 0);

  int n_nodes() const { return static_cast<int>(adjacency_.size()); }
  std::size_t n_edges() const { return n_edges_; }
  int n_features() const { return static_cast<int>(features_.cols()); }

  const std::vector<NodeId>& neighbors(NodeId v) const { return adjacency_[v]; }
  int degree(NodeId v) const { return static_cast<int>(adjacency_[v].size()); }
  bool has_edge(NodeId u, NodeId v) const;

  // Undirected edges as (i, j) with i < j, lexicographically sorted.
  std::vector<EdgePair> edges() const;

  const Matrix& features() const { return features_; }

  bool labeled() const { return labels_.has_value(); }
  const std::vector<int>& labels() const;
  int n_classes() const { return n_classes_; }

  // Same nodes, features and labels; edge set replaced.
  Graph with_edges(std::span<const EdgePair> edges) const;
  Graph without_labels() const;

  // Throws Error{shape} / Error{argument} when an invariant is broken.
  void validate() const;

 private:
  std::vector<std::vector<NodeId>> adjacency_;
  std::size_t n_edges_ = 0;
  Matrix features_;
  std::optional<std::vector<int>> labels_;
  int n_classes_ = 0;
};

enum class TwoHopMode { union_, pure };

// Pure: (A2)_ik = 1 iff some j links i-j and j-k, i != k. Union: A or A2.
Graph two_hop_graph(const Graph& g, TwoHopMode mode = TwoHopMode::union_);

// Adjacency replaced by the identity: no edges are kept, and the encoder's
// self-loop normalization leaves every node seeing only itself.
Graph identity_graph(const Graph& g);

// Applies node permutation perm (old id v becomes perm[v]).
Graph permute_nodes(const Graph& g, std::span<const NodeId> perm);

struct SplitSpec {
  std::vector<NodeId> train_nodes;
  std::vector<NodeId> val_nodes;
  std::vector<NodeId> test_nodes;
  std::uint64_t seed = 0;
};

// k train and n_val_per_class val nodes per class, everything else test.
SplitSpec sample_k_shot(const Graph& g, int k, int n_val_per_class, std::uint64_t seed);

// Semi-supervised protocol: per_class train nodes per class, then n_val and
// n_test nodes drawn from the rest.
SplitSpec sample_semi_supervised(const Graph& g, int per_class, int n_val, int n_test,
                                 std::uint64_t seed);

struct EdgeSplit {
  std::vector<EdgePair> train_edges;
  std::vector<EdgePair> val_edges;
  std::vector<EdgePair> test_edges;
  std::vector<EdgePair> val_neg;
  std::vector<EdgePair> test_neg;
  std::uint64_t seed = 0;
};

EdgeSplit split_edges(const Graph& g, double val_frac, double test_frac, std::uint64_t seed);

struct SbmParams {
  int n = 400;
  int n_classes = 2;
  double p_in = 0.3;
  double p_out = 0.05;
  double feature_noise = 1.0;
  // Feature columns; the first n_classes carry the one-hot class signal.
  // Values below n_classes are raised to n_classes.
  int n_features = 0;
};

Graph generate_sbm(const SbmParams& params, std::uint64_t seed);

double homophily_ratio(const Graph& g);

// Label reads with per-role accounting. Every label consumed during tuning
// goes through here, so a harness can prove test labels stayed untouched.
class LabelGuard {
 public:
  enum class Role : std::uint8_t { train, val, test, other };

  LabelGuard(std::vector<int> labels, int n_classes, const SplitSpec* split = nullptr);

  int label(NodeId v) const;
  int n_classes() const { return n_classes_; }

  std::size_t reads(Role role) const { return reads_[static_cast<int>(role)]; }

 private:
  std::vector<int> labels_;
  std::vector<Role> roles_;
  int n_classes_;
  mutable std::size_t reads_[4] = {0, 0, 0, 0};
};

// edge_list_dir layout: edges.tsv, features.csv, optional labels.txt.
Graph load_graph(const std::filesystem::path& dir);
void save_graph(const Graph& g, const std::filesystem::path& dir);

// Raw inputs with arbitrary node identifiers, reindexed to 0..n-1.
struct ConvertedGraph {
  Graph graph;
  std::vector<std::string> node_names;   // dense id -> raw id
  std::vector<std::string> class_names;  // class id -> raw label
};

// LINQS layout: content rows "<id> <f...> <label>", cites rows "<a> <b>".
ConvertedGraph convert_linqs(const std::filesystem::path& content,
                             const std::filesystem::path& cites);

// Whitespace separated edge list; optional "id,f1,f2,..." feature rows and
// "id label" rows. Without features every node gets a single constant 1.
ConvertedGraph convert_edge_list(const std::filesystem::path& edges,
                                 const std::optional<std::filesystem::path>& features,
                                 const std::optional<std::filesystem::path>& labels);

// Writes the graph plus node_map.tsv (and classes.txt when labeled).
void save_converted(const ConvertedGraph& cg, const std::filesystem::path& dir);

}  // namespace selfpro

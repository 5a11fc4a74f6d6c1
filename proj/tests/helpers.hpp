#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "selfpro/graph.hpp"
#include "selfpro/rng.hpp"

namespace testutil {

using selfpro::EdgePair;
using selfpro::Graph;
using selfpro::Matrix;

// Erdos-Renyi graph with Gaussian features.
inline Graph random_graph(int n, double p, int dim, std::uint64_t seed, int n_classes = 0) {
  selfpro::Rng rng(seed);
  std::bernoulli_distribution edge(p);
  std::vector<EdgePair> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (edge(rng)) edges.push_back({i, j});
    }
  }
  std::normal_distribution<double> nd;
  Matrix x(n, dim);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) x(i, j) = nd(rng);
  }
  if (n_classes == 0) return Graph(edges, x);
  std::vector<int> y(n);
  for (int i = 0; i < n; ++i) y[i] = i % n_classes;
  return Graph(edges, x, y, n_classes);
}

// Random graph in which every node has at least one neighbor.
inline Graph connected_graph(int n, double p, int dim, std::uint64_t seed, int n_classes = 0) {
  Graph g = random_graph(n, p, dim, seed, n_classes);
  std::vector<EdgePair> edges = g.edges();
  for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1});
  if (g.labeled()) return Graph(edges, g.features(), g.labels(), g.n_classes());
  return Graph(edges, g.features());
}

inline Matrix constant_features(int n, int dim, double value = 1.0) { return Matrix::Constant(n, dim, value); }

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("selfpro-test-" + tag + "-" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

inline void quiet() { spdlog::set_level(spdlog::level::warn); }

}  // namespace testutil

#include "selfpro/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include <fmt/format.h>

#include "selfpro/error.hpp"

namespace selfpro {

double accuracy(std::span<const int> predictions, std::span<const int> labels, std::span<const NodeId> ids) {
  if (ids.empty()) throw Error(ErrorKind::metric, "accuracy over an empty id list");
  if (predictions.size() != ids.size()) {
    throw Error(ErrorKind::metric, fmt::format("{} predictions for {} ids", predictions.size(), ids.size()));
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) hits += predictions[i] == labels[ids[i]];
  return static_cast<double>(hits) / static_cast<double>(ids.size());
}

double accuracy(std::span<const int> predictions, std::span<const int> truth) {
  if (truth.empty()) throw Error(ErrorKind::metric, "accuracy over an empty id list");
  if (predictions.size() != truth.size()) {
    throw Error(ErrorKind::metric, fmt::format("{} predictions for {} labels", predictions.size(), truth.size()));
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predictions[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorKind::metric, "scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Rank-sum with midranks for ties.
  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]]) {
        pos_rank_sum += midrank;
        ++n_pos;
      }
    }
    i = j + 1;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error(ErrorKind::metric, "AUC needs both positive and negative items");
  const double np = static_cast<double>(n_pos);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double average_precision(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorKind::metric, "scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (labels[order[rank]]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  if (hits == 0) throw Error(ErrorKind::metric, "average precision needs at least one positive");
  return sum / static_cast<double>(hits);
}

}  // namespace selfpro

#pragma once

#include <span>

#include "selfpro/graph.hpp"

namespace selfpro {

// Fraction of ids whose prediction matches the label. predictions[i]
// belongs to ids[i].
double accuracy(std::span<const int> predictions, std::span<const int> labels, std::span<const NodeId> ids);
double accuracy(std::span<const int> predictions, std::span<const int> truth);

// Mann-Whitney AUC: P(random positive outranks random negative), ties count 1/2.
double auc(std::span<const double> scores, std::span<const int> labels);

// Mean over positives of precision at that positive's rank. Scores are sorted
// descending with ties kept in input order.
double average_precision(std::span<const double> scores, std::span<const int> labels);

}  // namespace selfpro

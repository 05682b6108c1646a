#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ebr {

struct ScoredLabel {
  double score = 0.0;
  bool relevant = false;
};

using LabeledScores = std::vector<ScoredLabel>;

// Fraction relevant among the k highest scores; equal scores keep input order.
// k is capped at the list length. Throws EmptyInput, InvalidArgument (k = 0).
double precision_at_k(std::span<const ScoredLabel> scores, std::size_t k);

// Mann-Whitney AUC by rank summation with averaged tie ranks.
// Throws DegenerateLabels without both classes.
double roc_auc(std::span<const ScoredLabel> scores);

// Average precision: sum over descending unique thresholds of
// (R_i - R_{i-1}) * P_i. Throws DegenerateLabels without a positive.
double pr_auc(std::span<const ScoredLabel> scores);

struct F1Result {
  double f1 = 0.0;
  double threshold = 0.0;  // predict relevant iff score >= threshold
};

// Best F1 over thresholds at the unique scores; ties go to the lowest
// threshold. Throws DegenerateLabels without a positive.
F1Result best_f1(std::span<const ScoredLabel> scores);

}  // namespace ebr

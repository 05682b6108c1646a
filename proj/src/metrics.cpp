#include "ebr/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "ebr/errors.hpp"

namespace ebr {

namespace {

std::vector<std::size_t> descending_order(std::span<const ScoredLabel> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a].score > scores[b].score; });
  return order;
}

std::size_t count_relevant(std::span<const ScoredLabel> scores) {
  return static_cast<std::size_t>(
      std::count_if(scores.begin(), scores.end(), [](const ScoredLabel& s) { return s.relevant; }));
}

// Calls f(tp, fp) after each block of equal scores, walking from the top.
template <class F>
void sweep_thresholds(std::span<const ScoredLabel> scores, F&& f) {
  const auto order = descending_order(scores);
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]].score;
    for (; i < order.size() && scores[order[i]].score == s; ++i) {
      (scores[order[i]].relevant ? tp : fp) += 1;
    }
    f(s, tp, fp);
  }
}

}  // namespace

double precision_at_k(std::span<const ScoredLabel> scores, std::size_t k) {
  if (scores.empty()) throw Error(Errc::EmptyInput, "precision_at_k on empty input");
  if (k == 0) throw Error(Errc::InvalidArgument, "k must be >= 1");
  const auto order = descending_order(scores);
  const std::size_t top = std::min(k, scores.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < top; ++i) hits += scores[order[i]].relevant;
  return static_cast<double>(hits) / static_cast<double>(top);
}

double roc_auc(std::span<const ScoredLabel> scores) {
  const std::size_t n_pos = count_relevant(scores);
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error(Errc::DegenerateLabels, "roc_auc needs both classes");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a].score < scores[b].score; });
  // Ranks are 1-based; a tie block [i, j) shares the mean rank (i + 1 + j) / 2.
  double pos_rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::size_t block_pos = 0;
    while (j < order.size() && scores[order[j]].score == scores[order[i]].score) {
      block_pos += scores[order[j]].relevant;
      ++j;
    }
    pos_rank_sum += static_cast<double>(block_pos) * (static_cast<double>(i + 1 + j) / 2.0);
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double pr_auc(std::span<const ScoredLabel> scores) {
  const std::size_t n_pos = count_relevant(scores);
  if (n_pos == 0) throw Error(Errc::DegenerateLabels, "pr_auc needs a positive");
  double ap = 0.0;
  std::size_t prev_tp = 0;
  sweep_thresholds(scores, [&](double, std::size_t tp, std::size_t fp) {
    if (tp != prev_tp) {
      const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
      ap += static_cast<double>(tp - prev_tp) / static_cast<double>(n_pos) * precision;
      prev_tp = tp;
    }
  });
  return ap;
}

F1Result best_f1(std::span<const ScoredLabel> scores) {
  const std::size_t n_pos = count_relevant(scores);
  if (n_pos == 0) throw Error(Errc::DegenerateLabels, "best_f1 needs a positive");
  F1Result best{-1.0, 0.0};
  // Thresholds arrive in descending order, so >= lets lower thresholds win ties.
  sweep_thresholds(scores, [&](double s, std::size_t tp, std::size_t fp) {
    const double f1 = 2.0 * static_cast<double>(tp) / static_cast<double>(tp + fp + n_pos);
    if (f1 >= best.f1) best = {f1, s};
  });
  return best;
}

}  // namespace ebr

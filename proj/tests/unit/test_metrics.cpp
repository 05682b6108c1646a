#include <doctest.h>

#include <cmath>
#include <random>

#include "ebr/errors.hpp"
#include "ebr/metrics.hpp"
#include "oracles.hpp"

using namespace ebr;

namespace {

// Scores on a coarse grid so ties are common.
LabeledScores random_scores(std::size_t n, std::mt19937_64& rng, int grid) {
  std::uniform_int_distribution<int> s(0, grid);
  std::bernoulli_distribution rel(0.3);
  LabeledScores out(n);
  for (auto& x : out) {
    x.score = static_cast<double>(s(rng)) / grid;
    x.relevant = rel(rng);
  }
  return out;
}

std::vector<oracle::ScorePair> pairs(const LabeledScores& s) {
  std::vector<oracle::ScorePair> out;
  for (const auto& x : s) out.push_back({x.score, x.relevant});
  return out;
}

bool both_classes(const LabeledScores& s) {
  bool pos = false, neg = false;
  for (const auto& x : s) (x.relevant ? pos : neg) = true;
  return pos && neg;
}

}  // namespace

TEST_CASE("metrics match counting references on tied and untied scores") {
  std::mt19937_64 rng(17);
  int checked = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const int grid = trial % 2 == 0 ? 5 : 1000000;
    const auto s = random_scores(5 + trial % 60, rng, grid);
    if (!both_classes(s)) continue;
    const auto p = pairs(s);
    CHECK(roc_auc(s) == doctest::Approx(oracle::pairwise_auc(p)).epsilon(1e-12));
    CHECK(pr_auc(s) == doctest::Approx(oracle::threshold_ap(p)).epsilon(1e-12));
    const auto f1 = best_f1(s);
    const auto [ref_f1, ref_t] = oracle::brute_best_f1(p);
    CHECK(f1.f1 == doctest::Approx(ref_f1).epsilon(1e-12));
    CHECK(f1.threshold == ref_t);
    ++checked;
  }
  CHECK(checked > 300);
}

TEST_CASE("metrics are invariant under strictly increasing transforms") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    auto s = random_scores(80, rng, trial % 2 ? 7 : 100000);
    if (!both_classes(s)) continue;
    auto t = s;
    for (auto& x : t) x.score = std::exp(3.0 * x.score) - 2.0;
    CHECK(roc_auc(s) == roc_auc(t));
    CHECK(pr_auc(s) == pr_auc(t));
    CHECK(best_f1(s).f1 == best_f1(t).f1);
    CHECK(precision_at_k(s, 20) == precision_at_k(t, 20));
  }
}

TEST_CASE("precision_at_k") {
  const LabeledScores s{{0.9, true}, {0.8, false}, {0.8, true}, {0.1, true}};
  CHECK(precision_at_k(s, 1) == 1.0);
  CHECK(precision_at_k(s, 2) == 0.5);  // tie at 0.8 keeps input order
  CHECK(precision_at_k(s, 3) == doctest::Approx(2.0 / 3.0));
  CHECK(precision_at_k(s, 100) == 0.75);
  CHECK_THROWS_AS(precision_at_k(s, 0), Error);
  CHECK_THROWS_AS(precision_at_k(LabeledScores{}, 5), Error);
}

TEST_CASE("perfect, reversed and constant rankings") {
  const LabeledScores perfect{{0.9, true}, {0.8, true}, {0.2, false}, {0.1, false}};
  CHECK(roc_auc(perfect) == 1.0);
  CHECK(pr_auc(perfect) == 1.0);
  CHECK(best_f1(perfect).f1 == 1.0);
  CHECK(best_f1(perfect).threshold == 0.8);

  const LabeledScores reversed{{0.1, true}, {0.2, true}, {0.8, false}, {0.9, false}};
  CHECK(roc_auc(reversed) == 0.0);

  const LabeledScores flat{{0.5, true}, {0.5, false}, {0.5, false}, {0.5, true}};
  CHECK(roc_auc(flat) == 0.5);
  CHECK(pr_auc(flat) == 0.5);
  CHECK(best_f1(flat).f1 == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("best_f1 prefers the lowest threshold among equal F1") {
  // Threshold 0.9: tp 1 fp 0 -> 2/3. Threshold 0.5: tp 2 fp 2 -> 2/3.
  const LabeledScores s{{0.9, true}, {0.5, true}, {0.5, false}, {0.5, false}};
  const auto r = best_f1(s);
  CHECK(r.f1 == doctest::Approx(2.0 / 3.0));
  CHECK(r.threshold == 0.5);
}

TEST_CASE("degenerate label sets are rejected") {
  const LabeledScores all_pos{{0.1, true}, {0.2, true}};
  const LabeledScores all_neg{{0.1, false}, {0.2, false}};
  CHECK_THROWS_AS(roc_auc(all_pos), Error);
  CHECK_THROWS_AS(roc_auc(all_neg), Error);
  CHECK_THROWS_AS(pr_auc(all_neg), Error);
  CHECK_THROWS_AS(best_f1(all_neg), Error);
  CHECK(pr_auc(all_pos) == 1.0);
}

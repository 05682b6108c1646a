#pragma once

// Test-only reference implementations. Each one is written independently of the
// library code path it checks: plain loops, no shared kernels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ebr/linalg.hpp"
#include "ebr/vector_core.hpp"

namespace oracle {

inline double naive_dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

inline std::vector<float> gaussian_floats(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<float> v(dim);
  for (auto& x : v) x = static_cast<float>(g(rng));
  return v;
}

inline ebr::EmbeddingVector random_unit(std::size_t dim, std::mt19937_64& rng) {
  return ebr::normalize(std::span<const float>(gaussian_floats(dim, rng)));
}

// Unit vectors drawn around n_clusters random centers with per-component spread.
inline std::vector<ebr::EmbeddingVector> clustered_units(std::size_t n, std::size_t dim,
                                                         std::size_t n_clusters, double spread,
                                                         std::mt19937_64& rng) {
  std::vector<std::vector<float>> centers;
  for (std::size_t c = 0; c < n_clusters; ++c) {
    auto u = random_unit(dim, rng);
    centers.emplace_back(u.values().begin(), u.values().end());
  }
  std::normal_distribution<double> g(0.0, spread);
  std::uniform_int_distribution<std::size_t> pick(0, n_clusters - 1);
  std::vector<ebr::EmbeddingVector> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = centers[pick(rng)];
    std::vector<float> v(dim);
    for (std::size_t d = 0; d < dim; ++d) v[d] = static_cast<float>(c[d] + g(rng));
    out.push_back(ebr::normalize(std::span<const float>(v)));
  }
  return out;
}

// Score every item, sort everything, keep k.
inline std::vector<std::pair<std::string, double>> full_scan_top_k(
    const ebr::EmbeddingVector& q, const ebr::VectorStore& store, std::size_t k) {
  std::vector<std::pair<std::string, double>> all;
  for (std::size_t r = 0; r < store.size(); ++r) {
    double s = naive_dot(q.values(), store.row(r));
    s = std::clamp(s, -1.0, 1.0);
    all.emplace_back(store.id_at(r), s);
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

// Direct transcription of the supervised contrastive objective: plain exp/log,
// no max subtraction, triple loop.
inline double naive_scl_loss(const ebr::Mat& z, const std::vector<std::int64_t>& labels, double tau) {
  const std::size_t n = z.rows;
  const auto zdot = [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t d = 0; d < z.cols; ++d) s += z(i, d) * z(j, d);
    return s;
  };
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double denom = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      if (a != i) denom += std::exp(zdot(i, a) / tau);
    }
    double inner = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t p = 0; p < n; ++p) {
      if (p == i || labels[p] != labels[i]) continue;
      inner += std::log(std::exp(zdot(i, p) / tau) / denom);
      ++n_pos;
    }
    total += -inner / static_cast<double>(n_pos);
  }
  return total;
}

// Central differences of f over every entry of x; x is restored afterwards.
inline std::vector<double> central_differences(std::vector<double>& x,
                                               const std::function<double()>& f, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f();
    x[i] = saved - h;
    const double down = f();
    x[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// |a - n| / max(|a|, |n|, floor): relative error with a floor for entries that
// are zero up to finite-difference noise.
inline double max_relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric,
                                 double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

inline ebr::Mat random_unit_rows(std::size_t rows, std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  ebr::Mat z(rows, dim);
  for (std::size_t r = 0; r < rows; ++r) {
    double sq = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      z(r, d) = g(rng);
      sq += z(r, d) * z(r, d);
    }
    for (std::size_t d = 0; d < dim; ++d) z(r, d) /= std::sqrt(sq);
  }
  return z;
}

// O(n^2) DBSCAN reference: core points from a full distance table, clusters as
// union-find components of core points, borders given to the component with the
// smallest core id among their core neighbours. Returns clusters as id sets.
struct DbscanReference {
  std::set<std::set<std::string>> clusters;
  std::set<std::string> noise;
};

inline DbscanReference naive_dbscan(const ebr::VectorStore& store, double eps, std::size_t min_pts) {
  const std::size_t n = store.size();
  std::vector<std::vector<bool>> near(n, std::vector<bool>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double c = std::clamp(naive_dot(store.row(i), store.row(j)), -1.0, 1.0);
      near[i][j] = 1.0 - c <= eps;
    }
  }
  std::vector<bool> core(n);
  for (std::size_t i = 0; i < n; ++i) {
    core[i] = static_cast<std::size_t>(std::count(near[i].begin(), near[i].end(), true)) >= min_pts;
  }
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  const std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    return parent[x] == x ? x : parent[x] = find(parent[x]);
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (core[i] && core[j] && near[i][j]) parent[find(i)] = find(j);
    }
  }
  // Component key: smallest core id in it.
  std::map<std::size_t, std::string> key;
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i]) continue;
    auto [it, fresh] = key.emplace(find(i), store.id_at(i));
    if (!fresh && store.id_at(i) < it->second) it->second = store.id_at(i);
  }
  std::map<std::string, std::set<std::string>> members;
  DbscanReference out;
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) {
      members[key[find(i)]].insert(store.id_at(i));
      continue;
    }
    std::string best;
    for (std::size_t j = 0; j < n; ++j) {
      if (core[j] && near[i][j] && (best.empty() || key[find(j)] < best)) best = key[find(j)];
    }
    if (best.empty()) {
      out.noise.insert(store.id_at(i));
    } else {
      members[best].insert(store.id_at(i));
    }
  }
  for (auto& [k, m] : members) out.clusters.insert(m);
  return out;
}

// Metric references by direct counting over all thresholds / pairs.
struct ScorePair {
  double score;
  bool relevant;
};

inline double pairwise_auc(const std::vector<ScorePair>& xs) {
  double wins = 0.0, pairs = 0.0;
  for (const auto& p : xs) {
    if (!p.relevant) continue;
    for (const auto& n : xs) {
      if (n.relevant) continue;
      pairs += 1.0;
      if (p.score > n.score) wins += 1.0;
      else if (p.score == n.score) wins += 0.5;
    }
  }
  return wins / pairs;
}

inline std::vector<double> unique_desc(const std::vector<ScorePair>& xs) {
  std::set<double, std::greater<>> u;
  for (const auto& x : xs) u.insert(x.score);
  return {u.begin(), u.end()};
}

inline std::pair<double, double> counts_at(const std::vector<ScorePair>& xs, double t) {
  double tp = 0, fp = 0;
  for (const auto& x : xs) {
    if (x.score >= t) (x.relevant ? tp : fp) += 1;
  }
  return {tp, fp};
}

inline double threshold_ap(const std::vector<ScorePair>& xs) {
  double n_pos = 0;
  for (const auto& x : xs) n_pos += x.relevant;
  double ap = 0.0, prev_recall = 0.0;
  for (const double t : unique_desc(xs)) {
    const auto [tp, fp] = counts_at(xs, t);
    const double recall = tp / n_pos;
    if (tp > 0) ap += (recall - prev_recall) * tp / (tp + fp);
    prev_recall = recall;
  }
  return ap;
}

inline std::pair<double, double> brute_best_f1(const std::vector<ScorePair>& xs) {
  double n_pos = 0;
  for (const auto& x : xs) n_pos += x.relevant;
  double best = -1.0, best_t = 0.0;
  for (const double t : unique_desc(xs)) {
    const auto [tp, fp] = counts_at(xs, t);
    const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double recall = tp / n_pos;
    const double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    if (f1 > best + 1e-15 || (std::abs(f1 - best) <= 1e-15 && t < best_t)) {
      best = f1;
      best_t = t;
    }
  }
  return {best, best_t};
}

}  // namespace oracle

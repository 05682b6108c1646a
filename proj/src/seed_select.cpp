#include "ebr/seed_select.hpp"

#include <algorithm>
#include <deque>
#include <numeric>

#include "ebr/errors.hpp"
#include "ebr/kernels.hpp"

namespace ebr {

std::vector<std::size_t> ClusterAssignment::members(int cluster_id) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == cluster_id) out.push_back(i);
  }
  return out;
}

namespace {

constexpr int kUnvisited = -2;

// Rows within eps of row r, r included.
std::vector<std::size_t> neighbors(const VectorStore& store, std::size_t r, double eps,
                                   std::vector<double>& scratch) {
  kernels::active::dot_rows(store.row(r), store.data(), store.dim(), scratch);
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < scratch.size(); ++j) {
    if (1.0 - kernels::clamp_unit(scratch[j]) <= eps) out.push_back(j);
  }
  return out;
}

}  // namespace

ClusterAssignment dbscan(const VectorStore& store, double eps, std::size_t min_pts) {
  if (store.empty()) throw Error(Errc::EmptyStore, "dbscan on empty store");
  if (!(eps > 0.0 && eps <= 2.0)) throw Error(Errc::InvalidArgument, "eps must be in (0, 2]");
  if (min_pts == 0) throw Error(Errc::InvalidArgument, "min_pts must be >= 1");

  const std::size_t n = store.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return store.id_at(a) < store.id_at(b); });
  // Neighbor lists are visited in id order too, so expansion is a pure function
  // of the id set.
  std::vector<std::size_t> rank(n);
  for (std::size_t i = 0; i < n; ++i) rank[order[i]] = i;

  ClusterAssignment out;
  out.eps = eps;
  out.min_pts = min_pts;
  out.labels.assign(n, kUnvisited);
  std::vector<double> scratch(n);
  const auto sorted_neighbors = [&](std::size_t r) {
    auto nb = neighbors(store, r, eps, scratch);
    std::sort(nb.begin(), nb.end(), [&](std::size_t a, std::size_t b) { return rank[a] < rank[b]; });
    return nb;
  };

  int next_cluster = 0;
  for (const std::size_t p : order) {
    if (out.labels[p] != kUnvisited) continue;
    const auto nb = sorted_neighbors(p);
    if (nb.size() < min_pts) {
      out.labels[p] = kNoise;
      continue;
    }
    const int c = next_cluster++;
    out.labels[p] = c;
    std::deque<std::size_t> queue(nb.begin(), nb.end());
    while (!queue.empty()) {
      const std::size_t q = queue.front();
      queue.pop_front();
      if (out.labels[q] == kNoise) out.labels[q] = c;  // border point
      if (out.labels[q] != kUnvisited) continue;
      out.labels[q] = c;
      const auto qn = sorted_neighbors(q);
      if (qn.size() >= min_pts) queue.insert(queue.end(), qn.begin(), qn.end());
    }
  }
  out.n_clusters = static_cast<std::size_t>(next_cluster);
  return out;
}

std::vector<std::string> centroid_proximity_seeds(const VectorStore& store, const ClusterAssignment& assignment,
                                                  int cluster_id, std::size_t m) {
  if (m == 0) throw Error(Errc::InvalidArgument, "m must be >= 1");
  if (assignment.labels.size() != store.size()) {
    throw Error(Errc::InvalidArgument, "assignment does not match store");
  }
  if (cluster_id < 0 || static_cast<std::size_t>(cluster_id) >= assignment.n_clusters) {
    throw Error(Errc::UnknownCluster, "cluster " + std::to_string(cluster_id));
  }
  const auto rows = assignment.members(cluster_id);
  if (rows.empty()) throw Error(Errc::UnknownCluster, "cluster " + std::to_string(cluster_id) + " is empty");

  std::vector<double> mean(store.dim(), 0.0);
  for (const std::size_t r : rows) {
    const auto v = store.row(r);
    for (std::size_t d = 0; d < store.dim(); ++d) mean[d] += v[d];
  }
  const auto centroid = normalize(std::span<const double>(mean));

  std::vector<RetrievalHit> hits;
  hits.reserve(rows.size());
  for (const std::size_t r : rows) {
    hits.push_back({store.id_at(r), kernels::clamp_unit(kernels::dot(centroid.values().data(), store.row(r).data(),
                                                                     store.dim())),
                    0});
  }
  std::vector<std::string> out;
  for (auto& h : rank_hits(std::move(hits), m)) out.push_back(std::move(h.item_id));
  return out;
}

double historical_precision(const SeedStats& stats) {
  if (stats.n == 0) throw Error(Errc::EmptyWindow, "seed " + stats.seed_id + " has no retrievals in window");
  if (stats.r > stats.n) throw Error(Errc::InvalidArgument, "r > n for seed " + stats.seed_id);
  return static_cast<double>(stats.r) / static_cast<double>(stats.n);
}

std::vector<std::string> select_historical_seeds(const std::vector<SeedStats>& candidates,
                                                 double precision_threshold, std::uint64_t min_n) {
  std::vector<std::pair<double, std::string>> accepted;
  for (const auto& c : candidates) {
    if (c.n == 0 || c.n < min_n) continue;
    const double p = historical_precision(c);
    if (p > precision_threshold) accepted.emplace_back(p, c.seed_id);
  }
  std::sort(accepted.begin(), accepted.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::string> out;
  for (auto& a : accepted) out.push_back(std::move(a.second));
  return out;
}

SeedRecord register_manual_seed(TrendMap& trends, const VectorStore& store, const std::string& trend_id,
                                const std::string& item_id, const std::string& annotator,
                                std::int64_t added_at) {
  const auto it = trends.find(trend_id);
  if (it == trends.end()) throw Error(Errc::UnknownTrend, trend_id);
  if (!store.contains(item_id)) throw Error(Errc::UnknownItem, item_id);
  Trend& trend = it->second;
  for (const auto& s : trend.seeds) {
    if (s.item_id == item_id) return s;
  }
  SeedRecord seed{item_id, SeedProvenance::Manual, annotator, added_at};
  trend.add_seed(seed);
  return seed;
}

}  // namespace ebr

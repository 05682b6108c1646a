#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ebr/trend.hpp"
#include "ebr/vector_core.hpp"

namespace ebr {

inline constexpr int kNoise = -1;

struct ClusterAssignment {
  std::vector<int> labels;  // per store row: cluster id >= 0, or kNoise
  double eps = 0.0;
  std::size_t min_pts = 1;
  std::size_t n_clusters = 0;

  std::vector<std::size_t> members(int cluster_id) const;
};

// DBSCAN with distance 1 - cosine. A point is core iff at least min_pts points
// (itself included) lie within eps. Points are visited in ascending item_id
// order; a border point joins the first cluster whose expansion reaches it.
// Throws EmptyStore, InvalidArgument (eps outside (0, 2], min_pts = 0).
ClusterAssignment dbscan(const VectorStore& store, double eps, std::size_t min_pts);

// The m members closest to the cluster's normalized mean, ties by ascending id.
// Throws UnknownCluster, ZeroVector, InvalidArgument (m = 0).
std::vector<std::string> centroid_proximity_seeds(const VectorStore& store, const ClusterAssignment& assignment,
                                                  int cluster_id, std::size_t m);

struct SeedStats {
  std::string seed_id;
  std::int64_t window_start = 0;
  std::int64_t window_end = 0;
  std::uint64_t n = 0;  // labeled retrievals in the window
  std::uint64_t r = 0;  // of which true positives

  bool operator==(const SeedStats&) const = default;
};

// p = r / n. Throws EmptyWindow when n = 0.
double historical_precision(const SeedStats& stats);

inline constexpr std::uint64_t kDefaultMinN = 20;

// Accepts seeds with n >= min_n and p > precision_threshold; sorted by p
// descending, then id.
std::vector<std::string> select_historical_seeds(const std::vector<SeedStats>& candidates,
                                                 double precision_threshold,
                                                 std::uint64_t min_n = kDefaultMinN);

// Attaches item_id to the trend as a manual seed. Idempotent per (trend, item):
// an existing seed is returned unchanged. Throws UnknownTrend, UnknownItem.
SeedRecord register_manual_seed(TrendMap& trends, const VectorStore& store, const std::string& trend_id,
                                const std::string& item_id, const std::string& annotator,
                                std::int64_t added_at = 0);

}  // namespace ebr

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ebr/vector_core.hpp"

namespace ebr {

struct IvfBuildOptions {
  std::size_t max_iterations = 25;
  std::uint64_t seed = 0;  // picks the first farthest-point centroid
};

struct IvfPartition {
  EmbeddingVector centroid;
  std::vector<std::string> ids;
  std::vector<float> vectors;  // row-major, ids.size() x dim
};

// Inverted-file index: spherical k-means partitions, each holding a copy of its
// members' vectors. Immutable once built.
class IvfIndex {
 public:
  IvfIndex(std::size_t dim, std::vector<IvfPartition> partitions, std::size_t iterations);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t n_partitions() const noexcept { return partitions_.size(); }
  std::size_t size() const noexcept { return size_; }
  std::size_t iterations() const noexcept { return iterations_; }
  const std::vector<IvfPartition>& partitions() const noexcept { return partitions_; }

  // max(1, n_partitions / 8)
  std::size_t default_n_probe() const noexcept;

 private:
  std::size_t dim_;
  std::vector<IvfPartition> partitions_;
  std::vector<float> centroid_rows_;
  std::size_t size_ = 0;
  std::size_t iterations_ = 0;

  friend std::vector<RetrievalHit> search_ivf(const IvfIndex&, const EmbeddingVector&, std::size_t,
                                              std::size_t);
};

// round(sqrt(store_size)), at least 1.
std::size_t default_n_partitions(std::size_t store_size);

// Lloyd iterations with re-normalized centroids and max-cosine assignment,
// stopping when assignments are stable or after max_iterations. Seeding is
// farthest-point from a seeded random start. Empty partitions are dropped.
// Throws EmptyStore, InvalidArgument when n_partitions is outside [1, size].
IvfIndex build_ivf(const VectorStore& store, std::size_t n_partitions,
                   const IvfBuildOptions& options = {});

// Exact top-k restricted to the n_probe partitions whose centroids are closest
// to the query (ties -> lower partition index). Throws InvalidArgument for
// n_probe outside [1, n_partitions] or k == 0, DimensionMismatch.
std::vector<RetrievalHit> search_ivf(const IvfIndex& index, const EmbeddingVector& query,
                                     std::size_t k, std::size_t n_probe);

}  // namespace ebr

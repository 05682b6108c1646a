#include "ebr/ivf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ebr/errors.hpp"
#include "ebr/kernels.hpp"

namespace ebr {

IvfIndex::IvfIndex(std::size_t dim, std::vector<IvfPartition> partitions, std::size_t iterations)
    : dim_(dim), partitions_(std::move(partitions)), iterations_(iterations) {
  centroid_rows_.reserve(partitions_.size() * dim_);
  for (const auto& p : partitions_) {
    centroid_rows_.insert(centroid_rows_.end(), p.centroid.values().begin(),
                          p.centroid.values().end());
    size_ += p.ids.size();
  }
}

std::size_t IvfIndex::default_n_probe() const noexcept {
  return std::max<std::size_t>(1, partitions_.size() / 8);
}

std::size_t default_n_partitions(std::size_t store_size) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(std::sqrt(
                                      static_cast<double>(store_size)))));
}

namespace {

// Farthest-point seeding: each next centroid is the row whose best similarity to
// the centroids chosen so far is smallest.
std::vector<std::size_t> farthest_point_seeds(const VectorStore& store, std::size_t k,
                                              std::uint64_t seed) {
  const std::size_t n = store.size();
  const std::size_t dim = store.dim();
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> chosen;
  chosen.reserve(k);
  chosen.push_back(static_cast<std::size_t>(rng() % n));

  std::vector<double> best(n);
  std::vector<double> sims(n);
  kernels::active::dot_rows(store.row(chosen[0]), store.data(), dim, best);
  std::vector<char> taken(n, 0);
  taken[chosen[0]] = 1;
  while (chosen.size() < k) {
    std::size_t next = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      if (next == n || best[i] < best[next]) next = i;
    }
    chosen.push_back(next);
    taken[next] = 1;
    kernels::active::dot_rows(store.row(next), store.data(), dim, sims);
    for (std::size_t i = 0; i < n; ++i) best[i] = std::max(best[i], sims[i]);
  }
  return chosen;
}

}  // namespace

IvfIndex build_ivf(const VectorStore& store, std::size_t n_partitions,
                   const IvfBuildOptions& options) {
  if (store.empty()) throw Error(Errc::EmptyStore, "cannot build IVF over an empty store");
  const std::size_t n = store.size();
  const std::size_t dim = store.dim();
  if (n_partitions < 1 || n_partitions > n) {
    throw Error(Errc::InvalidArgument, "n_partitions must be in [1, store size]");
  }

  std::vector<float> centroids;
  centroids.reserve(n_partitions * dim);
  for (const std::size_t r : farthest_point_seeds(store, n_partitions, options.seed)) {
    const auto row = store.row(r);
    centroids.insert(centroids.end(), row.begin(), row.end());
  }

  std::vector<std::uint32_t> assignment(n, 0);
  std::vector<std::uint32_t> previous;
  std::vector<double> best(n);
  std::vector<double> sums(n_partitions * dim);
  std::vector<std::size_t> counts(n_partitions);
  std::size_t iterations = 0;

  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    kernels::active::assign_nearest(store.data(), centroids, dim, assignment, best);
    ++iterations;
    if (assignment == previous) break;
    previous = assignment;

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t r = 0; r < n; ++r) {
      const auto row = store.row(r);
      double* acc = sums.data() + assignment[r] * dim;
      for (std::size_t d = 0; d < dim; ++d) acc[d] += row[d];
      ++counts[assignment[r]];
    }
    for (std::size_t c = 0; c < n_partitions; ++c) {
      if (counts[c] == 0) continue;  // keep the old centroid; dropped later if still empty
      const std::span<const double> mean(sums.data() + c * dim, dim);
      try {
        const auto unit = normalize(mean);
        std::copy(unit.values().begin(), unit.values().end(), centroids.begin() + c * dim);
      } catch (const Error&) {
        // antipodal members cancel; keep the previous centroid
      }
    }
  }

  std::vector<IvfPartition> parts(n_partitions);
  for (std::size_t r = 0; r < n; ++r) {
    auto& p = parts[assignment[r]];
    p.ids.push_back(store.id_at(r));
    const auto row = store.row(r);
    p.vectors.insert(p.vectors.end(), row.begin(), row.end());
  }
  std::vector<IvfPartition> kept;
  kept.reserve(n_partitions);
  for (std::size_t c = 0; c < n_partitions; ++c) {
    if (parts[c].ids.empty()) continue;
    parts[c].centroid = EmbeddingVector::from_unit(
        {centroids.begin() + c * dim, centroids.begin() + (c + 1) * dim}, 1e-4);
    kept.push_back(std::move(parts[c]));
  }
  return IvfIndex(dim, std::move(kept), iterations);
}

std::vector<RetrievalHit> search_ivf(const IvfIndex& index, const EmbeddingVector& query,
                                     std::size_t k, std::size_t n_probe) {
  if (k == 0) throw Error(Errc::InvalidArgument, "k must be >= 1");
  if (n_probe < 1 || n_probe > index.n_partitions()) {
    throw Error(Errc::InvalidArgument, "n_probe must be in [1, n_partitions]");
  }
  if (query.dim() != index.dim()) throw Error(Errc::DimensionMismatch, "query dim != index dim");
  const std::size_t dim = index.dim();
  const std::size_t n_parts = index.n_partitions();

  std::vector<double> csims(n_parts);
  kernels::active::dot_rows(query.values(), index.centroid_rows_, dim, csims);
  std::vector<std::size_t> order(n_parts);
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_probe), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return csims[a] != csims[b] ? csims[a] > csims[b] : a < b;
                    });

  std::vector<RetrievalHit> candidates;
  std::vector<double> sims;
  for (std::size_t i = 0; i < n_probe; ++i) {
    const auto& part = index.partitions_[order[i]];
    sims.resize(part.ids.size());
    kernels::active::dot_rows(query.values(), part.vectors, dim, sims);
    for (std::size_t j = 0; j < part.ids.size(); ++j) {
      candidates.push_back({part.ids[j], sims[j], 0});
    }
  }
  return rank_hits(std::move(candidates), k);
}

}  // namespace ebr

#include "ebr/vector_core.hpp"

#include <algorithm>
#include <cmath>

#include "ebr/errors.hpp"
#include "ebr/ivf.hpp"
#include "ebr/kernels.hpp"

namespace ebr {

namespace {

template <typename T>
void normalize_impl(std::span<const T> v, std::vector<float>& out) {
  double sq = 0.0;
  for (const T x : v) {
    if (!std::isfinite(static_cast<double>(x))) {
      throw Error(Errc::InvalidArgument, "non-finite component");
    }
    sq += static_cast<double>(x) * static_cast<double>(x);
  }
  const double norm = std::sqrt(sq);
  if (norm <= kMinNorm) throw Error(Errc::ZeroVector, "norm <= 1e-12");
  out.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = static_cast<float>(static_cast<double>(v[i]) / norm);
  }
}

}  // namespace

EmbeddingVector normalize(std::span<const float> v) {
  std::vector<float> out;
  normalize_impl(v, out);
  return EmbeddingVector(std::move(out));
}

EmbeddingVector normalize(std::span<const double> v) {
  std::vector<float> out;
  normalize_impl(v, out);
  return EmbeddingVector(std::move(out));
}

EmbeddingVector EmbeddingVector::from_unit(std::vector<float> values, double tol) {
  double sq = 0.0;
  for (const float x : values) {
    if (!std::isfinite(x)) throw Error(Errc::CorruptFile, "non-finite component");
    sq += static_cast<double>(x) * x;
  }
  if (std::abs(std::sqrt(sq) - 1.0) > tol) {
    throw Error(Errc::CorruptFile, "vector is not unit-norm");
  }
  EmbeddingVector out;
  out.values_ = std::move(values);
  return out;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) throw Error(Errc::DimensionMismatch, "cosine operands differ in dim");
  return kernels::clamp_unit(kernels::dot(a.values().data(), b.values().data(), a.dim()));
}

SimilarityMatrix similarity_matrix(std::span<const EmbeddingVector> batch) {
  if (batch.empty()) throw Error(Errc::EmptyInput, "similarity_matrix of empty batch");
  const std::size_t dim = batch.front().dim();
  std::vector<float> rows;
  rows.reserve(batch.size() * dim);
  for (const auto& v : batch) {
    if (v.dim() != dim) throw Error(Errc::DimensionMismatch, "batch has mixed dimensions");
    rows.insert(rows.end(), v.values().begin(), v.values().end());
  }
  SimilarityMatrix m;
  m.n = batch.size();
  m.values.resize(m.n * m.n);
  kernels::active::gram(rows, dim, m.values);
  return m;
}

VectorStore::VectorStore(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw Error(Errc::InvalidArgument, "dimension must be positive");
}

void VectorStore::insert(const std::string& id, const EmbeddingVector& v, OnDuplicate policy) {
  if (v.dim() != dim_) throw Error(Errc::DimensionMismatch, "vector dim differs from store dim");
  if (auto it = index_.find(id); it != index_.end()) {
    if (policy == OnDuplicate::Reject) throw Error(Errc::DuplicateId, id);
    std::copy(v.values().begin(), v.values().end(), data_.begin() + it->second * dim_);
    return;
  }
  index_.emplace(id, ids_.size());
  ids_.push_back(id);
  data_.insert(data_.end(), v.values().begin(), v.values().end());
}

std::optional<std::size_t> VectorStore::find(const std::string& id) const {
  if (auto it = index_.find(id); it != index_.end()) return it->second;
  return std::nullopt;
}

EmbeddingVector VectorStore::vector(const std::string& id) const {
  const auto r = find(id);
  if (!r) throw Error(Errc::UnknownItem, id);
  const auto span = row(*r);
  return EmbeddingVector::from_unit({span.begin(), span.end()}, 1e-4);
}

bool hit_before(double sim_a, const std::string& id_a, double sim_b, const std::string& id_b) {
  if (sim_a != sim_b) return sim_a > sim_b;
  return id_a < id_b;
}

std::vector<RetrievalHit> rank_hits(std::vector<RetrievalHit> candidates, std::size_t k) {
  const auto cmp = [](const RetrievalHit& a, const RetrievalHit& b) {
    return hit_before(a.similarity, a.item_id, b.similarity, b.item_id);
  };
  if (k < candidates.size()) {
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                      candidates.end(), cmp);
    candidates.resize(k);
  } else {
    std::sort(candidates.begin(), candidates.end(), cmp);
  }
  for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i].rank = i + 1;
  return candidates;
}

std::vector<RetrievalHit> top_k_exact(const EmbeddingVector& query, const VectorStore& store,
                                      std::size_t k) {
  if (k == 0) throw Error(Errc::InvalidArgument, "k must be >= 1");
  if (store.empty()) return {};
  if (query.dim() != store.dim()) throw Error(Errc::DimensionMismatch, "query dim != store dim");
  std::vector<double> sims(store.size());
  kernels::active::dot_rows(query.values(), store.data(), store.dim(), sims);

  // Select on row indices first so only k strings are copied.
  std::vector<std::size_t> order(store.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto cmp = [&](std::size_t a, std::size_t b) {
    return hit_before(sims[a], store.id_at(a), sims[b], store.id_at(b));
  };
  const std::size_t take = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    cmp);
  std::vector<RetrievalHit> hits;
  hits.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    hits.push_back({store.id_at(order[i]), sims[order[i]], i + 1});
  }
  return hits;
}

SnapshotStore::SnapshotStore(std::size_t dim)
    : snap_(std::make_shared<const IndexedStore>(
          IndexedStore{std::make_shared<const VectorStore>(dim), nullptr})) {}

void SnapshotStore::insert(const std::string& id, const EmbeddingVector& v, OnDuplicate policy) {
  std::lock_guard lock(writer_);
  auto current = snap_.load();
  auto next_store = std::make_shared<VectorStore>(*current->store);
  next_store->insert(id, v, policy);
  snap_.publish(std::make_shared<const IndexedStore>(IndexedStore{std::move(next_store), nullptr}));
}

void SnapshotStore::rebuild_ivf(std::size_t n_partitions, std::uint64_t seed) {
  std::lock_guard lock(writer_);
  auto current = snap_.load();
  IvfBuildOptions opts;
  opts.seed = seed;
  auto index = std::make_shared<const IvfIndex>(build_ivf(*current->store, n_partitions, opts));
  snap_.publish(std::make_shared<const IndexedStore>(IndexedStore{current->store, std::move(index)}));
}

}  // namespace ebr

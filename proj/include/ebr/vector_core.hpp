#pragma once

#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace ebr {

inline constexpr std::size_t kDefaultDim = 64;
inline constexpr double kMinNorm = 1e-12;

// Unit-norm float vector. Only constructible through normalize(), so every
// instance satisfies |v| = 1 within float rounding and has finite components.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const float> values() const noexcept { return values_; }
  float operator[](std::size_t i) const noexcept { return values_[i]; }

  bool operator==(const EmbeddingVector&) const = default;

  // Wraps components already known to be unit-norm (e.g. read from a validated
  // vector file). Throws CorruptFile if the norm deviates by more than tol.
  static EmbeddingVector from_unit(std::vector<float> values, double tol = 1e-5);

 private:
  explicit EmbeddingVector(std::vector<float> values) : values_(std::move(values)) {}

  friend EmbeddingVector normalize(std::span<const float> v);
  friend EmbeddingVector normalize(std::span<const double> v);

  std::vector<float> values_;
};

// Throws ZeroVector if the L2 norm is <= 1e-12, InvalidArgument on non-finite input.
EmbeddingVector normalize(std::span<const float> v);
EmbeddingVector normalize(std::span<const double> v);

// Dot product accumulated in 64-bit and clamped to [-1, 1]. Throws DimensionMismatch.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

// Row-major n x n matrix of pairwise cosines.
struct SimilarityMatrix {
  std::size_t n = 0;
  std::vector<double> values;
  double operator()(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

SimilarityMatrix similarity_matrix(std::span<const EmbeddingVector> batch);

enum class OnDuplicate { Reject, Replace };

// In-memory, insertion-ordered store with contiguous row-major float storage.
class VectorStore {
 public:
  explicit VectorStore(std::size_t dim = kDefaultDim);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }

  // Throws DimensionMismatch, or DuplicateId unless policy is Replace.
  void insert(const std::string& id, const EmbeddingVector& v,
              OnDuplicate policy = OnDuplicate::Reject);

  bool contains(const std::string& id) const { return index_.count(id) != 0; }
  std::optional<std::size_t> find(const std::string& id) const;

  // Throws UnknownItem.
  EmbeddingVector vector(const std::string& id) const;

  const std::string& id_at(std::size_t row) const { return ids_[row]; }
  std::span<const float> row(std::size_t r) const {
    return {data_.data() + r * dim_, dim_};
  }
  std::span<const float> data() const noexcept { return data_; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }

 private:
  std::size_t dim_;
  std::vector<std::string> ids_;
  std::vector<float> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct RetrievalHit {
  std::string item_id;
  double similarity = 0.0;
  std::size_t rank = 0;  // 1-based

  bool operator==(const RetrievalHit&) const = default;
};

// Orders by similarity descending, then item_id ascending.
bool hit_before(double sim_a, const std::string& id_a, double sim_b, const std::string& id_b);

// Selects and ranks the top k of (id, similarity) candidates; assigns ranks 1..k.
std::vector<RetrievalHit> rank_hits(std::vector<RetrievalHit> candidates, std::size_t k);

// Exact cosine top-k over the whole store. An empty store yields no hits.
// Throws InvalidArgument for k == 0, DimensionMismatch.
std::vector<RetrievalHit> top_k_exact(const EmbeddingVector& query, const VectorStore& store,
                                      std::size_t k);

// Immutable-snapshot publication: readers take a shared_ptr copy and never see
// a partially applied write. Writers serialize on their own mutex.
template <typename T>
class Snapshot {
 public:
  explicit Snapshot(std::shared_ptr<const T> initial = std::make_shared<const T>())
      : current_(std::move(initial)) {}

  std::shared_ptr<const T> load() const {
    std::lock_guard lock(ptr_mutex_);
    return current_;
  }

  void publish(std::shared_ptr<const T> next) {
    std::lock_guard lock(ptr_mutex_);
    current_ = std::move(next);
  }

 private:
  mutable std::mutex ptr_mutex_;
  std::shared_ptr<const T> current_;
};

class IvfIndex;

// A store plus an optional IVF index built over exactly that store.
struct IndexedStore {
  std::shared_ptr<const VectorStore> store = std::make_shared<const VectorStore>();
  std::shared_ptr<const IvfIndex> ivf;
};

// Serialized writers, snapshot readers.
class SnapshotStore {
 public:
  explicit SnapshotStore(std::size_t dim = kDefaultDim);

  std::shared_ptr<const IndexedStore> snapshot() const { return snap_.load(); }

  // Copy-on-write insert; drops any IVF index since it no longer covers the store.
  void insert(const std::string& id, const EmbeddingVector& v,
              OnDuplicate policy = OnDuplicate::Reject);
  void rebuild_ivf(std::size_t n_partitions, std::uint64_t seed = 0);

 private:
  std::mutex writer_;
  Snapshot<IndexedStore> snap_;
};

}  // namespace ebr

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ebr/ivf.hpp"
#include "ebr/trainer.hpp"
#include "ebr/trend.hpp"
#include "ebr/vector_core.hpp"

namespace ebr {

inline constexpr std::size_t kDefaultKPerSeed = 200;

struct TrendScore {
  std::string video_id;
  std::string trend_id;
  double score = 0.0;
  std::string best_seed_id;
  std::int64_t computed_at = 0;

  bool operator==(const TrendScore&) const = default;
};

nlohmann::json to_json(const TrendScore& s);

// Search backend for candidate recall. Without an index every search is exact.
struct RetrievalOptions {
  const IvfIndex* ivf = nullptr;
  std::size_t n_probe = 0;  // 0: the index default
};

// Max cosine over the trend's seeds; ties go to the lowest seed id.
// Throws NoSeeds, UnknownSeed (seed vector absent from store).
TrendScore score_video(const std::string& video_id, const EmbeddingVector& video, const Trend& trend,
                       const VectorStore& store, std::int64_t computed_at = 0);

// Top k neighbours of one seed, with the trend's own seeds removed.
// Throws UnknownSeed.
std::vector<RetrievalHit> retrieve_per_seed(const std::string& seed_id, const Trend& trend, const VectorStore& store,
                                            std::size_t k = kDefaultKPerSeed, const RetrievalOptions& opts = {});

// Union of per-seed candidates, each scored exactly with score_video; sorted
// by score descending, then video id. Throws NoSeeds.
std::vector<TrendScore> retrieve_trend(const Trend& trend, const VectorStore& store,
                                       std::size_t k_per_seed = kDefaultKPerSeed, const RetrievalOptions& opts = {},
                                       std::int64_t computed_at = 0);

// Embedding spaces by modality. Either pointer may be null when no trend uses it.
struct ModalityStores {
  const VectorStore* single = nullptr;
  const VectorStore* multimodal = nullptr;

  const VectorStore& get(Modality m) const;
};

struct ModalityModels {
  const Model* single = nullptr;
  const Model* multimodal = nullptr;

  const Model& get(Modality m) const;
};

struct VideoEmbeddings {
  std::optional<EmbeddingVector> single;
  std::optional<EmbeddingVector> multimodal;

  const EmbeddingVector& get(Modality m) const;
};

// Embeds the record in each modality that has a model.
VideoEmbeddings embed_video(const VideoRecord& record, const ModalityModels& models);

// Scores precomputed embeddings against every active trend; keeps results at
// or above each trend's minimum tier. Paused and retired trends are skipped.
std::vector<TrendScore> score_against_trends(const std::string& video_id, const VideoEmbeddings& embeddings,
                                             const TrendMap& trends, const ModalityStores& stores,
                                             std::int64_t computed_at);

// embed_video followed by score_against_trends. Encoder errors propagate.
std::vector<TrendScore> evaluate_new_video(const VideoRecord& record, const TrendMap& trends,
                                           const ModalityStores& stores, const ModalityModels& models);

}  // namespace ebr

#include "ebr/retrieval.hpp"

#include <algorithm>
#include <set>

#include "ebr/errors.hpp"
#include "ebr/kernels.hpp"

namespace ebr {

nlohmann::json to_json(const TrendScore& s) {
  return {{"video_id", s.video_id},
          {"trend_id", s.trend_id},
          {"score", s.score},
          {"best_seed_id", s.best_seed_id},
          {"computed_at", s.computed_at}};
}

TrendScore score_video(const std::string& video_id, const EmbeddingVector& video, const Trend& trend,
                       const VectorStore& store, std::int64_t computed_at) {
  if (trend.seeds.empty()) throw Error(Errc::NoSeeds, "trend " + trend.id + " has no seeds");
  if (video.dim() != store.dim()) throw Error(Errc::DimensionMismatch, "video vs trend store");
  TrendScore out{video_id, trend.id, -2.0, {}, computed_at};
  // Seeds are sorted by id, so a strict > keeps the lowest id on ties.
  for (const auto& seed : trend.seeds) {
    const auto row = store.find(seed.item_id);
    if (!row) throw Error(Errc::UnknownSeed, "seed " + seed.item_id + " not in store");
    const double s = kernels::clamp_unit(kernels::dot(video.values().data(), store.row(*row).data(), store.dim()));
    if (s > out.score) {
      out.score = s;
      out.best_seed_id = seed.item_id;
    }
  }
  return out;
}

std::vector<RetrievalHit> retrieve_per_seed(const std::string& seed_id, const Trend& trend, const VectorStore& store,
                                            std::size_t k, const RetrievalOptions& opts) {
  if (!trend.has_seed(seed_id)) throw Error(Errc::UnknownSeed, seed_id + " is not a seed of " + trend.id);
  if (!store.contains(seed_id)) throw Error(Errc::UnknownSeed, "seed " + seed_id + " not in store");
  if (k == 0) throw Error(Errc::InvalidArgument, "k must be >= 1");
  const auto query = store.vector(seed_id);
  // Over-fetch by the seed count so exclusion can never leave fewer than k.
  const std::size_t fetch = k + trend.seeds.size();
  std::vector<RetrievalHit> raw;
  if (opts.ivf) {
    const std::size_t probe = opts.n_probe ? opts.n_probe : opts.ivf->default_n_probe();
    raw = search_ivf(*opts.ivf, query, fetch, std::min(probe, opts.ivf->n_partitions()));
  } else {
    raw = top_k_exact(query, store, fetch);
  }
  std::vector<RetrievalHit> out;
  for (auto& h : raw) {
    if (trend.has_seed(h.item_id)) continue;
    if (out.size() == k) break;
    h.rank = out.size() + 1;
    out.push_back(std::move(h));
  }
  return out;
}

std::vector<TrendScore> retrieve_trend(const Trend& trend, const VectorStore& store, std::size_t k_per_seed,
                                       const RetrievalOptions& opts, std::int64_t computed_at) {
  if (trend.seeds.empty()) throw Error(Errc::NoSeeds, "trend " + trend.id + " has no seeds");
  std::set<std::string> seen;
  std::vector<TrendScore> out;
  for (const auto& seed : trend.seeds) {
    for (const auto& h : retrieve_per_seed(seed.item_id, trend, store, k_per_seed, opts)) {
      if (!seen.insert(h.item_id).second) continue;
      // Exact rescoring: the max over all seeds, not only the seeds that
      // happened to recall this item.
      out.push_back(score_video(h.item_id, store.vector(h.item_id), trend, store, computed_at));
    }
  }
  std::sort(out.begin(), out.end(), [](const TrendScore& a, const TrendScore& b) {
    return a.score != b.score ? a.score > b.score : a.video_id < b.video_id;
  });
  return out;
}

const VectorStore& ModalityStores::get(Modality m) const {
  const VectorStore* s = m == Modality::Single ? single : multimodal;
  if (!s) throw Error(Errc::InvalidConfig, std::string("no ") + to_string(m) + " store configured");
  return *s;
}

const Model& ModalityModels::get(Modality m) const {
  const Model* p = m == Modality::Single ? single : multimodal;
  if (!p) throw Error(Errc::InvalidConfig, std::string("no ") + to_string(m) + " model configured");
  return *p;
}

const EmbeddingVector& VideoEmbeddings::get(Modality m) const {
  const auto& v = m == Modality::Single ? single : multimodal;
  if (!v) throw Error(Errc::InvalidConfig, std::string("no ") + to_string(m) + " embedding");
  return *v;
}

VideoEmbeddings embed_video(const VideoRecord& record, const ModalityModels& models) {
  VideoEmbeddings out;
  if (models.single) out.single = models.single->embed(record);
  if (models.multimodal) out.multimodal = models.multimodal->embed(record);
  return out;
}

std::vector<TrendScore> score_against_trends(const std::string& video_id, const VideoEmbeddings& embeddings,
                                             const TrendMap& trends, const ModalityStores& stores,
                                             std::int64_t computed_at) {
  std::vector<TrendScore> out;
  for (const auto& [id, trend] : trends) {
    if (trend.state != TrendState::Active || trend.seeds.empty()) continue;
    auto s = score_video(video_id, embeddings.get(trend.modality), trend, stores.get(trend.modality), computed_at);
    if (s.score >= trend.tiers.minimum()) out.push_back(std::move(s));
  }
  return out;
}

std::vector<TrendScore> evaluate_new_video(const VideoRecord& record, const TrendMap& trends,
                                           const ModalityStores& stores, const ModalityModels& models) {
  return score_against_trends(record.id, embed_video(record, models), trends, stores, record.timestamp);
}

}  // namespace ebr

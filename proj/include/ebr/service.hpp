#pragma once

// Service core: durable state as a fold over the event log plus the vector
// files, and the request handlers behind the HTTP routes. Transport lives in
// http_server.hpp.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ebr/errors.hpp"
#include "ebr/event_log.hpp"
#include "ebr/feedback.hpp"
#include "ebr/retrieval.hpp"
#include "ebr/trainer.hpp"
#include "ebr/trend.hpp"

namespace ebr {

struct ServiceConfig {
  std::string listen_addr = "127.0.0.1:8080";
  std::filesystem::path data_dir = "data";
  std::filesystem::path model_manifest;
  std::string single_model = "single";          // manifest entry names
  std::string multimodal_model = "multimodal";
  std::string api_token;  // when set, mutations need "Authorization: Bearer <token>"
  std::size_t k_per_seed = kDefaultKPerSeed;
  std::size_t http_threads = 8;
  bool fsync = false;
  bool read_only = false;  // fold the data dir without touching it; mutations fail
  FeedbackConfig feedback;
};

// Reads an optional JSON config file, then applies LISTEN_ADDR, DATA_DIR and
// MODEL_MANIFEST from env. Throws InvalidConfig.
ServiceConfig load_service_config(const std::optional<std::filesystem::path>& file,
                                  const std::map<std::string, std::string>& env);
std::map<std::string, std::string> service_env();

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

// {"error": {"code": ..., "message": ...}} with the status for err.code().
ApiResponse error_response(const Error& err);
int http_status(Errc code);
const char* error_code_name(Errc code);

struct VideoMeta {
  std::string body_hash;
  std::int64_t event_time = 0;
  bool operator==(const VideoMeta&) const = default;
};

struct ServiceState {
  std::shared_ptr<const VectorStore> single;
  std::shared_ptr<const VectorStore> multimodal;
  std::shared_ptr<const TrendMap> trends;
  std::shared_ptr<const FeedbackLedger> ledger;
  std::shared_ptr<const std::map<std::string, VideoMeta>> videos;
  std::map<std::string, std::uint64_t> counters;  // monotone
  std::shared_ptr<const nlohmann::json> history;   // {feedback_cycles, seed_removals, threshold_changes, pauses}
  std::uint64_t last_seq = 0;
  std::int64_t last_event_time = 0;
};

// FNV-1a over a canonical dump of the folded state: vectors, trends, ledger,
// videos, counters, history. Receive times and latencies are not included.
std::string state_hash(const ServiceState& s);

class Service {
 public:
  // Loads the event log and vector files from cfg.data_dir and folds them.
  // Throws CorruptLogError, Error.
  Service(ServiceConfig cfg, std::map<std::string, Model> models);

  const ServiceConfig& config() const { return cfg_; }
  std::shared_ptr<const ServiceState> snapshot() const;
  std::string state_hash() const { return ebr::state_hash(*snapshot()); }

  ApiResponse post_video(const std::string& body);
  ApiResponse post_trend(const std::string& body);
  ApiResponse get_trends() const;
  ApiResponse get_trend(const std::string& id, std::optional<std::int64_t> at) const;
  ApiResponse post_seed(const std::string& trend_id, const std::string& body);
  ApiResponse delete_seed(const std::string& trend_id, const std::string& seed_id, const std::string& body);
  ApiResponse pause_trend(const std::string& trend_id, const std::string& body);
  ApiResponse resume_trend(const std::string& trend_id, const std::string& body);
  ApiResponse put_tiers(const std::string& trend_id, const std::string& body);
  ApiResponse post_feedback_cycle(const std::string& trend_id, const std::string& body);
  ApiResponse get_candidates(const std::string& trend_id, std::size_t k, std::size_t offset) const;
  ApiResponse post_feedback(const std::string& body);
  ApiResponse get_cluster_suggestions(const std::string& trend_id, double eps, std::size_t min_pts, std::size_t m,
                                      const std::string& scope) const;
  ApiResponse get_historical_suggestions(const std::string& trend_id, std::optional<std::int64_t> at,
                                         std::int64_t window, double threshold, std::uint64_t min_n) const;
  ApiResponse get_metrics() const;
  ApiResponse get_health() const;

  void record_latency(double millis);

 private:
  struct Pending;
  template <class F>
  ApiResponse write(F&& f);
  void commit(Pending& p, std::int64_t event_time, const std::string& kind, nlohmann::json payload);
  void fold(ServiceState& s, const EventRecord& e, const std::map<std::string, EmbeddingVector>* single_src,
            const std::map<std::string, EmbeddingVector>* multi_src) const;
  const VectorStore& store_for(const ServiceState& s, Modality m) const;
  std::int64_t event_time_of(const nlohmann::json& body, const ServiceState& s) const;
  nlohmann::json trend_view(const ServiceState& s, const Trend& t, std::int64_t at) const;
  std::vector<nlohmann::json> backfill_decisions(const ServiceState& s, const Trend& t, std::int64_t event_time) const;

  ServiceConfig cfg_;
  std::map<std::string, Model> models_;
  const Model* single_model_ = nullptr;
  const Model* multimodal_model_ = nullptr;
  std::unique_ptr<EventLog> log_;

  mutable std::mutex snapshot_mutex_;  // guards the pointer swap only
  std::shared_ptr<const ServiceState> snapshot_;
  std::mutex writer_mutex_;

  mutable std::mutex latency_mutex_;
  std::vector<double> latencies_;  // ring of recent request times, ms
  std::size_t latency_next_ = 0;
};

}  // namespace ebr

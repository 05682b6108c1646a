#include "ebr/service.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>

#include "ebr/errors.hpp"
#include "ebr/seed_select.hpp"
#include "ebr/vector_io.hpp"

extern char** environ;

namespace ebr {

// ---------------------------------------------------------------- config

ServiceConfig load_service_config(const std::optional<std::filesystem::path>& file,
                                  const std::map<std::string, std::string>& env) {
  ServiceConfig c;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw Error(Errc::InvalidConfig, "cannot read config file " + file->string());
    try {
      const auto j = nlohmann::json::parse(in);
      c.listen_addr = j.value("listen_addr", c.listen_addr);
      c.data_dir = j.value("data_dir", c.data_dir.string());
      c.model_manifest = j.value("model_manifest", c.model_manifest.string());
      c.single_model = j.value("single_model", c.single_model);
      c.multimodal_model = j.value("multimodal_model", c.multimodal_model);
      c.api_token = j.value("api_token", c.api_token);
      c.k_per_seed = j.value("k_per_seed", c.k_per_seed);
      c.http_threads = j.value("http_threads", c.http_threads);
      c.fsync = j.value("fsync", c.fsync);
      c.read_only = j.value("read_only", c.read_only);
      if (j.contains("feedback")) {
        const auto& f = j.at("feedback");
        auto& fb = c.feedback;
        fb.window = f.value("window", fb.window);
        fb.prune_threshold = f.value("prune_threshold", fb.prune_threshold);
        fb.min_n = f.value("min_n", fb.min_n);
        fb.target_precision = f.value("target_precision", fb.target_precision);
        fb.step = f.value("step", fb.step);
        fb.lower_margin = f.value("lower_margin", fb.lower_margin);
        fb.lower_after_cycles = f.value("lower_after_cycles", fb.lower_after_cycles);
        fb.min_bound = f.value("min_bound", fb.min_bound);
        fb.max_bound = f.value("max_bound", fb.max_bound);
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::InvalidConfig, std::string("config file: ") + e.what());
    }
  }
  if (const auto it = env.find("LISTEN_ADDR"); it != env.end()) c.listen_addr = it->second;
  if (const auto it = env.find("DATA_DIR"); it != env.end()) c.data_dir = it->second;
  if (const auto it = env.find("MODEL_MANIFEST"); it != env.end()) c.model_manifest = it->second;
  if (c.model_manifest.empty()) throw Error(Errc::InvalidConfig, "model_manifest is not set");
  if (c.data_dir.empty()) throw Error(Errc::InvalidConfig, "data_dir is not set");
  if (c.listen_addr.rfind(':') == std::string::npos) throw Error(Errc::InvalidConfig, "listen_addr must be host:port");
  if (c.k_per_seed == 0 || c.http_threads == 0) throw Error(Errc::InvalidConfig, "k_per_seed and http_threads must be >= 1");
  c.feedback.validate();
  return c;
}

std::map<std::string, std::string> service_env() {
  std::map<std::string, std::string> env;
  for (const char* key : {"LISTEN_ADDR", "DATA_DIR", "MODEL_MANIFEST"}) {
    if (const char* v = std::getenv(key)) env[key] = v;
  }
  return env;
}

// ---------------------------------------------------------------- errors

int http_status(Errc code) {
  switch (code) {
    case Errc::UnknownTrend:
    case Errc::UnknownItem:
    case Errc::UnknownSeed:
    case Errc::UnknownCluster:
    case Errc::NoPriorDecision:
      return 404;
    case Errc::Conflict:
    case Errc::DuplicateId:
      return 409;
    case Errc::CorruptFile:
    case Errc::CorruptLog:
    case Errc::IoError:
      return 500;
    default:
      return 422;
  }
}

const char* error_code_name(Errc code) {
  switch (code) {
    case Errc::ZeroVector: return "zero_vector";
    case Errc::DimensionMismatch: return "dimension_mismatch";
    case Errc::EmptyStore: return "empty_store";
    case Errc::DuplicateId: return "duplicate_id";
    case Errc::UnknownItem: return "unknown_item";
    case Errc::InvalidArgument: return "invalid_argument";
    case Errc::NoPositives: return "no_positives";
    case Errc::BadTemperature: return "bad_temperature";
    case Errc::ZeroEmbedding: return "zero_embedding";
    case Errc::EmptyTokens: return "empty_tokens";
    case Errc::InvalidConfig: return "invalid_config";
    case Errc::UnknownCluster: return "unknown_cluster";
    case Errc::EmptyWindow: return "empty_window";
    case Errc::UnknownTrend: return "unknown_trend";
    case Errc::UnknownSeed: return "unknown_seed";
    case Errc::NoSeeds: return "no_seeds";
    case Errc::MalformedTiers: return "malformed_tiers";
    case Errc::NoPriorDecision: return "no_prior_decision";
    case Errc::NoLabeledCandidates: return "no_labeled_candidates";
    case Errc::EmptyInput: return "empty_input";
    case Errc::DegenerateLabels: return "degenerate_labels";
    case Errc::CorruptFile: return "corrupt_file";
    case Errc::CorruptLog: return "corrupt_log";
    case Errc::Conflict: return "conflict";
    case Errc::IoError: return "io_error";
  }
  return "internal";
}

ApiResponse error_response(const Error& err) {
  return {http_status(err.code()), {{"error", {{"code", error_code_name(err.code())}, {"message", err.what()}}}}};
}

namespace {

ApiResponse bad_request(const std::string& message) {
  return {400, {{"error", {{"code", "malformed_json"}, {"message", message}}}}};
}

nlohmann::json parse_object(const std::string& body, bool allow_empty = false) {
  if (allow_empty && body.find_first_not_of(" \t\r\n") == std::string::npos) return nlohmann::json::object();
  auto j = nlohmann::json::parse(body);  // json::parse_error -> 400
  if (!j.is_object()) throw nlohmann::json::type_error::create(302, "request body must be a JSON object", nullptr);
  return j;
}

std::string fnv_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::int64_t now_seconds() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

// Copy-on-write: clones unless this state is the only owner.
template <class T>
T& mut(std::shared_ptr<const T>& p) {
  if (p.use_count() != 1) p = std::make_shared<T>(*p);
  return const_cast<T&>(*p);
}

const Trend& find_trend(const ServiceState& s, const std::string& id) {
  const auto it = s.trends->find(id);
  if (it == s.trends->end()) throw Error(Errc::UnknownTrend, id);
  return it->second;
}

Trend& find_trend(TrendMap& trends, const std::string& id) {
  const auto it = trends.find(id);
  if (it == trends.end()) throw Error(Errc::UnknownTrend, id);
  return it->second;
}

std::vector<std::string> string_list(const nlohmann::json& j) { return j.get<std::vector<std::string>>(); }

}  // namespace

// ---------------------------------------------------------------- state

std::string state_hash(const ServiceState& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto feed = [&](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  const auto feed_str = [&](const std::string& str) {
    feed(str.data(), str.size());
    feed("\0", 1);
  };
  for (const auto* store : {s.single.get(), s.multimodal.get()}) {
    feed_str("store");
    for (std::size_t r = 0; r < store->size(); ++r) {
      feed_str(store->id_at(r));
      const auto row = store->row(r);
      feed(row.data(), row.size() * sizeof(float));
    }
  }
  nlohmann::json doc;
  for (const auto& [id, t] : *s.trends) doc["trends"][id] = to_json(t);
  auto decisions = nlohmann::json::array();
  for (const auto& [key, d] : s.ledger->decisions()) decisions.push_back(to_json(d));
  auto labels = nlohmann::json::array();
  for (const auto& [key, l] : s.ledger->labels()) labels.push_back(to_json(l));
  auto relabels = nlohmann::json::array();
  for (const auto& r : s.ledger->relabels()) relabels.push_back({to_json(r.previous), to_json(r.replacement)});
  doc["decisions"] = decisions;
  doc["labels"] = labels;
  doc["relabels"] = relabels;
  for (const auto& [id, v] : *s.videos) doc["videos"][id] = {v.body_hash, v.event_time};
  doc["counters"] = s.counters;
  doc["history"] = *s.history;
  doc["last_seq"] = s.last_seq;
  doc["last_event_time"] = s.last_event_time;
  feed_str(doc.dump());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct Service::Pending {
  ServiceState state;
  std::map<std::string, EmbeddingVector> single_vectors;
  std::map<std::string, EmbeddingVector> multimodal_vectors;
  bool dirty = false;
};

namespace {

std::filesystem::path vector_path(const ServiceConfig& c, Modality m) {
  return c.data_dir / (std::string("vectors_") + to_string(m) + ".ebrv");
}

std::map<std::string, EmbeddingVector> load_vectors(const std::filesystem::path& path) {
  std::map<std::string, EmbeddingVector> out;
  if (!std::filesystem::exists(path)) return out;
  const auto store = read_vector_file(path, OnDuplicate::Replace);
  for (std::size_t r = 0; r < store.size(); ++r) out.emplace(store.id_at(r), store.vector(store.id_at(r)));
  return out;
}

void rewrite_vectors(const std::filesystem::path& path, const VectorStore& store) {
  auto tmp = path;
  tmp += ".tmp";
  write_vector_file(tmp, store);
  std::filesystem::rename(tmp, path);
}

const Model* bind_model(const std::map<std::string, Model>& models, const std::string& name, Modality m) {
  if (const auto it = models.find(name); it != models.end()) {
    if (it->second.modality() != m) {
      throw Error(Errc::InvalidConfig, "model '" + name + "' is not " + to_string(m));
    }
    return &it->second;
  }
  for (const auto& [n, model] : models) {
    if (model.modality() == m) return &model;
  }
  return nullptr;
}

}  // namespace

Service::Service(ServiceConfig cfg, std::map<std::string, Model> models) : cfg_(std::move(cfg)), models_(std::move(models)) {
  cfg_.feedback.validate();
  single_model_ = bind_model(models_, cfg_.single_model, Modality::Single);
  multimodal_model_ = bind_model(models_, cfg_.multimodal_model, Modality::Multimodal);
  if (!single_model_ && !multimodal_model_) throw Error(Errc::InvalidConfig, "manifest has no usable model");
  if (!cfg_.read_only) std::filesystem::create_directories(cfg_.data_dir);

  ServiceState s;
  s.single = std::make_shared<VectorStore>(single_model_ ? single_model_->config.out_dim : kDefaultDim);
  s.multimodal = std::make_shared<VectorStore>(multimodal_model_ ? multimodal_model_->config.out_dim : kDefaultDim);
  s.trends = std::make_shared<TrendMap>();
  s.ledger = std::make_shared<FeedbackLedger>();
  s.videos = std::make_shared<std::map<std::string, VideoMeta>>();
  s.history = std::make_shared<nlohmann::json>(nlohmann::json{{"feedback_cycles", nlohmann::json::array()},
                                                              {"seed_removals", nlohmann::json::array()},
                                                              {"threshold_changes", nlohmann::json::array()},
                                                              {"pauses", nlohmann::json::array()}});

  const auto single_src = load_vectors(vector_path(cfg_, Modality::Single));
  const auto multi_src = load_vectors(vector_path(cfg_, Modality::Multimodal));
  const auto log_path = cfg_.data_dir / "events.jsonl";
  LoadedLog read_only_log;
  if (cfg_.read_only) {
    read_only_log = read_event_log(log_path);
  } else {
    log_ = std::make_unique<EventLog>(log_path, cfg_.fsync);
  }
  for (const auto& e : (log_ ? log_->loaded() : read_only_log).events) {
    try {
      fold(s, e, &single_src, &multi_src);
    } catch (const CorruptLogError&) {
      throw;
    } catch (const std::exception& ex) {
      throw CorruptLogError(e.byte_offset, "event seq " + std::to_string(e.seq) + " (" + e.kind + "): " + ex.what());
    }
  }
  if (!cfg_.read_only) {
    // Drops vectors that never made it into the log and any torn tail.
    rewrite_vectors(vector_path(cfg_, Modality::Single), *s.single);
    rewrite_vectors(vector_path(cfg_, Modality::Multimodal), *s.multimodal);
  }
  snapshot_ = std::make_shared<const ServiceState>(std::move(s));
}

std::shared_ptr<const ServiceState> Service::snapshot() const {
  std::lock_guard lock(snapshot_mutex_);
  return snapshot_;
}

const VectorStore& Service::store_for(const ServiceState& s, Modality m) const {
  return m == Modality::Single ? *s.single : *s.multimodal;
}

std::int64_t Service::event_time_of(const nlohmann::json& body, const ServiceState& s) const {
  if (!body.contains("event_time")) return s.last_event_time;
  return body.at("event_time").get<std::int64_t>();
}

void Service::fold(ServiceState& s, const EventRecord& e, const std::map<std::string, EmbeddingVector>* single_src,
                   const std::map<std::string, EmbeddingVector>* multi_src) const {
  const auto& p = e.payload;
  const auto bump = [&](const std::string& name) { ++s.counters[name]; };
  if (e.kind == "video_ingested") {
    const auto id = p.at("id").get<std::string>();
    for (const auto& m : string_list(p.at("modalities"))) {
      const bool single = modality_from_string(m) == Modality::Single;
      const auto* src = single ? single_src : multi_src;
      const auto it = src->find(id);
      if (it == src->end()) throw Error(Errc::CorruptLog, "no " + m + " vector for video " + id);
      mut(single ? s.single : s.multimodal).insert(id, it->second);
    }
    mut(s.videos)[id] = {p.at("body_hash").get<std::string>(), e.event_time};
    bump("videos_ingested");
  } else if (e.kind == "trend_created") {
    auto t = trend_from_json(p.at("trend"));
    if (s.trends->count(t.id)) throw Error(Errc::Conflict, "trend " + t.id + " already exists");
    mut(s.trends).emplace(t.id, std::move(t));
    bump("trends_created");
  } else if (e.kind == "seed_added") {
    find_trend(mut(s.trends), p.at("trend_id").get<std::string>()).add_seed(seed_from_json(p.at("seed")));
    bump("seeds_added");
  } else if (e.kind == "seed_removed") {
    const auto seed = p.at("seed_id").get<std::string>();
    if (!find_trend(mut(s.trends), p.at("trend_id").get<std::string>()).remove_seed(seed)) {
      throw Error(Errc::UnknownSeed, seed);
    }
    auto entry = p;
    entry["seq"] = e.seq;
    entry["event_time"] = e.event_time;
    mut(s.history)["seed_removals"].push_back(entry);
    bump("seeds_removed");
  } else if (e.kind == "decision") {
    const auto d = decision_from_json(p.at("decision"));
    if (!mut(s.ledger).record_decision(d)) throw Error(Errc::Conflict, "duplicate decision");
    bump("decisions");
    bump(std::string("decisions_") + to_string(d.tier));
  } else if (e.kind == "label") {
    const auto before = s.ledger->relabels().size();
    mut(s.ledger).add_label(label_from_json(p.at("label")));
    bump("labels");
    if (s.ledger->relabels().size() != before) bump("relabels");
  } else if (e.kind == "threshold_changed") {
    auto& t = find_trend(mut(s.trends), p.at("trend_id").get<std::string>());
    t.tiers = tiers_from_json(p.at("after"));
    if (p.value("source", "") == "api") t.high_precision_streak = 0;
    auto entry = p;
    entry["seq"] = e.seq;
    entry["event_time"] = e.event_time;
    mut(s.history)["threshold_changes"].push_back(entry);
    bump("threshold_changes");
  } else if (e.kind == "trend_paused") {
    auto& t = find_trend(mut(s.trends), p.at("trend_id").get<std::string>());
    t.state = TrendState::Paused;
    if (p.value("reason", "") == "last_seed_guard") t.needs_review = true;
    auto entry = p;
    entry["seq"] = e.seq;
    entry["event_time"] = e.event_time;
    mut(s.history)["pauses"].push_back(entry);
    bump("pauses");
  } else if (e.kind == "trend_resumed") {
    auto& t = find_trend(mut(s.trends), p.at("trend_id").get<std::string>());
    t.state = TrendState::Active;
    t.needs_review = false;
    bump("resumes");
  } else if (e.kind == "feedback_cycle") {
    const auto report = feedback_report_from_json(p.at("report"));
    auto& t = find_trend(mut(s.trends), report.trend_id);
    t.high_precision_streak = report.high_precision_streak;
    t.needs_review = p.at("needs_review").get<bool>();
    auto entry = p.at("report");
    entry["seq"] = e.seq;
    mut(s.history)["feedback_cycles"].push_back(entry);
    bump("feedback_cycles");
  } else {
    throw Error(Errc::CorruptLog, "unknown event kind '" + e.kind + "'");
  }
  bump("events");
  s.last_seq = e.seq;
  s.last_event_time = std::max(s.last_event_time, e.event_time);
}

void Service::commit(Pending& p, std::int64_t event_time, const std::string& kind, nlohmann::json payload) {
  const auto e = log_->append(event_time, now_seconds(), kind, std::move(payload));
  p.dirty = true;
  fold(p.state, e, &p.single_vectors, &p.multimodal_vectors);
}

template <class F>
ApiResponse Service::write(F&& f) {
  if (!log_) return error_response(Error(Errc::Conflict, "service is read-only"));
  std::lock_guard lock(writer_mutex_);
  Pending p{*snapshot(), {}, {}, false};
  ApiResponse r;
  try {
    r = f(p);
  } catch (const Error& e) {
    r = error_response(e);
  } catch (const nlohmann::json::exception& e) {
    r = bad_request(e.what());
  }
  if (p.dirty) {
    auto next = std::make_shared<const ServiceState>(std::move(p.state));
    std::lock_guard swap(snapshot_mutex_);
    snapshot_ = std::move(next);
  }
  return r;
}

namespace {

template <class F>
ApiResponse guarded(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    return error_response(e);
  } catch (const nlohmann::json::exception& e) {
    return bad_request(e.what());
  }
}

}  // namespace

nlohmann::json Service::trend_view(const ServiceState& s, const Trend& t, std::int64_t at) const {
  auto j = to_json(t);
  auto stats = nlohmann::json::array();
  for (const auto& seed : t.seeds) {
    const auto st = s.ledger->seed_stats(t.id, seed.item_id, at, cfg_.feedback.window);
    stats.push_back({{"seed_id", seed.item_id},
                     {"n", st.n},
                     {"r", st.r},
                     {"p", st.n ? nlohmann::json(historical_precision(st)) : nlohmann::json(nullptr)},
                     {"window_start", st.window_start},
                     {"window_end", st.window_end}});
  }
  j["seed_stats"] = stats;
  return j;
}

std::vector<nlohmann::json> Service::backfill_decisions(const ServiceState& s, const Trend& t,
                                                        std::int64_t event_time) const {
  std::vector<nlohmann::json> out;
  if (t.state != TrendState::Active || t.seeds.empty()) return out;
  for (const auto& score : retrieve_trend(t, store_for(s, t.modality), cfg_.k_per_seed, {}, event_time)) {
    if (score.score < t.tiers.minimum()) break;  // sorted by score
    if (s.ledger->decision(t.id, score.video_id)) continue;
    out.push_back(to_json(decide_action(score, t.tiers)));
  }
  return out;
}

// ---------------------------------------------------------------- handlers

ApiResponse Service::post_video(const std::string& body) {
  return write([&](Pending& p) -> ApiResponse {
    const auto j = parse_object(body);
    if (!j.contains("id") || !j.at("id").is_string() || j.at("id").get<std::string>().empty()) {
      throw Error(Errc::InvalidArgument, "id must be a non-empty string");
    }
    const auto id = j.at("id").get<std::string>();
    const auto hash = fnv_hex(j.dump());
    if (const auto it = p.state.videos->find(id); it != p.state.videos->end()) {
      if (it->second.body_hash != hash) throw Error(Errc::Conflict, "video " + id + " exists with a different body");
      return {200, {{"id", id}, {"replayed", true}}};
    }
    const std::int64_t event_time = event_time_of(j, p.state);
    VideoRecord r;
    r.id = id;
    r.timestamp = event_time;
    r.visual = tokens_from_json(j.value("visual", nlohmann::json::array()), "visual");
    if (multimodal_model_ || j.contains("text")) r.text = tokens_from_json(j.value("text", nlohmann::json::array()), "text");
    for (const Model* m : {single_model_, multimodal_model_}) {
      if (!m) continue;
      if (r.visual.dim != m->config.token_dim ||
          (m->modality() == Modality::Multimodal && r.text.dim != m->config.token_dim)) {
        throw Error(Errc::InvalidArgument, "token width must be " + std::to_string(m->config.token_dim));
      }
    }
    const auto emb = embed_video(r, {single_model_, multimodal_model_});

    nlohmann::json modalities = nlohmann::json::array();
    if (emb.single) {
      append_vector_record(vector_path(cfg_, Modality::Single), emb.single->dim(), id, *emb.single);
      p.single_vectors.emplace(id, *emb.single);
      modalities.push_back("single");
    }
    if (emb.multimodal) {
      append_vector_record(vector_path(cfg_, Modality::Multimodal), emb.multimodal->dim(), id, *emb.multimodal);
      p.multimodal_vectors.emplace(id, *emb.multimodal);
      modalities.push_back("multimodal");
    }
    commit(p, event_time, "video_ingested", {{"id", id}, {"body_hash", hash}, {"modalities", modalities}});

    const ModalityStores stores{p.state.single.get(), p.state.multimodal.get()};
    auto scores = nlohmann::json::array();
    for (const auto& score : score_against_trends(id, emb, *p.state.trends, stores, event_time)) {
      const auto d = decide_action(score, find_trend(p.state, score.trend_id).tiers);
      if (!p.state.ledger->decision(d.trend_id, d.video_id)) commit(p, event_time, "decision", {{"decision", to_json(d)}});
      auto sj = to_json(score);
      sj["tier"] = to_string(d.tier);
      scores.push_back(sj);
    }
    return {201, {{"id", id}, {"embeddings", modalities}, {"trend_scores", scores}}};
  });
}

ApiResponse Service::post_trend(const std::string& body) {
  return write([&](Pending& p) -> ApiResponse {
    const auto j = parse_object(body);
    Trend t;
    t.id = j.contains("id") ? j.at("id").get<std::string>() : "trend-" + fnv_hex(j.dump()).substr(0, 12);
    if (t.id.empty() || t.id.find('/') != std::string::npos) throw Error(Errc::InvalidArgument, "bad trend id");
    t.name = j.value("name", t.id);
    t.modality = modality_from_string(j.value("modality", std::string(multimodal_model_ && !single_model_ ? "multimodal" : "single")));
    if ((t.modality == Modality::Single ? single_model_ : multimodal_model_) == nullptr) {
      throw Error(Errc::InvalidArgument, std::string("no model for modality ") + to_string(t.modality));
    }
    if (j.contains("tiers")) t.tiers = tiers_from_json(j.at("tiers"));
    t.tiers.validate();
    t.created_at = event_time_of(j, p.state);
    if (const auto it = p.state.trends->find(t.id); it != p.state.trends->end()) {
      const auto& old = it->second;
      if (old.name == t.name && old.modality == t.modality && (!j.contains("tiers") || old.tiers == t.tiers)) {
        return {200, trend_view(p.state, old, p.state.last_event_time)};
      }
      throw Error(Errc::Conflict, "trend " + t.id + " exists with a different definition");
    }
    commit(p, t.created_at, "trend_created", {{"trend", to_json(t)}});
    return {201, trend_view(p.state, find_trend(p.state, t.id), p.state.last_event_time)};
  });
}

ApiResponse Service::get_trends() const {
  return guarded([&]() -> ApiResponse {
    const auto s = snapshot();
    auto list = nlohmann::json::array();
    for (const auto& [id, t] : *s->trends) list.push_back(trend_view(*s, t, s->last_event_time));
    return {200, {{"trends", list}}};
  });
}

ApiResponse Service::get_trend(const std::string& id, std::optional<std::int64_t> at) const {
  return guarded([&]() -> ApiResponse {
    const auto s = snapshot();
    return {200, trend_view(*s, find_trend(*s, id), at.value_or(s->last_event_time))};
  });
}

ApiResponse Service::post_seed(const std::string& trend_id, const std::string& body) {
  return write([&](Pending& p) -> ApiResponse {
    const auto j = parse_object(body);
    const Trend& t = find_trend(p.state, trend_id);
    const auto item = j.at("item_id").get<std::string>();
    if (!store_for(p.state, t.modality).contains(item)) throw Error(Errc::UnknownItem, item);
    const std::int64_t event_time = event_time_of(j, p.state);
    if (t.has_seed(item)) {
      return {200, {{"added", false}, {"trend", trend_view(p.state, t, p.state.last_event_time)}}};
    }
    const SeedRecord seed{item, seed_provenance_from_string(j.value("provenance", "manual")), j.value("annotator", ""),
                          event_time};
    commit(p, event_time, "seed_added", {{"trend_id", trend_id}, {"seed", to_json(seed)}});
    const auto decisions = backfill_decisions(p.state, find_trend(p.state, trend_id), event_time);
    for (const auto& d : decisions) commit(p, event_time, "decision", {{"decision", d}});
    return {201,
            {{"added", true},
             {"backfilled_decisions", decisions.size()},
             {"trend", trend_view(p.state, find_trend(p.state, trend_id), p.state.last_event_time)}}};
  });
}

ApiResponse Service::delete_seed(const std::string& trend_id, const std::string& seed_id, const std::string& body) {
  return write([&](Pending& p) -> ApiResponse {
    const auto j = parse_object(body, true);
    const Trend& t = find_trend(p.state, trend_id);
    if (!t.has_seed(seed_id)) throw Error(Errc::UnknownSeed, seed_id);
    const std::int64_t event_time = event_time_of(j, p.state);
    if (t.seeds.size() == 1) {
      if (t.state != TrendState::Paused) {
        commit(p, event_time, "trend_paused", {{"trend_id", trend_id}, {"reason", "last_seed_guard"}});
      }
      auto err = error_response(Error(Errc::Conflict, "removing the last seed would empty the trend; trend paused"));
      err.body["trend"] = trend_view(p.state, find_trend(p.state, trend_id), p.state.last_event_time);
      return err;
    }
    commit(p, event_time, "seed_removed", {{"trend_id", trend_id}, {"seed_id", seed_id}, {"reason", "manual"}});
    return {200, trend_view(p.state, find_trend(p.state, trend_id), p.state.last_event_time)};
  });
}

ApiResponse Service::pause_trend(const std::string& trend_id, const std::string& body) {
  return write([&](Pending& p) -> ApiResponse {
    const auto j = parse_object(body, true);
    const Trend& t = find_trend(p.state, trend_id);
    if (t.state != TrendState::Paused) {
      commit(p, event_time_of(j, p.state), "trend_paused", {{"trend_id", trend_id}, {"reason", j.value("reason", "manual")}});
    }
    return {200, trend_view(p.state, find_trend(p.state, trend_id), p.state.last_event_time)};
  });
}

ApiResponse Service::resume_trend(const std::string& trend_id, const std::string& body) {
  return write([&](Pending& p) -> ApiResponse {
    const auto j = parse_object(body, true);
    const Trend& t = find_trend(p.state, trend_id);
    if (t.state != TrendState::Active) {
      if (t.seeds.empty()) throw Error(Errc::Conflict, "trend has no seeds");
      commit(p, event_time_of(j, p.state), "trend_resumed", {{"trend_id", trend_id}});
    }
    return {200, trend_view(p.state, find_trend(p.state, trend_id), p.state.last_event_time)};
  });
}

ApiResponse Service::put_tiers(const std::string& trend_id, const std::string& body) {
  return write([&](Pending& p) -> ApiResponse {
    const auto j = parse_object(body);
    const Trend& t = find_trend(p.state, trend_id);
    const auto tiers = tiers_from_json(j.contains("tiers") ? j.at("tiers") : j);
    tiers.validate();
    if (tiers != t.tiers) {
      commit(p, event_time_of(j, p.state), "threshold_changed",
             {{"trend_id", trend_id}, {"before", to_json(t.tiers)}, {"after", to_json(tiers)}, {"source", "api"}});
    }
    return {200, trend_view(p.state, find_trend(p.state, trend_id), p.state.last_event_time)};
  });
}

ApiResponse Service::post_feedback_cycle(const std::string& trend_id, const std::string& body) {
  return write([&](Pending& p) -> ApiResponse {
    const auto j = parse_object(body, true);
    const Trend& current = find_trend(p.state, trend_id);
    const std::int64_t event_time = event_time_of(j, p.state);
    for (const auto& c : p.state.history->at("feedback_cycles")) {
      if (c.at("trend_id") == trend_id && c.at("event_time").get<std::int64_t>() == event_time) {
        auto replay = c;
        replay.erase("seq");
        return {200, replay};
      }
    }
    Trend next = current;
    const auto report = run_feedback_cycle(next, *p.state.ledger, cfg_.feedback, event_time);
    for (const auto& seed : report.removed) {
      commit(p, event_time, "seed_removed", {{"trend_id", trend_id}, {"seed_id", seed}, {"reason", "feedback_prune"}});
    }
    if (next.state == TrendState::Paused && current.state != TrendState::Paused) {
      commit(p, event_time, "trend_paused", {{"trend_id", trend_id}, {"reason", "last_seed_guard"}});
    }
    if (report.tiers_after != report.tiers_before) {
      commit(p, event_time, "threshold_changed",
             {{"trend_id", trend_id},
              {"before", to_json(report.tiers_before)},
              {"after", to_json(report.tiers_after)},
              {"source", "feedback"}});
    }
    commit(p, event_time, "feedback_cycle", {{"report", to_json(report)}, {"needs_review", next.needs_review}});
    if (find_trend(p.state, trend_id) != next) {
      throw Error(Errc::CorruptLog, "feedback cycle events do not reproduce the cycle's trend state");
    }
    return {200, to_json(report)};
  });
}

ApiResponse Service::get_candidates(const std::string& trend_id, std::size_t k, std::size_t offset) const {
  return guarded([&]() -> ApiResponse {
    if (k == 0) throw Error(Errc::InvalidArgument, "k must be >= 1");
    const auto s = snapshot();
    const Trend& t = find_trend(*s, trend_id);
    std::vector<TrendScore> ranked;
    if (!t.seeds.empty()) ranked = retrieve_trend(t, store_for(*s, t.modality), cfg_.k_per_seed);
    auto list = nlohmann::json::array();
    for (std::size_t i = offset; i < std::min(ranked.size(), offset + k); ++i) {
      const auto& sc = ranked[i];
      const auto* d = s->ledger->decision(trend_id, sc.video_id);
      const auto* l = s->ledger->label(trend_id, sc.video_id);
      list.push_back({{"rank", i + 1},
                      {"video_id", sc.video_id},
                      {"score", sc.score},
                      {"best_seed_id", sc.best_seed_id},
                      {"tier", to_string(decide_action(sc, t.tiers).tier)},
                      {"decision", d ? nlohmann::json(to_string(d->tier)) : nlohmann::json(nullptr)},
                      {"label", l ? to_string(l->verdict) : "unlabeled"}});
    }
    return {200, {{"trend_id", trend_id}, {"k", k}, {"offset", offset}, {"total", ranked.size()}, {"candidates", list}}};
  });
}

ApiResponse Service::post_feedback(const std::string& body) {
  return write([&](Pending& p) -> ApiResponse {
    const auto j = parse_object(body);
    FeedbackLabel l;
    l.video_id = j.at("video_id").get<std::string>();
    l.trend_id = j.at("trend_id").get<std::string>();
    l.verdict = verdict_from_string(j.at("verdict").get<std::string>());
    l.labeler = j.value("labeler", "");
    l.labeled_at = event_time_of(j, p.state);
    find_trend(p.state, l.trend_id);
    const auto* d = p.state.ledger->decision(l.trend_id, l.video_id);
    if (!d) throw Error(Errc::NoPriorDecision, l.trend_id + "/" + l.video_id);
    const std::string seed = d->best_seed_id;
    const auto* existing = p.state.ledger->label(l.trend_id, l.video_id);
    const bool replay = existing && *existing == l;
    if (!replay) commit(p, l.labeled_at, "label", {{"label", to_json(l)}});
    const auto st = p.state.ledger->seed_stats(l.trend_id, seed, l.labeled_at, cfg_.feedback.window);
    return {replay ? 200 : 201,
            {{"seed_id", seed},
             {"n", st.n},
             {"r", st.r},
             {"p", st.n ? nlohmann::json(historical_precision(st)) : nlohmann::json(nullptr)},
             {"window_start", st.window_start},
             {"window_end", st.window_end}}};
  });
}

ApiResponse Service::get_cluster_suggestions(const std::string& trend_id, double eps, std::size_t min_pts,
                                             std::size_t m, const std::string& scope) const {
  return guarded([&]() -> ApiResponse {
    const auto s = snapshot();
    const Trend& t = find_trend(*s, trend_id);
    const VectorStore& full = store_for(*s, t.modality);
    VectorStore subset(full.dim());
    const VectorStore* store = &full;
    if (scope == "candidates") {
      if (!t.seeds.empty()) {
        for (const auto& sc : retrieve_trend(t, full, cfg_.k_per_seed)) subset.insert(sc.video_id, full.vector(sc.video_id));
      }
      store = &subset;
    } else if (scope != "all") {
      throw Error(Errc::InvalidArgument, "scope must be all or candidates");
    }
    auto clusters = nlohmann::json::array();
    if (!store->empty()) {
      const auto a = dbscan(*store, eps, min_pts);
      for (std::size_t c = 0; c < a.n_clusters; ++c) {
        auto picks = nlohmann::json::array();
        for (const auto& id : centroid_proximity_seeds(*store, a, static_cast<int>(c), m)) {
          picks.push_back({{"item_id", id}, {"is_seed", t.has_seed(id)}});
        }
        clusters.push_back({{"cluster_id", c}, {"size", a.members(static_cast<int>(c)).size()}, {"suggestions", picks}});
      }
    }
    return {200,
            {{"trend_id", trend_id},
             {"scope", scope},
             {"eps", eps},
             {"min_pts", min_pts},
             {"m", m},
             {"items", store->size()},
             {"clusters", clusters}}};
  });
}

ApiResponse Service::get_historical_suggestions(const std::string& trend_id, std::optional<std::int64_t> at,
                                                std::int64_t window, double threshold, std::uint64_t min_n) const {
  return guarded([&]() -> ApiResponse {
    const auto s = snapshot();
    const Trend& t = find_trend(*s, trend_id);
    const std::int64_t end = at.value_or(s->last_event_time);
    std::set<std::string> ids;
    for (const auto& [key, d] : s->ledger->decisions()) {
      if (key.first == trend_id) ids.insert(d.best_seed_id);
    }
    for (const auto& seed : t.seeds) ids.insert(seed.item_id);
    std::vector<SeedStats> stats;
    for (const auto& id : ids) stats.push_back(s->ledger->seed_stats(trend_id, id, end, window));
    const auto accepted = select_historical_seeds(stats, threshold, min_n);
    const std::set<std::string> accepted_set(accepted.begin(), accepted.end());
    auto candidates = nlohmann::json::array();
    for (const auto& st : stats) {
      candidates.push_back({{"seed_id", st.seed_id},
                            {"n", st.n},
                            {"r", st.r},
                            {"p", st.n ? nlohmann::json(historical_precision(st)) : nlohmann::json(nullptr)},
                            {"accepted", accepted_set.count(st.seed_id) != 0},
                            {"is_seed", t.has_seed(st.seed_id)}});
    }
    return {200,
            {{"trend_id", trend_id},
             {"window_start", end - window},
             {"window_end", end},
             {"threshold", threshold},
             {"min_n", min_n},
             {"candidates", candidates},
             {"suggestions", accepted}}};
  });
}

ApiResponse Service::get_metrics() const {
  return guarded([&]() -> ApiResponse {
    const auto s = snapshot();
    nlohmann::json trends = nlohmann::json::object();
    std::size_t seed_total = 0;
    for (const auto& [id, t] : *s->trends) {
      seed_total += t.seeds.size();
      nlohmann::json pk = nullptr;
      if (!t.seeds.empty()) {
        try {
          const auto r = trend_precision_at_k(retrieve_trend(t, store_for(*s, t.modality), cfg_.k_per_seed),
                                              kDefaultKPerSeed, *s->ledger);
          pk = {{"k", kDefaultKPerSeed}, {"precision", r.precision}, {"effective_k", r.effective_k}};
        } catch (const Error& e) {
          if (e.code() != Errc::NoLabeledCandidates) throw;
        }
      }
      const auto w = s->ledger->trend_window(id, s->last_event_time, cfg_.feedback.window);
      trends[id] = {{"state", to_string(t.state)},
                    {"seed_count", t.seeds.size()},
                    {"needs_review", t.needs_review},
                    {"tiers", to_json(t.tiers)},
                    {"precision_at_k", pk},
                    {"window_precision", w.n ? nlohmann::json(static_cast<double>(w.r) / static_cast<double>(w.n))
                                             : nlohmann::json(nullptr)},
                    {"window_n", w.n}};
    }
    const auto count = [&](const std::string& name) {
      const auto it = s->counters.find(name);
      return it == s->counters.end() ? std::uint64_t{0} : it->second;
    };
    nlohmann::json latency;
    {
      std::lock_guard lock(latency_mutex_);
      auto v = latencies_;
      std::sort(v.begin(), v.end());
      const auto q = [&](double f) {
        return v.empty() ? 0.0 : v[std::min(v.size() - 1, static_cast<std::size_t>(f * static_cast<double>(v.size())))];
      };
      latency = {{"p50", q(0.50)}, {"p99", q(0.99)}, {"samples", v.size()}};
    }
    return {200,
            {{"trends", trends},
             {"action_counts",
              {{"flag_review", count("decisions_flag_review")},
               {"restrict", count("decisions_restrict")},
               {"escalate", count("decisions_escalate")}}},
             {"seed_count", seed_total},
             {"videos", s->videos->size()},
             {"counters", s->counters},
             {"feedback_cycles", s->history->at("feedback_cycles")},
             {"seed_removals", s->history->at("seed_removals")},
             {"threshold_changes", s->history->at("threshold_changes")},
             {"pauses", s->history->at("pauses")},
             {"last_seq", s->last_seq},
             {"latency_ms", latency}}};
  });
}

ApiResponse Service::get_health() const {
  const auto s = snapshot();
  nlohmann::json models = nlohmann::json::object();
  if (single_model_) models["single"] = to_string(single_model_->mode);
  if (multimodal_model_) models["multimodal"] = to_string(multimodal_model_->mode);
  return {200, {{"status", "ok"}, {"state_hash", ebr::state_hash(*s)}, {"last_seq", s->last_seq}, {"models", models}}};
}

void Service::record_latency(double millis) {
  constexpr std::size_t kRing = 4096;
  std::lock_guard lock(latency_mutex_);
  if (latencies_.size() < kRing) {
    latencies_.push_back(millis);
  } else {
    latencies_[latency_next_] = millis;
    latency_next_ = (latency_next_ + 1) % kRing;
  }
}

}  // namespace ebr

#include "ebr/trend.hpp"

#include <algorithm>

#include "ebr/errors.hpp"

namespace ebr {

const char* to_string(SeedProvenance p) {
  switch (p) {
    case SeedProvenance::Manual: return "manual";
    case SeedProvenance::Cluster: return "cluster";
    case SeedProvenance::Historical: return "historical";
  }
  return "manual";
}

SeedProvenance seed_provenance_from_string(const std::string& s) {
  if (s == "manual") return SeedProvenance::Manual;
  if (s == "cluster") return SeedProvenance::Cluster;
  if (s == "historical") return SeedProvenance::Historical;
  throw Error(Errc::InvalidArgument, "unknown seed provenance '" + s + "'");
}

const char* to_string(TrendState s) {
  switch (s) {
    case TrendState::Active: return "active";
    case TrendState::Paused: return "paused";
    case TrendState::Retired: return "retired";
  }
  return "active";
}

TrendState trend_state_from_string(const std::string& s) {
  if (s == "active") return TrendState::Active;
  if (s == "paused") return TrendState::Paused;
  if (s == "retired") return TrendState::Retired;
  throw Error(Errc::InvalidArgument, "unknown trend state '" + s + "'");
}

bool ActionTiers::valid() const {
  return flag_review >= -1.0 && escalate <= 1.0 && flag_review < restrict && restrict < escalate;
}

void ActionTiers::validate() const {
  if (!valid()) {
    throw Error(Errc::MalformedTiers, "tiers must satisfy -1 <= flag_review < restrict < escalate <= 1");
  }
}

namespace {

template <class Seeds>
auto seed_lower_bound(Seeds& seeds, const std::string& id) {
  return std::lower_bound(seeds.begin(), seeds.end(), id,
                          [](const SeedRecord& a, const std::string& b) { return a.item_id < b; });
}

}  // namespace

bool Trend::has_seed(const std::string& item_id) const {
  const auto it = seed_lower_bound(seeds, item_id);
  return it != seeds.end() && it->item_id == item_id;
}

std::vector<std::string> Trend::seed_ids() const {
  std::vector<std::string> out;
  out.reserve(seeds.size());
  for (const auto& s : seeds) out.push_back(s.item_id);
  return out;
}

bool Trend::add_seed(SeedRecord seed) {
  const auto it = seed_lower_bound(seeds, seed.item_id);
  if (it != seeds.end() && it->item_id == seed.item_id) return false;
  seeds.insert(it, std::move(seed));
  return true;
}

bool Trend::remove_seed(const std::string& item_id) {
  const auto it = std::find_if(seeds.begin(), seeds.end(),
                               [&](const SeedRecord& s) { return s.item_id == item_id; });
  if (it == seeds.end()) return false;
  seeds.erase(it);
  return true;
}

nlohmann::json to_json(const ActionTiers& t) {
  return {{"flag_review", t.flag_review}, {"restrict", t.restrict}, {"escalate", t.escalate}};
}

ActionTiers tiers_from_json(const nlohmann::json& j) {
  ActionTiers t;
  try {
    t.flag_review = j.at("flag_review").get<double>();
    t.restrict = j.at("restrict").get<double>();
    t.escalate = j.at("escalate").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedTiers, e.what());
  }
  t.validate();
  return t;
}

nlohmann::json to_json(const SeedRecord& s) {
  return {{"item_id", s.item_id},
          {"provenance", to_string(s.provenance)},
          {"annotator", s.annotator},
          {"added_at", s.added_at}};
}

SeedRecord seed_from_json(const nlohmann::json& j) {
  return {j.at("item_id").get<std::string>(), seed_provenance_from_string(j.value("provenance", "manual")),
          j.value("annotator", ""), j.value("added_at", std::int64_t{0})};
}

nlohmann::json to_json(const Trend& t) {
  auto seeds = nlohmann::json::array();
  for (const auto& s : t.seeds) seeds.push_back(to_json(s));
  return {{"id", t.id},
          {"name", t.name},
          {"modality", to_string(t.modality)},
          {"state", to_string(t.state)},
          {"seeds", seeds},
          {"tiers", to_json(t.tiers)},
          {"created_at", t.created_at},
          {"needs_review", t.needs_review},
          {"high_precision_streak", t.high_precision_streak}};
}

Trend trend_from_json(const nlohmann::json& j) {
  Trend t;
  t.id = j.at("id").get<std::string>();
  t.name = j.value("name", t.id);
  t.modality = modality_from_string(j.value("modality", "single"));
  t.state = trend_state_from_string(j.value("state", "active"));
  if (j.contains("tiers")) t.tiers = tiers_from_json(j.at("tiers"));
  t.created_at = j.value("created_at", std::int64_t{0});
  t.needs_review = j.value("needs_review", false);
  t.high_precision_streak = j.value("high_precision_streak", 0);
  for (const auto& s : j.value("seeds", nlohmann::json::array())) t.add_seed(seed_from_json(s));
  return t;
}

}  // namespace ebr

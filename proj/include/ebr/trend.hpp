#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ebr/trainer.hpp"

namespace ebr {

enum class SeedProvenance { Manual, Cluster, Historical };
enum class TrendState { Active, Paused, Retired };

const char* to_string(SeedProvenance p);
SeedProvenance seed_provenance_from_string(const std::string& s);
const char* to_string(TrendState s);
TrendState trend_state_from_string(const std::string& s);

struct SeedRecord {
  std::string item_id;
  SeedProvenance provenance = SeedProvenance::Manual;
  std::string annotator;
  std::int64_t added_at = 0;

  bool operator==(const SeedRecord&) const = default;
};

// Lower bounds of the three action tiers. Valid iff
// -1 <= flag_review < restrict < escalate <= 1.
struct ActionTiers {
  double flag_review = 0.70;
  double restrict = 0.80;
  double escalate = 0.90;

  bool valid() const;
  void validate() const;  // throws MalformedTiers
  double minimum() const { return flag_review; }
  bool operator==(const ActionTiers&) const = default;
};

struct Trend {
  std::string id;
  std::string name;
  Modality modality = Modality::Single;
  TrendState state = TrendState::Active;
  std::vector<SeedRecord> seeds;  // kept sorted by item_id
  ActionTiers tiers;
  std::int64_t created_at = 0;
  bool needs_review = false;
  // Consecutive feedback cycles whose precision sat above target + margin.
  int high_precision_streak = 0;

  bool has_seed(const std::string& item_id) const;
  std::vector<std::string> seed_ids() const;
  // Inserts keeping id order; returns false when already present.
  bool add_seed(SeedRecord seed);
  bool remove_seed(const std::string& item_id);

  bool operator==(const Trend&) const = default;
};

using TrendMap = std::map<std::string, Trend>;

nlohmann::json to_json(const SeedRecord& s);
SeedRecord seed_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ActionTiers& t);
ActionTiers tiers_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Trend& t);
Trend trend_from_json(const nlohmann::json& j);

}  // namespace ebr

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ebr/retrieval.hpp"
#include "ebr/seed_select.hpp"
#include "ebr/trend.hpp"

namespace ebr {

enum class Tier { None, FlagReview, Restrict, Escalate };

const char* to_string(Tier t);
Tier tier_from_string(const std::string& s);

struct ActionDecision {
  std::string video_id;
  std::string trend_id;
  double score = 0.0;
  Tier tier = Tier::None;
  std::string best_seed_id;
  std::int64_t decided_at = 0;

  bool operator==(const ActionDecision&) const = default;
};

enum class Verdict { TruePositive, FalsePositive };

const char* to_string(Verdict v);
Verdict verdict_from_string(const std::string& s);  // throws InvalidArgument

struct FeedbackLabel {
  std::string video_id;
  std::string trend_id;
  Verdict verdict = Verdict::TruePositive;
  std::string labeler;
  std::int64_t labeled_at = 0;

  bool operator==(const FeedbackLabel&) const = default;
};

nlohmann::json to_json(const ActionDecision& d);
ActionDecision decision_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FeedbackLabel& l);
FeedbackLabel label_from_json(const nlohmann::json& j);

// Highest tier whose lower bound is <= score. Throws MalformedTiers.
ActionDecision decide_action(const TrendScore& score, const ActionTiers& tiers);

inline constexpr std::int64_t kDefaultWindow = 24 * 3600;

struct WindowCounts {
  std::uint64_t n = 0;
  std::uint64_t r = 0;
};

// Decisions and labels keyed by (trend, video). Each decision attributes its
// label to the decision's best seed. Windows are closed intervals of label
// event time: [end - window, end].
class FeedbackLedger {
 public:
  struct Relabel {
    FeedbackLabel previous;
    FeedbackLabel replacement;
  };

  // Keeps the first decision per (trend, video); returns false for later ones.
  bool record_decision(const ActionDecision& d);
  const ActionDecision* decision(const std::string& trend_id, const std::string& video_id) const;
  const FeedbackLabel* label(const std::string& trend_id, const std::string& video_id) const;

  // Replaces any earlier verdict for the pair; the replacement is kept in the
  // relabel audit. Throws NoPriorDecision.
  void add_label(const FeedbackLabel& l);

  SeedStats seed_stats(const std::string& trend_id, const std::string& seed_id, std::int64_t window_end,
                       std::int64_t window = kDefaultWindow) const;
  // All labels of the trend in the window, whatever seed they attribute to.
  WindowCounts trend_window(const std::string& trend_id, std::int64_t window_end,
                            std::int64_t window = kDefaultWindow) const;

  std::size_t decision_count() const { return decisions_.size(); }
  std::size_t label_count() const { return labels_.size(); }
  const std::vector<Relabel>& relabels() const { return relabels_; }
  const std::map<std::pair<std::string, std::string>, ActionDecision>& decisions() const { return decisions_; }
  const std::map<std::pair<std::string, std::string>, FeedbackLabel>& labels() const { return labels_; }

 private:
  std::map<std::pair<std::string, std::string>, ActionDecision> decisions_;
  std::map<std::pair<std::string, std::string>, FeedbackLabel> labels_;
  std::vector<Relabel> relabels_;
};

// Records the label and returns the attributed seed's stats for the window
// ending at the label's time. Throws NoPriorDecision.
SeedStats ingest_label(const FeedbackLabel& label, FeedbackLedger& ledger, std::int64_t window = kDefaultWindow);

struct FeedbackConfig {
  std::int64_t window = kDefaultWindow;
  double prune_threshold = 0.5;
  std::uint64_t min_n = kDefaultMinN;
  double target_precision = 0.8;
  double step = 0.01;
  double lower_margin = 0.05;
  int lower_after_cycles = 2;
  double min_bound = 0.5;
  double max_bound = 0.99;

  void validate() const;  // throws InvalidConfig
};

struct SeedReport {
  std::string seed_id;
  std::uint64_t n = 0;
  std::uint64_t r = 0;
  std::optional<double> precision;  // absent when n = 0
};

struct FeedbackReport {
  std::string trend_id;
  std::int64_t event_time = 0;
  std::vector<SeedReport> seeds;          // stats before pruning
  std::vector<std::string> removed;
  bool paused = false;
  std::optional<double> trend_precision;  // windowed, all seeds
  ActionTiers tiers_before;
  ActionTiers tiers_after;
  int high_precision_streak = 0;
  std::vector<std::string> warnings;
};

nlohmann::json to_json(const FeedbackReport& r);
FeedbackReport feedback_report_from_json(const nlohmann::json& j);

// One feedback cycle at event_time: prune seeds with n >= min_n and
// p < prune_threshold (never the last one: the trend is paused and flagged
// instead), then step the tier bounds. Mutates the trend.
FeedbackReport run_feedback_cycle(Trend& trend, const FeedbackLedger& ledger, const FeedbackConfig& config,
                                  std::int64_t event_time);

struct PrecisionAtK {
  double precision = 0.0;
  std::size_t effective_k = 0;  // labeled items among the top k
};

// Labeled TP over labeled items among the first k of a ranked candidate list.
// Throws NoLabeledCandidates, InvalidArgument (k = 0).
PrecisionAtK trend_precision_at_k(const std::vector<TrendScore>& ranked, std::size_t k,
                                  const FeedbackLedger& ledger);

}  // namespace ebr

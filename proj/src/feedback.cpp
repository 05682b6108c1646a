#include "ebr/feedback.hpp"

#include <algorithm>

#include "ebr/errors.hpp"

namespace ebr {

const char* to_string(Tier t) {
  switch (t) {
    case Tier::None: return "none";
    case Tier::FlagReview: return "flag_review";
    case Tier::Restrict: return "restrict";
    case Tier::Escalate: return "escalate";
  }
  return "none";
}

Tier tier_from_string(const std::string& s) {
  if (s == "none") return Tier::None;
  if (s == "flag_review") return Tier::FlagReview;
  if (s == "restrict") return Tier::Restrict;
  if (s == "escalate") return Tier::Escalate;
  throw Error(Errc::InvalidArgument, "unknown tier '" + s + "'");
}

const char* to_string(Verdict v) { return v == Verdict::TruePositive ? "true_positive" : "false_positive"; }

Verdict verdict_from_string(const std::string& s) {
  if (s == "true_positive") return Verdict::TruePositive;
  if (s == "false_positive") return Verdict::FalsePositive;
  throw Error(Errc::InvalidArgument, "verdict must be true_positive or false_positive, got '" + s + "'");
}

nlohmann::json to_json(const ActionDecision& d) {
  return {{"video_id", d.video_id}, {"trend_id", d.trend_id},         {"score", d.score},
          {"tier", to_string(d.tier)}, {"best_seed_id", d.best_seed_id}, {"decided_at", d.decided_at}};
}

ActionDecision decision_from_json(const nlohmann::json& j) {
  return {j.at("video_id").get<std::string>(), j.at("trend_id").get<std::string>(), j.at("score").get<double>(),
          tier_from_string(j.at("tier").get<std::string>()),   j.at("best_seed_id").get<std::string>(),
          j.at("decided_at").get<std::int64_t>()};
}

nlohmann::json to_json(const FeedbackLabel& l) {
  return {{"video_id", l.video_id}, {"trend_id", l.trend_id}, {"verdict", to_string(l.verdict)},
          {"labeler", l.labeler},   {"labeled_at", l.labeled_at}};
}

FeedbackLabel label_from_json(const nlohmann::json& j) {
  return {j.at("video_id").get<std::string>(), j.at("trend_id").get<std::string>(),
          verdict_from_string(j.at("verdict").get<std::string>()), j.value("labeler", ""),
          j.at("labeled_at").get<std::int64_t>()};
}

ActionDecision decide_action(const TrendScore& score, const ActionTiers& tiers) {
  tiers.validate();
  Tier tier = Tier::None;
  if (score.score >= tiers.escalate) {
    tier = Tier::Escalate;
  } else if (score.score >= tiers.restrict) {
    tier = Tier::Restrict;
  } else if (score.score >= tiers.flag_review) {
    tier = Tier::FlagReview;
  }
  return {score.video_id, score.trend_id, score.score, tier, score.best_seed_id, score.computed_at};
}

bool FeedbackLedger::record_decision(const ActionDecision& d) {
  return decisions_.emplace(std::make_pair(d.trend_id, d.video_id), d).second;
}

const ActionDecision* FeedbackLedger::decision(const std::string& trend_id, const std::string& video_id) const {
  const auto it = decisions_.find({trend_id, video_id});
  return it == decisions_.end() ? nullptr : &it->second;
}

const FeedbackLabel* FeedbackLedger::label(const std::string& trend_id, const std::string& video_id) const {
  const auto it = labels_.find({trend_id, video_id});
  return it == labels_.end() ? nullptr : &it->second;
}

void FeedbackLedger::add_label(const FeedbackLabel& l) {
  const std::pair key{l.trend_id, l.video_id};
  if (!decisions_.count(key)) {
    throw Error(Errc::NoPriorDecision, "no decision for video " + l.video_id + " in trend " + l.trend_id);
  }
  const auto it = labels_.find(key);
  if (it != labels_.end()) {
    relabels_.push_back({it->second, l});
    it->second = l;
  } else {
    labels_.emplace(key, l);
  }
}

namespace {

bool in_window(std::int64_t t, std::int64_t end, std::int64_t window) { return t <= end && t >= end - window; }

}  // namespace

SeedStats FeedbackLedger::seed_stats(const std::string& trend_id, const std::string& seed_id,
                                     std::int64_t window_end, std::int64_t window) const {
  SeedStats s{seed_id, window_end - window, window_end, 0, 0};
  for (auto it = labels_.lower_bound({trend_id, std::string()}); it != labels_.end() && it->first.first == trend_id;
       ++it) {
    const auto& l = it->second;
    if (!in_window(l.labeled_at, window_end, window)) continue;
    if (decisions_.at(it->first).best_seed_id != seed_id) continue;
    ++s.n;
    if (l.verdict == Verdict::TruePositive) ++s.r;
  }
  return s;
}

WindowCounts FeedbackLedger::trend_window(const std::string& trend_id, std::int64_t window_end,
                                          std::int64_t window) const {
  WindowCounts c;
  for (auto it = labels_.lower_bound({trend_id, std::string()}); it != labels_.end() && it->first.first == trend_id;
       ++it) {
    if (!in_window(it->second.labeled_at, window_end, window)) continue;
    ++c.n;
    if (it->second.verdict == Verdict::TruePositive) ++c.r;
  }
  return c;
}

SeedStats ingest_label(const FeedbackLabel& label, FeedbackLedger& ledger, std::int64_t window) {
  ledger.add_label(label);
  const auto* d = ledger.decision(label.trend_id, label.video_id);
  return ledger.seed_stats(label.trend_id, d->best_seed_id, label.labeled_at, window);
}

void FeedbackConfig::validate() const {
  if (window < 0) throw Error(Errc::InvalidConfig, "window must be >= 0");
  if (!(step > 0.0)) throw Error(Errc::InvalidConfig, "step must be > 0");
  if (!(min_bound < max_bound)) throw Error(Errc::InvalidConfig, "min_bound must be < max_bound");
  if (lower_after_cycles < 1) throw Error(Errc::InvalidConfig, "lower_after_cycles must be >= 1");
}

nlohmann::json to_json(const FeedbackReport& r) {
  auto seeds = nlohmann::json::array();
  for (const auto& s : r.seeds) {
    nlohmann::json j{{"seed_id", s.seed_id}, {"n", s.n}, {"r", s.r}, {"p", nullptr}};
    if (s.precision) j["p"] = *s.precision;
    seeds.push_back(j);
  }
  nlohmann::json out{{"trend_id", r.trend_id},
                     {"event_time", r.event_time},
                     {"seeds", seeds},
                     {"removed", r.removed},
                     {"paused", r.paused},
                     {"trend_precision", nullptr},
                     {"tiers_before", to_json(r.tiers_before)},
                     {"tiers_after", to_json(r.tiers_after)},
                     {"high_precision_streak", r.high_precision_streak},
                     {"warnings", r.warnings}};
  if (r.trend_precision) out["trend_precision"] = *r.trend_precision;
  return out;
}

FeedbackReport feedback_report_from_json(const nlohmann::json& j) {
  FeedbackReport r;
  r.trend_id = j.at("trend_id").get<std::string>();
  r.event_time = j.at("event_time").get<std::int64_t>();
  for (const auto& s : j.at("seeds")) {
    SeedReport sr{s.at("seed_id").get<std::string>(), s.at("n").get<std::uint64_t>(), s.at("r").get<std::uint64_t>(),
                  std::nullopt};
    if (!s.at("p").is_null()) sr.precision = s.at("p").get<double>();
    r.seeds.push_back(std::move(sr));
  }
  r.removed = j.at("removed").get<std::vector<std::string>>();
  r.paused = j.at("paused").get<bool>();
  if (!j.at("trend_precision").is_null()) r.trend_precision = j.at("trend_precision").get<double>();
  r.tiers_before = tiers_from_json(j.at("tiers_before"));
  r.tiers_after = tiers_from_json(j.at("tiers_after"));
  r.high_precision_streak = j.at("high_precision_streak").get<int>();
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  return r;
}

namespace {

// Moves a bound by delta without carrying it across the clamp range edge it
// is heading towards; a bound already outside the range is not snapped in.
double step_bound(double value, double delta, double lo, double hi) {
  const double next = value + delta;
  if (delta > 0.0) return std::min(next, std::max(value, hi));
  return std::max(next, std::min(value, lo));
}

ActionTiers shift_tiers(const ActionTiers& t, double delta, const FeedbackConfig& c) {
  return {step_bound(t.flag_review, delta, c.min_bound, c.max_bound),
          step_bound(t.restrict, delta, c.min_bound, c.max_bound),
          step_bound(t.escalate, delta, c.min_bound, c.max_bound)};
}

}  // namespace

FeedbackReport run_feedback_cycle(Trend& trend, const FeedbackLedger& ledger, const FeedbackConfig& config,
                                  std::int64_t event_time) {
  config.validate();
  FeedbackReport report;
  report.trend_id = trend.id;
  report.event_time = event_time;
  report.tiers_before = trend.tiers;

  std::vector<std::pair<double, std::string>> failing;  // (p, seed)
  for (const auto& seed : trend.seeds) {
    const auto s = ledger.seed_stats(trend.id, seed.item_id, event_time, config.window);
    SeedReport sr{seed.item_id, s.n, s.r, std::nullopt};
    if (s.n > 0) sr.precision = historical_precision(s);
    if (s.n >= config.min_n && s.n > 0 && *sr.precision < config.prune_threshold) {
      failing.emplace_back(*sr.precision, seed.item_id);
    }
    report.seeds.push_back(std::move(sr));
  }
  if (!failing.empty() && failing.size() == trend.seeds.size()) {
    // Every seed fails: keep the best one (lowest id on ties), pause, ask for review.
    std::sort(failing.begin(), failing.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    report.warnings.push_back("all seeds below prune threshold; kept " + failing.front().second +
                              " and paused the trend for review");
    failing.erase(failing.begin());
    report.paused = true;
    trend.state = TrendState::Paused;
    trend.needs_review = true;
  }
  std::sort(failing.begin(), failing.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
  for (const auto& [p, id] : failing) {
    trend.remove_seed(id);
    report.removed.push_back(id);
  }

  const auto counts = ledger.trend_window(trend.id, event_time, config.window);
  if (counts.n == 0) {
    report.warnings.push_back("no labels in window; thresholds unchanged");
    trend.high_precision_streak = 0;
  } else {
    const double p = static_cast<double>(counts.r) / static_cast<double>(counts.n);
    report.trend_precision = p;
    ActionTiers next = trend.tiers;
    if (p < config.target_precision) {
      next = shift_tiers(trend.tiers, config.step, config);
      trend.high_precision_streak = 0;
    } else if (p > config.target_precision + config.lower_margin) {
      if (++trend.high_precision_streak >= config.lower_after_cycles) {
        next = shift_tiers(trend.tiers, -config.step, config);
        trend.high_precision_streak = 0;
      }
    } else {
      trend.high_precision_streak = 0;
    }
    if (next.valid()) {
      trend.tiers = next;
    } else {
      report.warnings.push_back("threshold step would break tier ordering; kept previous bounds");
    }
  }
  report.tiers_after = trend.tiers;
  report.high_precision_streak = trend.high_precision_streak;
  return report;
}

PrecisionAtK trend_precision_at_k(const std::vector<TrendScore>& ranked, std::size_t k,
                                  const FeedbackLedger& ledger) {
  if (k == 0) throw Error(Errc::InvalidArgument, "k must be >= 1");
  PrecisionAtK out;
  std::size_t tp = 0;
  const std::size_t limit = std::min(k, ranked.size());
  for (std::size_t i = 0; i < limit; ++i) {
    const auto* l = ledger.label(ranked[i].trend_id, ranked[i].video_id);
    if (!l) continue;
    ++out.effective_k;
    if (l->verdict == Verdict::TruePositive) ++tp;
  }
  if (out.effective_k == 0) throw Error(Errc::NoLabeledCandidates, "no labeled items in the top k");
  out.precision = static_cast<double>(tp) / static_cast<double>(out.effective_k);
  return out;
}

}  // namespace ebr

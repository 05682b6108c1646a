#pragma once

// Offline evaluation runners: the unseen-trend comparison of classifier and
// EBR scoring, the seed-fraction sweep, and the training-loss comparison.
// Per-trend metrics are macro-averaged over trends.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ebr/metrics.hpp"
#include "ebr/synth.hpp"
#include "ebr/trainer.hpp"

namespace ebr {

inline constexpr const char* kCodeVersion = "ebr-0.1.0";

// FNV-1a 64 over the compact JSON dump plus kCodeVersion, as 16 hex digits.
std::string config_fingerprint(const nlohmann::json& config);

struct MethodMetrics {
  std::string method;
  double p_at_k = 0.0;
  double pr_auc = 0.0;
  double roc_auc = 0.0;
  double f1 = 0.0;
  double f1_threshold = 0.0;  // mean over trends
  std::size_t n_trends = 0;
};

nlohmann::json to_json(const MethodMetrics& m);

struct EvalOptions {
  std::size_t k = 200;       // P@k cutoff
  bool score_seeds = false;  // keep seeds in the scored pool (they score 1.0)
  std::uint64_t seed = 1;    // seed-sampling RNG
};

// max(1, round(fraction * size)).
std::size_t seed_count(std::size_t trend_size, double fraction);

// Record indices of each trend's positives and of the negatives grouped with it.
struct TrendPool {
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
};
std::vector<TrendPool> trend_pools(const SynthDataset& data);

// A fixed random order of each trend's positives. Seeds at any fraction are a
// prefix, so larger fractions extend smaller ones.
std::vector<std::vector<std::size_t>> seed_orders(const std::vector<TrendPool>& pools, std::uint64_t seed);

struct Table1Models {
  Model classifier;
  Model single;
  Model multimodal;
};

// Methods in order: classifier, ebr_single, ebr_multimodal.
std::vector<MethodMetrics> run_table1_experiment(const SynthDataset& eval, const Table1Models& models,
                                                 double seed_fraction = 0.05, const EvalOptions& opts = {});

struct SweepPoint {
  double fraction = 0.0;
  double pr_auc = 0.0;
  double f1 = 0.0;
  double p_at_k = 0.0;
};

std::vector<double> default_sweep_fractions();

// EBR max-sim scoring with the given model at each seed fraction.
std::vector<SweepPoint> run_seed_sweep(const SynthDataset& eval, const Model& model,
                                       const std::vector<double>& fractions, const EvalOptions& opts = {});

// Trains the Single (SCL), NtXent and Classifier modes with one budget and
// seed, then for every class of `test` samples seed_fraction of its members
// as seeds and takes P@K over retrieve_trend output, K = min(k, unseeded
// members). Methods in order: scl, ntxent, classifier.
struct LossComparisonOptions {
  double seed_fraction = 0.05;
  std::size_t k = 200;
  std::size_t k_per_seed = 200;
  std::uint64_t seed = 1;
};
std::vector<MethodMetrics> run_loss_comparison(const std::vector<VideoRecord>& train_set,
                                               const std::vector<VideoRecord>& test_set,
                                               const TrainConfig& train_config, const ModelConfig& model_config,
                                               const LossComparisonOptions& opts = {});

// Repeated runs: repeat r offsets every data, training and sampling seed by r.

struct Table1Config {
  SynthConfig train_data;
  SynthConfig eval_data;
  TrainConfig ebr_train;
  TrainConfig classifier_train;
  ModelConfig model;
  double seed_fraction = 0.05;
  EvalOptions eval;
  std::size_t repeats = 5;
};

struct SweepConfig {
  SynthConfig train_data;
  SynthConfig eval_data;
  TrainConfig train;
  ModelConfig model;
  std::vector<double> fractions = default_sweep_fractions();
  EvalOptions eval;
  std::size_t repeats = 5;
};

struct LossConfig {
  SynthConfig data;  // one corpus, split by record into train / test
  double test_share = 0.5;
  TrainConfig train;
  ModelConfig model;
  LossComparisonOptions eval;
  std::size_t repeats = 5;
};

Table1Config default_table1_config();
SweepConfig default_sweep_config();
LossConfig default_loss_config();

nlohmann::json to_json(const Table1Config& c);
nlohmann::json to_json(const SweepConfig& c);
nlohmann::json to_json(const LossConfig& c);
// Fields missing from j keep the defaults above.
Table1Config table1_config_from_json(const nlohmann::json& j);
SweepConfig sweep_config_from_json(const nlohmann::json& j);
LossConfig loss_config_from_json(const nlohmann::json& j);

struct MethodsReport {
  std::string fingerprint;
  std::vector<std::vector<MethodMetrics>> runs;
  std::vector<MethodMetrics> median;  // per method and field, over runs
};

struct SweepReport {
  std::string fingerprint;
  std::vector<std::vector<SweepPoint>> runs;
  std::vector<SweepPoint> median;
};

MethodsReport run_table1_suite(const Table1Config& c);
SweepReport run_sweep_suite(const SweepConfig& c);
MethodsReport run_loss_suite(const LossConfig& c);

std::vector<MethodMetrics> median_metrics(const std::vector<std::vector<MethodMetrics>>& runs);
std::vector<SweepPoint> median_sweep(const std::vector<std::vector<SweepPoint>>& runs);

nlohmann::json report_json(const MethodsReport& r, const nlohmann::json& config, const std::string& experiment);
nlohmann::json report_json(const SweepReport& r, const nlohmann::json& config);
std::string metrics_csv(const MethodsReport& r);
std::string sweep_csv(const SweepReport& r);
// Static line plot of median PR-AUC and F1 against seed fraction.
std::string sweep_svg(const SweepReport& r);

}  // namespace ebr

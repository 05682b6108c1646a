#pragma once

// Synthetic trend corpus. Each trend owns a visual and a text latent direction
// (optionally split into sub-modes); a member's tokens are
//
//   token = signal * latent(t) + nuisance_scale * nuisance + spread * N(0, I)
//
// where latent(t) rotates by drift_rate radians per day of event time and the
// nuisance direction is drawn per record from a small pool shared by all
// classes. Negatives draw a fresh random latent per record; hard negatives copy
// a trend's visual latent but keep a random text latent.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ebr/dataset.hpp"

namespace ebr {

struct SynthConfig {
  std::size_t n_trends = 25;
  std::size_t min_size = 200;
  std::size_t max_size = 20000;
  double negatives_per_positive = 10.0;  // ratio 1:x
  std::size_t extra_negatives = 0;       // ungrouped negatives
  double hard_negative_fraction = 0.0;   // share of each trend's negatives
  std::size_t token_dim = 16;
  std::size_t n_visual = 4;
  std::size_t n_text = 4;
  double signal = 1.0;
  double spread = 0.35;  // sigma_c, per token component
  std::size_t modes_per_trend = 1;
  double mode_spread = 0.0;  // sub-mode offset from the trend latent, per component
  std::size_t n_nuisance = 0;
  double nuisance_scale = 0.0;
  double drift_rate = 0.0;  // radians per day
  std::int64_t time_span = 7 * 24 * 3600;
  std::uint64_t seed = 1;
  std::string id_prefix;
  std::int64_t label_offset = 0;

  void validate() const;  // throws InvalidConfig
};

nlohmann::json to_json(const SynthConfig& c);
SynthConfig synth_config_from_json(const nlohmann::json& j);

struct SynthDataset {
  SynthConfig config;
  std::vector<VideoRecord> records;
  std::vector<std::size_t> trend_sizes;     // positives per trend
  std::vector<std::size_t> negative_counts;  // negatives grouped with each trend
};

// Deterministic in config.seed.
SynthDataset gen_synthetic(const SynthConfig& config);

// With nuisance off, two member tokens of one mode have expected cosine about
// signal^2 / (signal^2 + token_dim * spread^2), and a member against a negative
// about 0. At or below this spread the intra-trend expectation is >= 0.5.
double max_separable_spread(const SynthConfig& c);

}  // namespace ebr

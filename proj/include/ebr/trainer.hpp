#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ebr/dataset.hpp"
#include "ebr/encoders.hpp"
#include "ebr/vector_core.hpp"

namespace ebr {

enum class TrainMode {
  Single,      // SCL on the single-modal encoder
  Multimodal,  // SCL on the cross-attention encoder
  NtXent,      // self-supervised: positive = view twin only (single-modal trunk)
  Classifier,  // softmax cross-entropy head on the single-modal trunk
};

enum class Modality { Single, Multimodal };

const char* to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& s);
const char* to_string(Modality m);
Modality modality_from_string(const std::string& s);

enum class OptimizerKind { Sgd, Adam };

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 64;  // N source samples, 2N views
  double learning_rate = 1e-3;
  double tau = 0.1;
  double noise_sigma = 0.05;
  double dropout_p = 0.1;
  std::uint64_t seed = 1;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;  // throws InvalidConfig
};

struct Model {
  TrainMode mode = TrainMode::Single;
  ModelConfig config;
  ParamSet params;
  // Classifier only: original label of each output class (kBenignLabel for benign).
  std::vector<std::int64_t> class_labels;

  Modality modality() const {
    return mode == TrainMode::Multimodal ? Modality::Multimodal : Modality::Single;
  }
  EmbeddingVector embed(const VideoRecord& record) const;
  // Classifier only: 1 - P(benign), or 1 - max-class prob when no benign class exists.
  double violating_probability(const VideoRecord& record) const;
};

// Fresh parameters for the mode; deterministic in seed.
Model init_model(TrainMode mode, const ModelConfig& cfg, std::uint64_t seed,
                 std::vector<std::int64_t> class_labels = {});

struct AugmentedPair {
  std::vector<double> first;
  std::vector<double> second;
};

// Two independent views: x + N(0, sigma^2) per component, then each component
// zeroed with probability dropout_p.
AugmentedPair augment(std::span<const double> features, double sigma, double dropout_p,
                      std::mt19937_64& rng);

struct TrainResult {
  Model model;
  std::vector<double> loss_history;  // mean batch loss per epoch
};

TrainResult train(std::span<const VideoRecord> dataset, const TrainConfig& config, TrainMode mode,
                  const ModelConfig& model_config = {});

// Encodes every record, in input order. Throws DuplicateId.
VectorStore embed_dataset(std::span<const VideoRecord> records, const Model& model);

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);  // all fields required
nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);  // missing fields keep defaults

// Model manifest: <dir>/manifest.json lists models; weights live in <dir>/<name>.ebrm.
void save_model(const std::filesystem::path& dir, const std::string& name, const Model& model);
std::map<std::string, Model> load_manifest(const std::filesystem::path& manifest_path);

}  // namespace ebr

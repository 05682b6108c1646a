#include "ebr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <set>

#include "ebr/errors.hpp"
#include "ebr/scl_loss.hpp"
#include "ebr/vector_io.hpp"

namespace ebr {

const char* to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::Single: return "single";
    case TrainMode::Multimodal: return "multimodal";
    case TrainMode::NtXent: return "ntxent";
    case TrainMode::Classifier: return "classifier";
  }
  return "single";
}

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "single") return TrainMode::Single;
  if (s == "multimodal") return TrainMode::Multimodal;
  if (s == "ntxent") return TrainMode::NtXent;
  if (s == "classifier") return TrainMode::Classifier;
  throw Error(Errc::InvalidConfig, "unknown train mode '" + s + "'");
}

const char* to_string(Modality m) { return m == Modality::Single ? "single" : "multimodal"; }

Modality modality_from_string(const std::string& s) {
  if (s == "single") return Modality::Single;
  if (s == "multimodal") return Modality::Multimodal;
  throw Error(Errc::InvalidArgument, "unknown modality '" + s + "'");
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw Error(Errc::InvalidConfig, "batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw Error(Errc::InvalidConfig, "learning_rate must be > 0");
  if (!(tau > 0.0)) throw Error(Errc::InvalidConfig, "tau must be > 0");
  if (noise_sigma < 0.0) throw Error(Errc::InvalidConfig, "noise_sigma must be >= 0");
  if (dropout_p < 0.0 || dropout_p >= 1.0) throw Error(Errc::InvalidConfig, "dropout_p must be in [0, 1)");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0 && adam_beta2 > 0.0 && adam_beta2 < 1.0 && adam_eps > 0.0)) {
    throw Error(Errc::InvalidConfig, "Adam hyper-parameters out of range");
  }
}

Model init_model(TrainMode mode, const ModelConfig& cfg, std::uint64_t seed,
                 std::vector<std::int64_t> class_labels) {
  std::mt19937_64 rng(seed);
  Model model;
  model.mode = mode;
  model.config = cfg;
  model.params = mode == TrainMode::Multimodal ? init_multimodal_params(cfg, rng)
                                               : init_single_params(cfg, rng);
  if (mode == TrainMode::Classifier) {
    if (class_labels.size() < 2) throw Error(Errc::InvalidConfig, "classifier needs >= 2 classes");
    add_classifier_head(model.params, cfg, class_labels.size(), rng);
    model.class_labels = std::move(class_labels);
  }
  return model;
}

EmbeddingVector Model::embed(const VideoRecord& record) const {
  if (mode == TrainMode::Multimodal) {
    return encode_multimodal(record.visual.to_mat(), record.text.to_mat(), params);
  }
  return encode_single(single_features(record.visual), params);
}

double Model::violating_probability(const VideoRecord& record) const {
  if (mode != TrainMode::Classifier) throw Error(Errc::InvalidArgument, "not a classifier model");
  const auto u = single_forward(params, single_features(record.visual), nullptr);
  const auto logits = head_forward(params, u);
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (const double l : logits) sum += std::exp(l - m);
  const auto benign = std::find(class_labels.begin(), class_labels.end(), kBenignLabel);
  if (benign != class_labels.end()) {
    const auto b = static_cast<std::size_t>(benign - class_labels.begin());
    return 1.0 - std::exp(logits[b] - m) / sum;
  }
  return 1.0 - 1.0 / sum;  // 1 - max-class probability
}

AugmentedPair augment(std::span<const double> features, double sigma, double dropout_p,
                      std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto view = [&]() {
    std::vector<double> out(features.begin(), features.end());
    for (auto& x : out) {
      if (sigma > 0.0) x += sigma * noise(rng);
      if (dropout_p > 0.0 && unif(rng) < dropout_p) x = 0.0;
    }
    return out;
  };
  AugmentedPair pair;
  pair.first = view();
  pair.second = view();
  return pair;
}

namespace {

class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, const ParamSet& params)
      : cfg_(cfg), m_(params.zeros_like()), v_(params.zeros_like()) {}

  void step(ParamSet& params, const ParamSet& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.adam_beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.adam_beta2, static_cast<double>(t_));
    auto& ps = params.tensors();
    const auto& gs = grads.tensors();
    for (std::size_t t = 0; t < ps.size(); ++t) {
      auto& w = ps[t].value.v;
      const auto& g = gs[t].value.v;
      if (cfg_.optimizer == OptimizerKind::Sgd) {
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= cfg_.learning_rate * g[i];
        continue;
      }
      auto& m = m_.tensors()[t].value.v;
      auto& v = v_.tensors()[t].value.v;
      for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = cfg_.adam_beta1 * m[i] + (1.0 - cfg_.adam_beta1) * g[i];
        v[i] = cfg_.adam_beta2 * v[i] + (1.0 - cfg_.adam_beta2) * g[i] * g[i];
        w[i] -= cfg_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.adam_eps);
      }
    }
  }

 private:
  const TrainConfig& cfg_;
  ParamSet m_, v_;
  std::size_t t_ = 0;
};

std::vector<double> flatten(const Tokens& t) { return {t.values.begin(), t.values.end()}; }

Mat as_mat(const std::vector<double>& flat, std::size_t rows, std::size_t cols) {
  Mat m(rows, cols);
  m.v = flat;
  return m;
}

std::vector<double> mean_rows(const std::vector<double>& flat, std::size_t rows, std::size_t cols) {
  std::vector<double> x(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) x[c] += flat[r * cols + c];
  }
  for (auto& v : x) v /= static_cast<double>(rows);
  return x;
}

struct ViewForward {
  std::vector<double> u;
  SingleCache single;
  MultimodalCache multi;
};

// Builds both views of one record and runs the encoder forward on each.
void forward_views(const Model& model, const VideoRecord& rec, const TrainConfig& cfg,
                   std::mt19937_64& rng, ViewForward& a, ViewForward& b) {
  const auto vis = augment(flatten(rec.visual), cfg.noise_sigma, cfg.dropout_p, rng);
  if (model.mode == TrainMode::Multimodal) {
    const auto txt = augment(flatten(rec.text), cfg.noise_sigma, cfg.dropout_p, rng);
    a.u = multimodal_forward(model.params, as_mat(vis.first, rec.visual.count, rec.visual.dim),
                             as_mat(txt.first, rec.text.count, rec.text.dim), &a.multi);
    b.u = multimodal_forward(model.params, as_mat(vis.second, rec.visual.count, rec.visual.dim),
                             as_mat(txt.second, rec.text.count, rec.text.dim), &b.multi);
    return;
  }
  a.u = single_forward(model.params, mean_rows(vis.first, rec.visual.count, rec.visual.dim), &a.single);
  b.u = single_forward(model.params, mean_rows(vis.second, rec.visual.count, rec.visual.dim), &b.single);
}

void backward_view(const Model& model, const ViewForward& f, std::span<const double> grad_u,
                   ParamSet& grads) {
  if (model.mode == TrainMode::Multimodal) {
    multimodal_backward(model.params, f.multi, grad_u, grads);
  } else {
    single_backward(model.params, f.single, grad_u, grads);
  }
}

double contrastive_batch(const Model& model, std::span<const VideoRecord> data,
                         std::span<const std::size_t> batch, const TrainConfig& cfg,
                         std::mt19937_64& rng, ParamSet& grads) {
  const std::size_t views = 2 * batch.size();
  std::vector<ViewForward> fwd(views);
  std::vector<std::int64_t> labels(views);
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const auto& rec = data[batch[s]];
    forward_views(model, rec, cfg, rng, fwd[2 * s], fwd[2 * s + 1]);
    std::int64_t label;
    if (model.mode == TrainMode::NtXent || rec.label < 0) {
      // Only the view twin is a positive; keep these clear of real class ids.
      label = -2 - static_cast<std::int64_t>(s);
    } else {
      label = rec.label;
    }
    labels[2 * s] = labels[2 * s + 1] = label;
  }
  Mat z(views, model.config.out_dim);
  for (std::size_t i = 0; i < views; ++i) {
    const auto zi = l2_normalize(fwd[i].u);
    std::copy(zi.begin(), zi.end(), z.row(i).begin());
  }
  auto lg = scl_loss_and_grad(z, labels, cfg.tau);
  const double scale = 1.0 / static_cast<double>(views);
  for (std::size_t i = 0; i < views; ++i) {
    auto gz = lg.grad.row(i);
    for (auto& g : gz) g *= scale;
    const auto gu = l2_normalize_backward(fwd[i].u, gz);
    backward_view(model, fwd[i], gu, grads);
  }
  return lg.loss * scale;
}

double classifier_batch(const Model& model, std::span<const VideoRecord> data,
                        std::span<const std::size_t> batch, const TrainConfig& cfg,
                        std::mt19937_64& rng, ParamSet& grads) {
  const double scale = 1.0 / static_cast<double>(2 * batch.size());
  double total = 0.0;
  std::vector<double> glogits(model.class_labels.size());
  for (const std::size_t idx : batch) {
    const auto& rec = data[idx];
    const auto target = static_cast<std::size_t>(
        std::find(model.class_labels.begin(), model.class_labels.end(), rec.label) -
        model.class_labels.begin());
    ViewForward a, b;
    forward_views(model, rec, cfg, rng, a, b);
    for (const ViewForward* f : {&a, &b}) {
      const auto logits = head_forward(model.params, f->u);
      total += softmax_cross_entropy(logits, target, glogits);
      for (auto& g : glogits) g *= scale;
      const auto gu = head_backward(model.params, f->u, glogits, grads);
      backward_view(model, *f, gu, grads);
    }
  }
  return total * scale;
}

}  // namespace

TrainResult train(std::span<const VideoRecord> dataset, const TrainConfig& config, TrainMode mode,
                  const ModelConfig& model_config) {
  config.validate();
  model_config.validate();
  std::vector<std::int64_t> classes;
  {
    std::set<std::int64_t> seen;
    for (const auto& r : dataset) seen.insert(r.label);
    classes.assign(seen.begin(), seen.end());
  }
  if (mode == TrainMode::Classifier && classes.size() < 2) {
    throw Error(Errc::InvalidConfig, "classifier needs >= 2 classes");
  }
  for (const auto& r : dataset) {
    if (r.visual.dim != model_config.token_dim ||
        (mode == TrainMode::Multimodal && r.text.dim != model_config.token_dim)) {
      throw Error(Errc::InvalidConfig, "record " + r.id + " token dim differs from model config");
    }
  }

  TrainResult result;
  result.model = init_model(mode, model_config, config.seed,
                            mode == TrainMode::Classifier ? classes : std::vector<std::int64_t>{});
  if (config.epochs == 0) return result;
  if (dataset.empty()) throw Error(Errc::InvalidConfig, "empty training set");

  Model& model = result.model;
  Optimizer opt(config, model.params);
  std::mt19937_64 rng(config.seed ^ 0x5DEECE66DULL);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, end - start);
      ParamSet grads = model.params.zeros_like();
      const double loss = mode == TrainMode::Classifier
                              ? classifier_batch(model, dataset, batch, config, rng, grads)
                              : contrastive_batch(model, dataset, batch, config, rng, grads);
      opt.step(model.params, grads);
      epoch_loss += loss;
      ++n_batches;
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(n_batches));
  }
  if (!model.params.all_finite()) throw Error(Errc::InvalidConfig, "training diverged (non-finite params)");
  return result;
}

VectorStore embed_dataset(std::span<const VideoRecord> records, const Model& model) {
  VectorStore store(model.config.out_dim);
  {
    std::set<std::string> ids;
    for (const auto& r : records) {
      if (!ids.insert(r.id).second) throw Error(Errc::DuplicateId, r.id);
    }
  }
  std::vector<EmbeddingVector> out(records.size());
  std::exception_ptr failure;
  const auto n = static_cast<std::int64_t>(records.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      out[i] = model.embed(records[i]);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  for (std::size_t i = 0; i < records.size(); ++i) store.insert(records[i].id, out[i]);
  return store;
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"token_dim", c.token_dim}, {"n_visual", c.n_visual}, {"n_text", c.n_text},
          {"hidden1", c.hidden1},     {"hidden2", c.hidden2},   {"model_dim", c.model_dim},
          {"head_dim", c.head_dim},   {"out_dim", c.out_dim}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
  c.token_dim = j.at("token_dim").get<std::size_t>();
  c.n_visual = j.at("n_visual").get<std::size_t>();
  c.n_text = j.at("n_text").get<std::size_t>();
  c.hidden1 = j.at("hidden1").get<std::size_t>();
  c.hidden2 = j.at("hidden2").get<std::size_t>();
  c.model_dim = j.at("model_dim").get<std::size_t>();
  c.head_dim = j.at("head_dim").get<std::size_t>();
  c.out_dim = j.at("out_dim").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}


nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"tau", c.tau},
          {"noise_sigma", c.noise_sigma},
          {"dropout_p", c.dropout_p},
          {"seed", c.seed},
          {"optimizer", c.optimizer == OptimizerKind::Adam ? "adam" : "sgd"},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.tau = j.value("tau", c.tau);
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.dropout_p = j.value("dropout_p", c.dropout_p);
    c.seed = j.value("seed", c.seed);
    const auto opt = j.value("optimizer", std::string("adam"));
    if (opt != "adam" && opt != "sgd") throw Error(Errc::InvalidConfig, "optimizer must be adam or sgd");
    c.optimizer = opt == "adam" ? OptimizerKind::Adam : OptimizerKind::Sgd;
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

void save_model(const std::filesystem::path& dir, const std::string& name, const Model& model) {
  std::filesystem::create_directories(dir);
  const auto manifest_path = dir / "manifest.json";
  nlohmann::json manifest = {{"format", "ebr-model-manifest"}, {"version", 1},
                             {"models", nlohmann::json::object()}};
  if (std::filesystem::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    manifest = nlohmann::json::parse(in);
  }
  std::vector<NamedMatrix> mats;
  auto tensors = nlohmann::json::array();
  for (const auto& t : model.params.tensors()) {
    NamedMatrix m{t.name, static_cast<std::uint32_t>(t.value.rows),
                  static_cast<std::uint32_t>(t.value.cols), {}};
    m.values.assign(t.value.v.begin(), t.value.v.end());
    mats.push_back(std::move(m));
    tensors.push_back({{"name", t.name}, {"rows", t.value.rows}, {"cols", t.value.cols}});
  }
  const std::string weights = name + ".ebrm";
  write_matrix_file(dir / weights, mats);
  manifest["models"][name] = {{"mode", to_string(model.mode)},
                              {"config", to_json(model.config)},
                              {"class_labels", model.class_labels},
                              {"weights", weights},
                              {"tensors", tensors}};
  std::ofstream out(manifest_path, std::ios::trunc);
  out << manifest.dump(2) << '\n';
  if (!out) throw Error(Errc::IoError, "cannot write " + manifest_path.string());
}

std::map<std::string, Model> load_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw Error(Errc::IoError, "cannot open manifest " + manifest_path.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("manifest parse error: ") + e.what());
  }
  if (manifest.value("format", "") != "ebr-model-manifest") {
    throw Error(Errc::InvalidConfig, "not an ebr model manifest");
  }
  std::map<std::string, Model> models;
  for (const auto& [name, entry] : manifest.at("models").items()) {
    const auto mode = train_mode_from_string(entry.at("mode").get<std::string>());
    const auto cfg = model_config_from_json(entry.at("config"));
    auto labels = entry.value("class_labels", std::vector<std::int64_t>{});
    Model model = init_model(mode, cfg, 0, labels);
    const auto mats = read_matrix_file(manifest_path.parent_path() / entry.at("weights").get<std::string>());
    for (auto& t : model.params.tensors()) {
      const auto it = std::find_if(mats.begin(), mats.end(),
                                   [&](const NamedMatrix& m) { return m.name == t.name; });
      if (it == mats.end() || it->rows != t.value.rows || it->cols != t.value.cols) {
        throw Error(Errc::CorruptFile, "model " + name + ": tensor " + t.name + " missing or misshaped");
      }
      t.value.v.assign(it->values.begin(), it->values.end());
    }
    models.emplace(name, std::move(model));
  }
  return models;
}

}  // namespace ebr

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "ebr/errors.hpp"
#include "ebr/trainer.hpp"
#include "oracles.hpp"

using namespace ebr;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.token_dim = 8;
  cfg.n_visual = 3;
  cfg.n_text = 2;
  cfg.hidden1 = 16;
  cfg.hidden2 = 16;
  cfg.model_dim = 8;
  cfg.head_dim = 8;
  cfg.out_dim = 8;
  return cfg;
}

// Three labeled clusters plus isotropic negatives.
std::vector<VideoRecord> toy_dataset(std::size_t per_class, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto cfg = small_config();
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::vector<double>> centers(3, std::vector<double>(cfg.token_dim));
  for (auto& c : centers) {
    for (auto& x : c) x = 2.0 * g(rng);
  }
  std::vector<VideoRecord> out;
  const auto tokens = [&](std::size_t count, const std::vector<double>* center) {
    Tokens t{count, cfg.token_dim, {}};
    for (std::size_t i = 0; i < count * cfg.token_dim; ++i) {
      const double base = center ? (*center)[i % cfg.token_dim] : 0.0;
      t.values.push_back(static_cast<float>(base + 0.5 * g(rng)));
    }
    return t;
  };
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      VideoRecord r;
      r.id = "c" + std::to_string(c) + "_" + std::to_string(i);
      r.label = static_cast<std::int64_t>(c);
      r.visual = tokens(cfg.n_visual, &centers[c]);
      r.text = tokens(cfg.n_text, &centers[c]);
      out.push_back(std::move(r));
    }
  }
  for (std::size_t i = 0; i < per_class; ++i) {
    VideoRecord r;
    r.id = "neg" + std::to_string(i);
    r.visual = tokens(cfg.n_visual, nullptr);
    r.text = tokens(cfg.n_text, nullptr);
    out.push_back(std::move(r));
  }
  return out;
}

TrainConfig quick(std::size_t epochs) {
  TrainConfig tc;
  tc.epochs = epochs;
  tc.batch_size = 16;
  tc.learning_rate = 3e-3;
  tc.seed = 9;
  return tc;
}

}  // namespace

TEST_CASE("zero epochs returns the initial parameters") {
  const auto data = toy_dataset(10, 1);
  const auto r = train(data, quick(0), TrainMode::Single, small_config());
  CHECK(r.loss_history.empty());
  CHECK(r.model.params == init_model(TrainMode::Single, small_config(), 9).params);
}

TEST_CASE("training is deterministic for a seed") {
  const auto data = toy_dataset(10, 2);
  for (const auto mode : {TrainMode::Single, TrainMode::Multimodal, TrainMode::NtXent, TrainMode::Classifier}) {
    const auto a = train(data, quick(2), mode, small_config());
    const auto b = train(data, quick(2), mode, small_config());
    CHECK(a.model.params == b.model.params);
    CHECK(a.loss_history == b.loss_history);
  }
}

TEST_CASE("loss decreases and same-class embeddings cluster") {
  const auto data = toy_dataset(24, 3);
  for (const auto mode : {TrainMode::Single, TrainMode::Multimodal}) {
    const auto r = train(data, quick(15), mode, small_config());
    REQUIRE(r.loss_history.size() == 15);
    CHECK(r.loss_history.back() < r.loss_history.front());
    const auto store = embed_dataset(data, r.model);
    double same = 0.0, diff = 0.0;
    std::size_t ns = 0, nd = 0;
    for (std::size_t i = 0; i < 72; i += 3) {
      for (std::size_t j = i + 1; j < 72; j += 5) {
        const double c = cosine(store.vector(data[i].id), store.vector(data[j].id));
        if (data[i].label == data[j].label) {
          same += c;
          ++ns;
        } else {
          diff += c;
          ++nd;
        }
      }
    }
    CHECK(same / ns > diff / nd + 0.2);
  }
}

TEST_CASE("classifier scores violating items above benign ones") {
  const auto data = toy_dataset(24, 4);
  const auto r = train(data, quick(15), TrainMode::Classifier, small_config());
  double pos = 0.0, neg = 0.0;
  for (const auto& rec : data) (rec.label >= 0 ? pos : neg) += r.model.violating_probability(rec);
  CHECK(pos / 72.0 > neg / 24.0);
  const auto emb = init_model(TrainMode::Single, small_config(), 1);
  CHECK_THROWS_AS(emb.violating_probability(data[0]), Error);
}

TEST_CASE("augment statistics") {
  std::mt19937_64 rng(5);
  const std::vector<double> x{1.0, -2.0, 0.5};
  const double sigma = 0.2, p = 0.25;
  const int trials = 40000;
  std::vector<double> sum(3, 0.0);
  int zeros = 0;
  for (int t = 0; t < trials; ++t) {
    const auto pair = augment(x, sigma, p, rng);
    for (std::size_t d = 0; d < 3; ++d) {
      sum[d] += pair.first[d];
      zeros += pair.first[d] == 0.0;
    }
  }
  CHECK(static_cast<double>(zeros) / (3.0 * trials) == doctest::Approx(p).epsilon(0.03));
  for (std::size_t d = 0; d < 3; ++d) CHECK(sum[d] / trials == doctest::Approx((1.0 - p) * x[d]).epsilon(0.03));
  const auto same = augment(x, 0.0, 0.0, rng);
  CHECK(same.first == x);
  CHECK(same.second == x);
}

TEST_CASE("embed_dataset keeps input order and rejects duplicate ids") {
  auto data = toy_dataset(5, 6);
  const auto model = init_model(TrainMode::Multimodal, small_config(), 1);
  const auto store = embed_dataset(data, model);
  REQUIRE(store.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(store.id_at(i) == data[i].id);
    CHECK(store.vector(data[i].id) == model.embed(data[i]));
  }
  data.push_back(data.front());
  CHECK_THROWS_AS(embed_dataset(data, model), Error);
}

TEST_CASE("manifest round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "ebr_test_manifest";
  std::filesystem::remove_all(dir);
  const auto data = toy_dataset(6, 7);
  const auto single = train(data, quick(1), TrainMode::Single, small_config()).model;
  const auto clf = train(data, quick(1), TrainMode::Classifier, small_config()).model;
  save_model(dir, "single", single);
  save_model(dir, "clf", clf);
  const auto models = load_manifest(dir / "manifest.json");
  REQUIRE(models.size() == 2);
  const auto& back = models.at("single");
  CHECK(back.mode == TrainMode::Single);
  CHECK(back.config.out_dim == 8);
  REQUIRE(back.params.tensors().size() == single.params.tensors().size());
  for (std::size_t t = 0; t < back.params.tensors().size(); ++t) {
    const auto& a = single.params.tensors()[t].value.v;
    const auto& b = back.params.tensors()[t].value.v;
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == static_cast<double>(static_cast<float>(a[i])));
  }
  CHECK(models.at("clf").class_labels == std::vector<std::int64_t>{-1, 0, 1, 2});
  CHECK(cosine(back.embed(data[0]), single.embed(data[0])) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("config validation") {
  auto tc = quick(1);
  tc.tau = 0.0;
  CHECK_THROWS_AS(train(toy_dataset(2, 8), tc, TrainMode::Single, small_config()), Error);
  CHECK_THROWS_AS(train_mode_from_string("moco"), Error);
  const auto all = toy_dataset(2, 8);
  const std::vector<VideoRecord> one_class(all.begin(), all.begin() + 2);
  CHECK_THROWS_AS(train(one_class, quick(1), TrainMode::Classifier, small_config()), Error);
}

#include <doctest.h>

#include <set>

#include "ebr/errors.hpp"
#include "ebr/experiments.hpp"

using namespace ebr;

namespace {

ModelConfig tiny_model() {
  ModelConfig m;
  m.token_dim = 8;
  m.n_visual = 2;
  m.n_text = 2;
  m.hidden1 = 16;
  m.hidden2 = 16;
  m.model_dim = 8;
  m.head_dim = 4;
  m.out_dim = 16;
  return m;
}

SynthConfig tiny_data(std::uint64_t seed, std::int64_t offset = 0) {
  SynthConfig c;
  c.n_trends = 3;
  c.min_size = 20;
  c.max_size = 40;
  c.negatives_per_positive = 2.0;
  c.token_dim = 8;
  c.n_visual = 2;
  c.n_text = 2;
  c.seed = seed;
  c.label_offset = offset;
  return c;
}

TrainConfig quick_train() {
  TrainConfig t;
  t.epochs = 2;
  t.batch_size = 16;
  return t;
}

Table1Models tiny_models(const SynthDataset& train_data) {
  Table1Models m;
  m.classifier = train(train_data.records, quick_train(), TrainMode::Classifier, tiny_model()).model;
  m.single = train(train_data.records, quick_train(), TrainMode::Single, tiny_model()).model;
  m.multimodal = train(train_data.records, quick_train(), TrainMode::Multimodal, tiny_model()).model;
  return m;
}

}  // namespace

TEST_CASE("seed_count rounds and keeps at least one seed") {
  CHECK(seed_count(200, 0.05) == 10);
  CHECK(seed_count(10, 0.01) == 1);
  CHECK(seed_count(30, 0.05) == 2);  // 1.5 rounds away from zero
  CHECK(seed_count(7, 1.0) == 7);
  CHECK_THROWS_AS(seed_count(10, 0.0), Error);
  CHECK_THROWS_AS(seed_count(10, 1.5), Error);
}

TEST_CASE("pools and nested seed orders") {
  const auto data = gen_synthetic(tiny_data(4, 50));
  const auto pools = trend_pools(data);
  REQUIRE(pools.size() == 3);
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(pools[t].positives.size() == data.trend_sizes[t]);
    CHECK(pools[t].negatives.size() == data.negative_counts[t]);
    for (const auto i : pools[t].positives) CHECK(data.records[i].label == 50 + static_cast<std::int64_t>(t));
  }
  const auto a = seed_orders(pools, 9);
  const auto b = seed_orders(pools, 9);
  CHECK(a == b);
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(std::multiset<std::size_t>(a[t].begin(), a[t].end()) ==
          std::multiset<std::size_t>(pools[t].positives.begin(), pools[t].positives.end()));
  }
  CHECK_FALSE(seed_orders(pools, 10) == a);
}

TEST_CASE("table1 experiment is deterministic and seeds score 1.0 when kept") {
  const auto train_data = gen_synthetic(tiny_data(1));
  const auto eval = gen_synthetic(tiny_data(2, 100));
  const auto models = tiny_models(train_data);
  const auto first = run_table1_experiment(eval, models, 0.1);
  const auto second = run_table1_experiment(eval, models, 0.1);
  REQUIRE(first.size() == 3);
  CHECK(first[0].method == "classifier");
  CHECK(first[1].method == "ebr_single");
  CHECK(first[2].method == "ebr_multimodal");
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(first[i].pr_auc == second[i].pr_auc);
    CHECK(first[i].roc_auc == second[i].roc_auc);
    CHECK(first[i].n_trends == 3);
  }

  // Every positive a seed: only the seeds' own duplicates are positives, at 1.0.
  EvalOptions keep;
  keep.score_seeds = true;
  const auto all = run_table1_experiment(eval, models, 1.0, keep);
  CHECK(all[1].pr_auc == doctest::Approx(1.0));
  CHECK(all[2].roc_auc == doctest::Approx(1.0));
  CHECK(all[2].f1_threshold == doctest::Approx(1.0));

  Table1Models wrong = models;
  wrong.classifier = models.single;
  CHECK_THROWS_AS(run_table1_experiment(eval, wrong, 0.1), Error);
}

TEST_CASE("seed sweep reports every fraction and reaches the upper envelope") {
  const auto train_data = gen_synthetic(tiny_data(1));
  const auto eval = gen_synthetic(tiny_data(2, 100));
  const auto model = train(train_data.records, quick_train(), TrainMode::Multimodal, tiny_model()).model;
  EvalOptions keep;
  keep.score_seeds = true;
  const auto pts = run_seed_sweep(eval, model, {0.05, 0.2, 1.0}, keep);
  REQUIRE(pts.size() == 3);
  CHECK(pts[0].fraction == 0.05);
  CHECK(pts[2].pr_auc == doctest::Approx(1.0));
  for (const auto& p : pts) CHECK(p.pr_auc <= pts[2].pr_auc + 1e-12);
}

TEST_CASE("loss comparison on a single class retrieves only relevant items") {
  auto c = tiny_data(6);
  c.n_trends = 1;
  c.min_size = c.max_size = 120;
  c.negatives_per_positive = 0.0;
  const auto data = gen_synthetic(c).records;
  const std::vector<VideoRecord> train_set(data.begin(), data.begin() + 60);
  const std::vector<VideoRecord> test_set(data.begin() + 60, data.end());
  LossComparisonOptions opts;
  opts.k = 20;
  opts.k_per_seed = 20;
  const auto rows = run_loss_comparison(train_set, test_set, quick_train(), tiny_model(), opts);
  REQUIRE(rows.size() == 2);  // no classifier without a second class
  CHECK(rows[0].method == "scl");
  CHECK(rows[1].method == "ntxent");
  for (const auto& r : rows) CHECK(r.p_at_k == 1.0);
}

TEST_CASE("loss comparison is reproducible") {
  auto c = tiny_data(8);
  c.negatives_per_positive = 0.0;
  const auto data = gen_synthetic(c).records;
  std::vector<VideoRecord> train_set, test_set;
  for (std::size_t i = 0; i < data.size(); ++i) (i % 2 ? test_set : train_set).push_back(data[i]);
  LossComparisonOptions opts;
  opts.k = 10;
  const auto a = run_loss_comparison(train_set, test_set, quick_train(), tiny_model(), opts);
  const auto b = run_loss_comparison(train_set, test_set, quick_train(), tiny_model(), opts);
  REQUIRE(a.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(a[i].p_at_k == b[i].p_at_k);
}

TEST_CASE("medians take the middle run per field") {
  const auto row = [](double v) {
    MethodMetrics m;
    m.method = "x";
    m.pr_auc = v;
    m.roc_auc = 1.0 - v;
    return std::vector<MethodMetrics>{m};
  };
  const auto med = median_metrics({row(0.3), row(0.9), row(0.1), row(0.5), row(0.2)});
  CHECK(med[0].pr_auc == 0.3);
  CHECK(med[0].roc_auc == doctest::Approx(0.7));
  CHECK(median_metrics({row(0.2), row(0.4)})[0].pr_auc == doctest::Approx(0.3));

  const auto pts = median_sweep({{{0.1, 0.5, 0.4, 0.3}}, {{0.1, 0.7, 0.2, 0.1}}, {{0.1, 0.6, 0.3, 0.2}}});
  CHECK(pts[0].pr_auc == 0.6);
  CHECK(pts[0].f1 == 0.3);
}

TEST_CASE("fingerprints, config round trips and report files") {
  const auto t1 = default_table1_config();
  CHECK(config_fingerprint(to_json(t1)) == config_fingerprint(to_json(t1)));
  CHECK(config_fingerprint(to_json(t1)).size() == 16);
  auto changed = t1;
  changed.seed_fraction = 0.1;
  CHECK(config_fingerprint(to_json(changed)) != config_fingerprint(to_json(t1)));

  CHECK(to_json(table1_config_from_json(to_json(t1))) == to_json(t1));
  CHECK(to_json(sweep_config_from_json(nlohmann::json::object())) == to_json(default_sweep_config()));
  CHECK(to_json(loss_config_from_json(to_json(default_loss_config()))) == to_json(default_loss_config()));
  const auto partial = table1_config_from_json({{"repeats", 2}, {"eval_data", {{"n_trends", 4}}}});
  CHECK(partial.repeats == 2);
  CHECK(partial.eval_data.n_trends == 4);
  CHECK(partial.eval_data.min_size == t1.eval_data.min_size);
  CHECK_THROWS_AS(table1_config_from_json({{"repeats", "five"}}), Error);
  CHECK_THROWS_AS(loss_config_from_json({{"test_share", 1.0}}), Error);

  SweepReport sr;
  sr.fingerprint = "abc";
  sr.runs = {{{0.01, 0.5, 0.4, 0.9}, {0.1, 0.8, 0.7, 0.95}}};
  sr.median = sr.runs[0];
  const auto svg = sweep_svg(sr);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("polyline") != std::string::npos);
  const auto csv = sweep_csv(sr);
  CHECK(csv.find("median,0.1,0.8,0.7,0.95") != std::string::npos);
  const auto j = report_json(sr, nlohmann::json::object());
  CHECK(j.at("code_version") == kCodeVersion);
  CHECK(j.at("averaging") == "macro over trends");
}

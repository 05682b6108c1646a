#include "ebr/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "ebr/errors.hpp"
#include "ebr/retrieval.hpp"
#include "ebr/trend.hpp"

namespace ebr {

std::string config_fingerprint(const nlohmann::json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto feed = [&](const std::string& s) {
    for (const unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  feed(config.dump());
  feed(kCodeVersion);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json to_json(const MethodMetrics& m) {
  return {{"method", m.method}, {"p_at_k", m.p_at_k},   {"pr_auc", m.pr_auc},         {"roc_auc", m.roc_auc},
          {"f1", m.f1},         {"f1_threshold", m.f1_threshold}, {"n_trends", m.n_trends}};
}

std::size_t seed_count(std::size_t trend_size, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw Error(Errc::InvalidArgument, "seed fraction must be in (0, 1]");
  const auto m = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(trend_size)));
  return std::clamp<std::size_t>(m, 1, std::max<std::size_t>(trend_size, 1));
}

std::vector<TrendPool> trend_pools(const SynthDataset& data) {
  std::vector<TrendPool> pools(data.trend_sizes.size());
  const auto offset = data.config.label_offset;
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const auto& r = data.records[i];
    if (r.label >= 0) {
      pools.at(static_cast<std::size_t>(r.label - offset)).positives.push_back(i);
    } else if (r.group >= 0) {
      pools.at(static_cast<std::size_t>(r.group)).negatives.push_back(i);
    }
  }
  return pools;
}

std::vector<std::vector<std::size_t>> seed_orders(const std::vector<TrendPool>& pools, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t t = 0; t < pools.size(); ++t) {
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + t);
    auto order = pools[t].positives;
    std::shuffle(order.begin(), order.end(), rng);
    out.push_back(std::move(order));
  }
  return out;
}

namespace {

struct TrendMetrics {
  double p_at_k, pr_auc, roc_auc, f1, threshold;
};

TrendMetrics score_metrics(const LabeledScores& s, std::size_t k) {
  const auto f1 = best_f1(s);
  return {precision_at_k(s, k), pr_auc(s), roc_auc(s), f1.f1, f1.threshold};
}

MethodMetrics macro_average(const std::string& method, const std::vector<TrendMetrics>& per_trend) {
  MethodMetrics m;
  m.method = method;
  m.n_trends = per_trend.size();
  for (const auto& t : per_trend) {
    m.p_at_k += t.p_at_k;
    m.pr_auc += t.pr_auc;
    m.roc_auc += t.roc_auc;
    m.f1 += t.f1;
    m.f1_threshold += t.threshold;
  }
  const double n = static_cast<double>(std::max<std::size_t>(per_trend.size(), 1));
  m.p_at_k /= n;
  m.pr_auc /= n;
  m.roc_auc /= n;
  m.f1 /= n;
  m.f1_threshold /= n;
  return m;
}

Trend seeded_trend(const std::string& id, const SynthDataset& data, std::span<const std::size_t> seeds) {
  Trend t;
  t.id = id;
  for (const auto i : seeds) t.add_seed(SeedRecord{data.records[i].id, SeedProvenance::Manual, "eval", 0});
  return t;
}

// The indices scored for one trend: unseeded (or all) positives plus its negatives.
std::vector<std::size_t> pool_items(const TrendPool& pool, std::span<const std::size_t> order, std::size_t m,
                                    bool score_seeds) {
  std::vector<std::size_t> items(order.begin() + static_cast<std::ptrdiff_t>(score_seeds ? 0 : m), order.end());
  items.insert(items.end(), pool.negatives.begin(), pool.negatives.end());
  return items;
}

LabeledScores ebr_scores(const SynthDataset& data, const VectorStore& store, const Trend& trend,
                         std::span<const std::size_t> items) {
  LabeledScores s;
  s.reserve(items.size());
  for (const auto i : items) {
    const auto& r = data.records[i];
    s.push_back({score_video(r.id, store.vector(r.id), trend, store).score, r.label >= 0});
  }
  return s;
}

}  // namespace

std::vector<MethodMetrics> run_table1_experiment(const SynthDataset& eval, const Table1Models& models,
                                                 double seed_fraction, const EvalOptions& opts) {
  if (models.classifier.mode != TrainMode::Classifier) throw Error(Errc::InvalidArgument, "classifier model expected");
  const auto pools = trend_pools(eval);
  const auto orders = seed_orders(pools, opts.seed);
  const VectorStore single = embed_dataset(eval.records, models.single);
  const VectorStore multi = embed_dataset(eval.records, models.multimodal);

  std::vector<double> probability(eval.records.size());
  const auto n = static_cast<std::int64_t>(eval.records.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) probability[i] = models.classifier.violating_probability(eval.records[i]);

  std::vector<TrendMetrics> cls, sng, mm;
  for (std::size_t t = 0; t < pools.size(); ++t) {
    if (pools[t].positives.empty() || pools[t].negatives.empty()) continue;
    const std::size_t m = seed_count(pools[t].positives.size(), seed_fraction);
    const std::span<const std::size_t> seeds(orders[t].data(), m);
    const auto items = pool_items(pools[t], orders[t], m, opts.score_seeds);
    if (items.size() <= pools[t].negatives.size()) continue;  // every positive is a seed
    const Trend trend = seeded_trend("t" + std::to_string(t), eval, seeds);

    LabeledScores c;
    for (const auto i : items) c.push_back({probability[i], eval.records[i].label >= 0});
    cls.push_back(score_metrics(c, opts.k));
    sng.push_back(score_metrics(ebr_scores(eval, single, trend, items), opts.k));
    mm.push_back(score_metrics(ebr_scores(eval, multi, trend, items), opts.k));
  }
  return {macro_average("classifier", cls), macro_average("ebr_single", sng), macro_average("ebr_multimodal", mm)};
}

std::vector<double> default_sweep_fractions() { return {0.01, 0.02, 0.05, 0.10, 0.15, 0.20}; }

std::vector<SweepPoint> run_seed_sweep(const SynthDataset& eval, const Model& model,
                                       const std::vector<double>& fractions, const EvalOptions& opts) {
  const auto pools = trend_pools(eval);
  const auto orders = seed_orders(pools, opts.seed);
  const VectorStore store = embed_dataset(eval.records, model);
  std::vector<SweepPoint> out;
  for (const double f : fractions) {
    std::vector<TrendMetrics> per_trend;
    for (std::size_t t = 0; t < pools.size(); ++t) {
      if (pools[t].positives.empty() || pools[t].negatives.empty()) continue;
      const std::size_t m = seed_count(pools[t].positives.size(), f);
      const auto items = pool_items(pools[t], orders[t], m, opts.score_seeds);
      if (items.size() <= pools[t].negatives.size()) continue;
      const Trend trend = seeded_trend("t" + std::to_string(t), eval, {orders[t].data(), m});
      per_trend.push_back(score_metrics(ebr_scores(eval, store, trend, items), opts.k));
    }
    const auto avg = macro_average("ebr", per_trend);
    out.push_back({f, avg.pr_auc, avg.f1, avg.p_at_k});
  }
  return out;
}

namespace {

double retrieval_precision(const std::vector<VideoRecord>& test, const VectorStore& store,
                           const LossComparisonOptions& opts, std::size_t* n_classes) {
  std::map<std::int64_t, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (test[i].label >= 0) by_label[test[i].label].push_back(i);
  }
  std::vector<double> per_class;
  for (auto& [label, members] : by_label) {
    std::mt19937_64 rng(opts.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(label));
    std::shuffle(members.begin(), members.end(), rng);
    const std::size_t m = seed_count(members.size(), opts.seed_fraction);
    if (m >= members.size()) continue;
    Trend trend;
    trend.id = "class" + std::to_string(label);
    for (std::size_t s = 0; s < m; ++s) {
      trend.add_seed(SeedRecord{test[members[s]].id, SeedProvenance::Manual, "eval", 0});
    }
    const std::size_t k = std::min(opts.k, members.size() - m);
    const auto hits = retrieve_trend(trend, store, opts.k_per_seed);
    std::set<std::string> relevant;
    for (std::size_t s = m; s < members.size(); ++s) relevant.insert(test[members[s]].id);
    std::size_t good = 0;
    for (std::size_t i = 0; i < std::min(k, hits.size()); ++i) good += relevant.count(hits[i].video_id);
    per_class.push_back(static_cast<double>(good) / static_cast<double>(k));
  }
  *n_classes = per_class.size();
  if (per_class.empty()) throw Error(Errc::EmptyInput, "no class with unseeded members in the test set");
  return std::accumulate(per_class.begin(), per_class.end(), 0.0) / static_cast<double>(per_class.size());
}

}  // namespace

std::vector<MethodMetrics> run_loss_comparison(const std::vector<VideoRecord>& train_set,
                                               const std::vector<VideoRecord>& test_set,
                                               const TrainConfig& train_config, const ModelConfig& model_config,
                                               const LossComparisonOptions& opts) {
  std::vector<MethodMetrics> out;
  const std::pair<const char*, TrainMode> methods[] = {
      {"scl", TrainMode::Single}, {"ntxent", TrainMode::NtXent}, {"classifier", TrainMode::Classifier}};
  std::set<std::int64_t> labels;
  for (const auto& r : train_set) labels.insert(r.label);
  for (const auto& [name, mode] : methods) {
    if (mode == TrainMode::Classifier && labels.size() < 2) continue;  // nothing to classify
    const auto trained = train(train_set, train_config, mode, model_config);
    const VectorStore store = embed_dataset(test_set, trained.model);
    MethodMetrics m;
    m.method = name;
    m.p_at_k = retrieval_precision(test_set, store, opts, &m.n_trends);
    out.push_back(m);
  }
  return out;
}

namespace {

SynthConfig shifted(SynthConfig c, std::size_t r) {
  c.seed += r;
  return c;
}

TrainConfig shifted(TrainConfig c, std::size_t r) {
  c.seed += r;
  return c;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<MethodMetrics> median_metrics(const std::vector<std::vector<MethodMetrics>>& runs) {
  std::vector<MethodMetrics> out;
  if (runs.empty()) return out;
  for (std::size_t i = 0; i < runs.front().size(); ++i) {
    const auto field = [&](double MethodMetrics::*f) {
      std::vector<double> v;
      for (const auto& run : runs) v.push_back(run.at(i).*f);
      return median_of(v);
    };
    MethodMetrics m = runs.front()[i];
    m.p_at_k = field(&MethodMetrics::p_at_k);
    m.pr_auc = field(&MethodMetrics::pr_auc);
    m.roc_auc = field(&MethodMetrics::roc_auc);
    m.f1 = field(&MethodMetrics::f1);
    m.f1_threshold = field(&MethodMetrics::f1_threshold);
    out.push_back(m);
  }
  return out;
}

std::vector<SweepPoint> median_sweep(const std::vector<std::vector<SweepPoint>>& runs) {
  std::vector<SweepPoint> out;
  if (runs.empty()) return out;
  for (std::size_t i = 0; i < runs.front().size(); ++i) {
    const auto field = [&](double SweepPoint::*f) {
      std::vector<double> v;
      for (const auto& run : runs) v.push_back(run.at(i).*f);
      return median_of(v);
    };
    out.push_back({runs.front()[i].fraction, field(&SweepPoint::pr_auc), field(&SweepPoint::f1),
                   field(&SweepPoint::p_at_k)});
  }
  return out;
}

Table1Config default_table1_config() {
  Table1Config c;
  c.train_data.n_trends = 40;
  c.train_data.min_size = 60;
  c.train_data.max_size = 200;
  c.train_data.negatives_per_positive = 2.0;
  c.train_data.hard_negative_fraction = 0.2;
  c.train_data.seed = 101;
  c.train_data.id_prefix = "train_";
  c.eval_data.n_trends = 25;
  c.eval_data.min_size = 200;
  c.eval_data.max_size = 2000;
  c.eval_data.negatives_per_positive = 10.0;
  c.eval_data.hard_negative_fraction = 0.2;
  c.eval_data.seed = 202;
  c.eval_data.id_prefix = "eval_";
  c.eval_data.label_offset = 1000;
  c.ebr_train.epochs = 10;
  c.classifier_train.epochs = 10;
  return c;
}

SweepConfig default_sweep_config() {
  SweepConfig c;
  c.train_data.n_trends = 40;
  c.train_data.min_size = 60;
  c.train_data.max_size = 200;
  c.train_data.negatives_per_positive = 2.0;
  c.train_data.modes_per_trend = 6;
  c.train_data.mode_spread = 0.35;
  c.train_data.seed = 303;
  c.train_data.id_prefix = "train_";
  c.eval_data = c.train_data;
  c.eval_data.n_trends = 25;
  c.eval_data.min_size = 200;
  c.eval_data.max_size = 2000;
  c.eval_data.negatives_per_positive = 10.0;
  c.eval_data.seed = 404;
  c.eval_data.id_prefix = "eval_";
  c.eval_data.label_offset = 1000;
  c.train.epochs = 10;
  return c;
}

LossConfig default_loss_config() {
  LossConfig c;
  c.data.n_trends = 10;
  c.data.min_size = 400;
  c.data.max_size = 400;
  c.data.negatives_per_positive = 0.0;
  c.data.extra_negatives = 2000;
  c.data.modes_per_trend = 4;
  c.data.mode_spread = 0.3;
  c.data.n_nuisance = 4;
  c.data.nuisance_scale = 1.5;
  c.data.seed = 505;
  c.train.epochs = 10;
  return c;
}

namespace {

nlohmann::json eval_json(const EvalOptions& e) {
  return {{"k", e.k}, {"score_seeds", e.score_seeds}, {"seed", e.seed}};
}

EvalOptions eval_from_json(const nlohmann::json& j) {
  return {j.at("k").get<std::size_t>(), j.at("score_seeds").get<bool>(), j.at("seed").get<std::uint64_t>()};
}

// Applies j over the defaults' JSON, then parses the merged document.
template <class Config, class Parse>
Config merged(const Config& defaults, const nlohmann::json& j, Parse parse) {
  auto doc = to_json(defaults);
  doc.merge_patch(j);
  try {
    return parse(doc);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, e.what());
  }
}

}  // namespace

nlohmann::json to_json(const Table1Config& c) {
  return {{"train_data", to_json(c.train_data)}, {"eval_data", to_json(c.eval_data)},
          {"ebr_train", to_json(c.ebr_train)},   {"classifier_train", to_json(c.classifier_train)},
          {"model", to_json(c.model)},           {"seed_fraction", c.seed_fraction},
          {"eval", eval_json(c.eval)},           {"repeats", c.repeats}};
}

nlohmann::json to_json(const SweepConfig& c) {
  return {{"train_data", to_json(c.train_data)}, {"eval_data", to_json(c.eval_data)},
          {"train", to_json(c.train)},           {"model", to_json(c.model)},
          {"fractions", c.fractions},            {"eval", eval_json(c.eval)},
          {"repeats", c.repeats}};
}

nlohmann::json to_json(const LossConfig& c) {
  return {{"data", to_json(c.data)},
          {"test_share", c.test_share},
          {"train", to_json(c.train)},
          {"model", to_json(c.model)},
          {"eval",
           {{"seed_fraction", c.eval.seed_fraction},
            {"k", c.eval.k},
            {"k_per_seed", c.eval.k_per_seed},
            {"seed", c.eval.seed}}},
          {"repeats", c.repeats}};
}

Table1Config table1_config_from_json(const nlohmann::json& j) {
  return merged(default_table1_config(), j, [](const nlohmann::json& d) {
    Table1Config c;
    c.train_data = synth_config_from_json(d.at("train_data"));
    c.eval_data = synth_config_from_json(d.at("eval_data"));
    c.ebr_train = train_config_from_json(d.at("ebr_train"));
    c.classifier_train = train_config_from_json(d.at("classifier_train"));
    c.model = model_config_from_json(d.at("model"));
    c.seed_fraction = d.at("seed_fraction").get<double>();
    c.eval = eval_from_json(d.at("eval"));
    c.repeats = d.at("repeats").get<std::size_t>();
    return c;
  });
}

SweepConfig sweep_config_from_json(const nlohmann::json& j) {
  return merged(default_sweep_config(), j, [](const nlohmann::json& d) {
    SweepConfig c;
    c.train_data = synth_config_from_json(d.at("train_data"));
    c.eval_data = synth_config_from_json(d.at("eval_data"));
    c.train = train_config_from_json(d.at("train"));
    c.model = model_config_from_json(d.at("model"));
    c.fractions = d.at("fractions").get<std::vector<double>>();
    c.eval = eval_from_json(d.at("eval"));
    c.repeats = d.at("repeats").get<std::size_t>();
    return c;
  });
}

LossConfig loss_config_from_json(const nlohmann::json& j) {
  return merged(default_loss_config(), j, [](const nlohmann::json& d) {
    LossConfig c;
    c.data = synth_config_from_json(d.at("data"));
    c.test_share = d.at("test_share").get<double>();
    c.train = train_config_from_json(d.at("train"));
    c.model = model_config_from_json(d.at("model"));
    const auto& e = d.at("eval");
    c.eval.seed_fraction = e.at("seed_fraction").get<double>();
    c.eval.k = e.at("k").get<std::size_t>();
    c.eval.k_per_seed = e.at("k_per_seed").get<std::size_t>();
    c.eval.seed = e.at("seed").get<std::uint64_t>();
    c.repeats = d.at("repeats").get<std::size_t>();
    if (!(c.test_share > 0.0 && c.test_share < 1.0)) throw Error(Errc::InvalidConfig, "test_share must be in (0, 1)");
    return c;
  });
}

MethodsReport run_table1_suite(const Table1Config& c) {
  MethodsReport report;
  report.fingerprint = config_fingerprint(to_json(c));
  for (std::size_t r = 0; r < c.repeats; ++r) {
    const auto train_data = gen_synthetic(shifted(c.train_data, r));
    const auto eval_data = gen_synthetic(shifted(c.eval_data, r));
    const auto& records = train_data.records;
    Table1Models models;
    models.classifier = train(records, shifted(c.classifier_train, r), TrainMode::Classifier, c.model).model;
    models.single = train(records, shifted(c.ebr_train, r), TrainMode::Single, c.model).model;
    models.multimodal = train(records, shifted(c.ebr_train, r), TrainMode::Multimodal, c.model).model;
    EvalOptions opts = c.eval;
    opts.seed += r;
    report.runs.push_back(run_table1_experiment(eval_data, models, c.seed_fraction, opts));
  }
  report.median = median_metrics(report.runs);
  return report;
}

SweepReport run_sweep_suite(const SweepConfig& c) {
  SweepReport report;
  report.fingerprint = config_fingerprint(to_json(c));
  for (std::size_t r = 0; r < c.repeats; ++r) {
    const auto train_data = gen_synthetic(shifted(c.train_data, r));
    const auto eval_data = gen_synthetic(shifted(c.eval_data, r));
    const auto model = train(train_data.records, shifted(c.train, r), TrainMode::Multimodal, c.model).model;
    EvalOptions opts = c.eval;
    opts.seed += r;
    report.runs.push_back(run_seed_sweep(eval_data, model, c.fractions, opts));
  }
  report.median = median_sweep(report.runs);
  return report;
}

MethodsReport run_loss_suite(const LossConfig& c) {
  MethodsReport report;
  report.fingerprint = config_fingerprint(to_json(c));
  for (std::size_t r = 0; r < c.repeats; ++r) {
    auto data = gen_synthetic(shifted(c.data, r)).records;
    std::mt19937_64 rng(c.data.seed + r);
    std::shuffle(data.begin(), data.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(c.test_share * static_cast<double>(data.size())));
    std::vector<VideoRecord> test(data.begin(), data.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::vector<VideoRecord> train_set(data.begin() + static_cast<std::ptrdiff_t>(n_test), data.end());
    LossComparisonOptions opts = c.eval;
    opts.seed += r;
    report.runs.push_back(run_loss_comparison(train_set, test, shifted(c.train, r), c.model, opts));
  }
  report.median = median_metrics(report.runs);
  return report;
}

nlohmann::json report_json(const MethodsReport& r, const nlohmann::json& config, const std::string& experiment) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& run : r.runs) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto& m : run) row.push_back(to_json(m));
    runs.push_back(row);
  }
  nlohmann::json median = nlohmann::json::array();
  for (const auto& m : r.median) median.push_back(to_json(m));
  return {{"experiment", experiment}, {"code_version", kCodeVersion}, {"fingerprint", r.fingerprint},
          {"averaging", "macro over trends"}, {"config", config}, {"median", median}, {"runs", runs}};
}

nlohmann::json report_json(const SweepReport& r, const nlohmann::json& config) {
  const auto point = [](const SweepPoint& p) {
    return nlohmann::json{{"fraction", p.fraction}, {"pr_auc", p.pr_auc}, {"f1", p.f1}, {"p_at_k", p.p_at_k}};
  };
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& run : r.runs) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto& p : run) row.push_back(point(p));
    runs.push_back(row);
  }
  nlohmann::json median = nlohmann::json::array();
  for (const auto& p : r.median) median.push_back(point(p));
  return {{"experiment", "sweep"}, {"code_version", kCodeVersion}, {"fingerprint", r.fingerprint},
          {"averaging", "macro over trends"}, {"config", config}, {"median", median}, {"runs", runs}};
}

std::string metrics_csv(const MethodsReport& r) {
  std::ostringstream out;
  out << "# fingerprint " << r.fingerprint << " " << kCodeVersion << ", macro-averaged over trends\n";
  out << "run,method,p_at_k,pr_auc,roc_auc,f1,f1_threshold,n_trends\n";
  const auto row = [&](const std::string& run, const MethodMetrics& m) {
    out << run << ',' << m.method << ',' << m.p_at_k << ',' << m.pr_auc << ',' << m.roc_auc << ',' << m.f1 << ','
        << m.f1_threshold << ',' << m.n_trends << '\n';
  };
  for (std::size_t i = 0; i < r.runs.size(); ++i) {
    for (const auto& m : r.runs[i]) row(std::to_string(i), m);
  }
  for (const auto& m : r.median) row("median", m);
  return out.str();
}

std::string sweep_csv(const SweepReport& r) {
  std::ostringstream out;
  out << "# fingerprint " << r.fingerprint << " " << kCodeVersion << ", macro-averaged over trends\n";
  out << "run,fraction,pr_auc,f1,p_at_k\n";
  const auto row = [&](const std::string& run, const SweepPoint& p) {
    out << run << ',' << p.fraction << ',' << p.pr_auc << ',' << p.f1 << ',' << p.p_at_k << '\n';
  };
  for (std::size_t i = 0; i < r.runs.size(); ++i) {
    for (const auto& p : r.runs[i]) row(std::to_string(i), p);
  }
  for (const auto& p : r.median) row("median", p);
  return out.str();
}

std::string sweep_svg(const SweepReport& r) {
  constexpr double W = 640, H = 400, L = 60, R = 20, T = 30, B = 50;
  double x_max = 0.0;
  for (const auto& p : r.median) x_max = std::max(x_max, p.fraction);
  if (x_max <= 0.0) x_max = 1.0;
  const auto px = [&](double f) { return L + (W - L - R) * f / x_max; };
  const auto py = [&](double v) { return H - B - (H - T - B) * std::clamp(v, 0.0, 1.0); };
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double v = i / 5.0;
    out << "<text x=\"" << L - 8 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">" << v << "</text>\n";
  }
  for (const auto& p : r.median) {
    out << "<text x=\"" << px(p.fraction) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">"
        << p.fraction * 100.0 << "%</text>\n";
  }
  out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">seed fraction</text>\n";
  const auto series = [&](double SweepPoint::*f, const char* color, const char* name, double legend_y) {
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : r.median) out << px(p.fraction) << ',' << py(p.*f) << ' ';
    out << "\"/>\n";
    for (const auto& p : r.median) {
      out << "<circle cx=\"" << px(p.fraction) << "\" cy=\"" << py(p.*f) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    out << "<text x=\"" << W - R - 80 << "\" y=\"" << legend_y << "\" fill=\"" << color << "\">" << name << "</text>\n";
  };
  series(&SweepPoint::pr_auc, "#1f77b4", "PR-AUC", T + 10);
  series(&SweepPoint::f1, "#d62728", "best F1", T + 26);
  out << "</svg>\n";
  return out.str();
}

}  // namespace ebr

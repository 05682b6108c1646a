#include "ebr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ebr/errors.hpp"

namespace ebr {

void SynthConfig::validate() const {
  if (min_size == 0 || max_size < min_size) throw Error(Errc::InvalidConfig, "need 1 <= min_size <= max_size");
  if (negatives_per_positive < 0.0) throw Error(Errc::InvalidConfig, "negatives_per_positive must be >= 0");
  if (hard_negative_fraction < 0.0 || hard_negative_fraction > 1.0) {
    throw Error(Errc::InvalidConfig, "hard_negative_fraction must be in [0, 1]");
  }
  if (token_dim < 2 || n_visual == 0 || n_text == 0) throw Error(Errc::InvalidConfig, "token shape must be positive");
  if (spread < 0.0 || mode_spread < 0.0 || nuisance_scale < 0.0) {
    throw Error(Errc::InvalidConfig, "spreads and scales must be >= 0");
  }
  if (modes_per_trend == 0) throw Error(Errc::InvalidConfig, "modes_per_trend must be >= 1");
  if (nuisance_scale > 0.0 && n_nuisance == 0) throw Error(Errc::InvalidConfig, "nuisance_scale > 0 needs n_nuisance >= 1");
  if (time_span < 0) throw Error(Errc::InvalidConfig, "time_span must be >= 0");
}

nlohmann::json to_json(const SynthConfig& c) {
  return {{"n_trends", c.n_trends},
          {"min_size", c.min_size},
          {"max_size", c.max_size},
          {"negatives_per_positive", c.negatives_per_positive},
          {"extra_negatives", c.extra_negatives},
          {"hard_negative_fraction", c.hard_negative_fraction},
          {"token_dim", c.token_dim},
          {"n_visual", c.n_visual},
          {"n_text", c.n_text},
          {"signal", c.signal},
          {"spread", c.spread},
          {"modes_per_trend", c.modes_per_trend},
          {"mode_spread", c.mode_spread},
          {"n_nuisance", c.n_nuisance},
          {"nuisance_scale", c.nuisance_scale},
          {"drift_rate", c.drift_rate},
          {"time_span", c.time_span},
          {"seed", c.seed},
          {"id_prefix", c.id_prefix},
          {"label_offset", c.label_offset}};
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  SynthConfig c;
  try {
#define EBR_FIELD(name) c.name = j.value(#name, c.name)
    EBR_FIELD(n_trends);
    EBR_FIELD(min_size);
    EBR_FIELD(max_size);
    EBR_FIELD(negatives_per_positive);
    EBR_FIELD(extra_negatives);
    EBR_FIELD(hard_negative_fraction);
    EBR_FIELD(token_dim);
    EBR_FIELD(n_visual);
    EBR_FIELD(n_text);
    EBR_FIELD(signal);
    EBR_FIELD(spread);
    EBR_FIELD(modes_per_trend);
    EBR_FIELD(mode_spread);
    EBR_FIELD(n_nuisance);
    EBR_FIELD(nuisance_scale);
    EBR_FIELD(drift_rate);
    EBR_FIELD(time_span);
    EBR_FIELD(seed);
    EBR_FIELD(id_prefix);
    EBR_FIELD(label_offset);
#undef EBR_FIELD
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("synth config: ") + e.what());
  }
  c.validate();
  return c;
}

double max_separable_spread(const SynthConfig& c) {
  return c.signal / std::sqrt(static_cast<double>(c.token_dim));
}

namespace {

using Vec = std::vector<double>;

Vec random_direction(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec v(d);
  double sq = 0.0;
  for (auto& x : v) {
    x = g(rng);
    sq += x * x;
  }
  for (auto& x : v) x /= std::sqrt(sq);
  return v;
}

void normalize_in_place(Vec& v) {
  double sq = 0.0;
  for (const double x : v) sq += x * x;
  for (auto& x : v) x /= std::sqrt(sq);
}

// Unit vector orthogonal to u, from a random draw.
Vec orthogonal_to(const Vec& u, std::mt19937_64& rng) {
  for (;;) {
    Vec w = random_direction(u.size(), rng);
    double d = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) d += w[i] * u[i];
    for (std::size_t i = 0; i < u.size(); ++i) w[i] -= d * u[i];
    double sq = 0.0;
    for (const double x : w) sq += x * x;
    if (sq > 1e-6) {
      normalize_in_place(w);
      return w;
    }
  }
}

struct Mode {
  Vec dir;   // unit
  Vec perp;  // unit, orthogonal to dir: the drift plane
};

Mode make_mode(const Vec& base, double mode_spread, std::mt19937_64& rng) {
  Mode m;
  m.dir = base;
  if (mode_spread > 0.0) {
    std::normal_distribution<double> g(0.0, mode_spread);
    for (auto& x : m.dir) x += g(rng);
    normalize_in_place(m.dir);
  }
  m.perp = orthogonal_to(m.dir, rng);
  return m;
}

Vec at_time(const Mode& m, double angle) {
  Vec v(m.dir.size());
  const double c = std::cos(angle), s = std::sin(angle);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = c * m.dir[i] + s * m.perp[i];
  return v;
}

struct Trend {
  std::vector<Mode> visual, text;
  std::vector<double> weights;  // cumulative
};

class Generator {
 public:
  explicit Generator(const SynthConfig& c) : c_(c), rng_(c.seed) {
    for (std::size_t i = 0; i < c_.n_nuisance; ++i) {
      nuis_v_.push_back(random_direction(c_.token_dim, rng_));
      nuis_t_.push_back(random_direction(c_.token_dim, rng_));
    }
  }

  std::size_t draw_size() {
    if (c_.min_size == c_.max_size) return c_.min_size;
    // Log-uniform: trend sizes span two orders of magnitude.
    std::uniform_real_distribution<double> u(std::log(static_cast<double>(c_.min_size)),
                                             std::log(static_cast<double>(c_.max_size) + 1.0));
    const auto s = static_cast<std::size_t>(std::floor(std::exp(u(rng_))));
    return std::clamp(s, c_.min_size, c_.max_size);
  }

  Trend make_trend() {
    Trend t;
    const Vec base_v = random_direction(c_.token_dim, rng_);
    const Vec base_t = random_direction(c_.token_dim, rng_);
    double total = 0.0;
    for (std::size_t m = 0; m < c_.modes_per_trend; ++m) {
      t.visual.push_back(make_mode(base_v, c_.mode_spread, rng_));
      t.text.push_back(make_mode(base_t, c_.mode_spread, rng_));
      total += 1.0 / static_cast<double>(m + 1);
      t.weights.push_back(total);
    }
    for (auto& w : t.weights) w /= total;
    return t;
  }

  std::int64_t draw_time() {
    std::uniform_int_distribution<std::int64_t> u(0, c_.time_span);
    return u(rng_);
  }

  std::size_t draw_mode(const Trend& t) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double x = u(rng_);
    for (std::size_t m = 0; m < t.weights.size(); ++m) {
      if (x < t.weights[m]) return m;
    }
    return t.weights.size() - 1;
  }

  double angle(std::int64_t time) const { return c_.drift_rate * static_cast<double>(time) / 86400.0; }

  Tokens tokens(std::size_t count, const Vec& latent, const Vec* nuisance) {
    std::normal_distribution<double> g(0.0, 1.0);
    Tokens t{count, c_.token_dim, {}};
    t.values.reserve(count * c_.token_dim);
    for (std::size_t k = 0; k < count; ++k) {
      for (std::size_t d = 0; d < c_.token_dim; ++d) {
        double x = c_.signal * latent[d] + c_.spread * g(rng_);
        if (nuisance) x += c_.nuisance_scale * (*nuisance)[d];
        t.values.push_back(static_cast<float>(x));
      }
    }
    return t;
  }

  // Fills visual/text tokens from the given latents plus a random nuisance.
  void fill(VideoRecord& r, const Vec& vis, const Vec& txt) {
    const Vec* nv = nullptr;
    const Vec* nt = nullptr;
    if (c_.n_nuisance > 0 && c_.nuisance_scale > 0.0) {
      std::uniform_int_distribution<std::size_t> pick(0, c_.n_nuisance - 1);
      const std::size_t i = pick(rng_);
      nv = &nuis_v_[i];
      nt = &nuis_t_[i];
    }
    r.visual = tokens(c_.n_visual, vis, nv);
    r.text = tokens(c_.n_text, txt, nt);
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  const SynthConfig& c_;
  std::mt19937_64 rng_;
  std::vector<Vec> nuis_v_, nuis_t_;
};

}  // namespace

SynthDataset gen_synthetic(const SynthConfig& config) {
  config.validate();
  SynthDataset out;
  out.config = config;
  Generator gen(out.config);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  for (std::size_t k = 0; k < config.n_trends; ++k) {
    const std::size_t size = gen.draw_size();
    const Trend trend = gen.make_trend();
    const auto n_neg = static_cast<std::size_t>(std::llround(static_cast<double>(size) * config.negatives_per_positive));
    out.trend_sizes.push_back(size);
    out.negative_counts.push_back(n_neg);
    const std::string tag = config.id_prefix + "t" + std::to_string(k) + "_";
    for (std::size_t i = 0; i < size; ++i) {
      VideoRecord r;
      r.id = tag + std::to_string(i);
      r.label = config.label_offset + static_cast<std::int64_t>(k);
      r.timestamp = gen.draw_time();
      const std::size_t m = gen.draw_mode(trend);
      const double a = gen.angle(r.timestamp);
      gen.fill(r, at_time(trend.visual[m], a), at_time(trend.text[m], a));
      out.records.push_back(std::move(r));
    }
    const std::string ntag = config.id_prefix + "n" + std::to_string(k) + "_";
    for (std::size_t i = 0; i < n_neg; ++i) {
      VideoRecord r;
      r.id = ntag + std::to_string(i);
      r.label = kBenignLabel;
      r.group = static_cast<std::int64_t>(k);
      r.timestamp = gen.draw_time();
      const Vec txt = random_direction(config.token_dim, gen.rng());
      if (unif(gen.rng()) < config.hard_negative_fraction) {
        const std::size_t m = gen.draw_mode(trend);
        gen.fill(r, at_time(trend.visual[m], gen.angle(r.timestamp)), txt);
      } else {
        gen.fill(r, random_direction(config.token_dim, gen.rng()), txt);
      }
      out.records.push_back(std::move(r));
    }
  }
  for (std::size_t i = 0; i < config.extra_negatives; ++i) {
    VideoRecord r;
    r.id = config.id_prefix + "x" + std::to_string(i);
    r.label = kBenignLabel;
    r.timestamp = gen.draw_time();
    const Vec vis = random_direction(config.token_dim, gen.rng());
    gen.fill(r, vis, random_direction(config.token_dim, gen.rng()));
    out.records.push_back(std::move(r));
  }
  return out;
}

}  // namespace ebr

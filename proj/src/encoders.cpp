#include "ebr/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ebr/errors.hpp"

namespace ebr {

Mat& ParamSet::add(const std::string& name, std::size_t rows, std::size_t cols) {
  if (contains(name)) throw Error(Errc::InvalidArgument, "duplicate tensor " + name);
  tensors_.push_back({name, Mat(rows, cols)});
  return tensors_.back().value;
}

Mat& ParamSet::at(const std::string& name) {
  for (auto& t : tensors_) {
    if (t.name == name) return t.value;
  }
  throw Error(Errc::InvalidArgument, "missing tensor " + name);
}

const Mat& ParamSet::at(const std::string& name) const {
  return const_cast<ParamSet*>(this)->at(name);
}

bool ParamSet::contains(const std::string& name) const {
  return std::any_of(tensors_.begin(), tensors_.end(),
                     [&](const Tensor& t) { return t.name == name; });
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const auto& t : tensors_) out.add(t.name, t.value.rows, t.value.cols);
  return out;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.value.v.size();
  return n;
}

bool ParamSet::all_finite() const {
  for (const auto& t : tensors_) {
    for (const double x : t.value.v) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

void ModelConfig::validate() const {
  if (token_dim == 0 || n_visual == 0 || n_text == 0 || hidden1 == 0 || hidden2 == 0 ||
      model_dim == 0 || head_dim == 0 || out_dim == 0) {
    throw Error(Errc::InvalidConfig, "model dimensions must be positive");
  }
}

namespace {

void fill_gaussian(Mat& m, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& x : m.v) x = dist(rng);
}

void init_weight(ParamSet& p, const std::string& name, std::size_t in, std::size_t out,
                 std::mt19937_64& rng) {
  fill_gaussian(p.add(name, in, out), 1.0 / std::sqrt(static_cast<double>(in)), rng);
}

// y = x W + b
void row_affine(std::span<const double> x, const Mat& w, const Mat& b, std::span<double> y) {
  for (std::size_t j = 0; j < w.cols; ++j) y[j] = b.v[j];
  for (std::size_t i = 0; i < w.rows; ++i) {
    const double xi = x[i];
    const double* wi = w.v.data() + i * w.cols;
    for (std::size_t j = 0; j < w.cols; ++j) y[j] += xi * wi[j];
  }
}

// dW += x^T dy, db += dy, returns dx = W dy
std::vector<double> row_affine_backward(std::span<const double> x, const Mat& w,
                                        std::span<const double> dy, Mat& dw, Mat* db) {
  std::vector<double> dx(w.rows, 0.0);
  for (std::size_t i = 0; i < w.rows; ++i) {
    const double* wi = w.v.data() + i * w.cols;
    double* dwi = dw.v.data() + i * w.cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < w.cols; ++j) {
      dwi[j] += x[i] * dy[j];
      acc += wi[j] * dy[j];
    }
    dx[i] = acc;
  }
  if (db) {
    for (std::size_t j = 0; j < w.cols; ++j) db->v[j] += dy[j];
  }
  return dx;
}

void colsum_into(const Mat& m, Mat& out) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) out.v[c] += m(r, c);
  }
}

}  // namespace

ParamSet init_single_params(const ModelConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  ParamSet p;
  init_weight(p, "mlp.w1", cfg.token_dim, cfg.hidden1, rng);
  p.add("mlp.b1", 1, cfg.hidden1);
  init_weight(p, "mlp.w2", cfg.hidden1, cfg.hidden2, rng);
  p.add("mlp.b2", 1, cfg.hidden2);
  init_weight(p, "proj.w", cfg.hidden2, cfg.out_dim, rng);
  p.add("proj.b", 1, cfg.out_dim);
  return p;
}

ParamSet init_multimodal_params(const ModelConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  ParamSet p;
  init_weight(p, "vis.w", cfg.token_dim, cfg.model_dim, rng);
  p.add("vis.b", 1, cfg.model_dim);
  init_weight(p, "txt.w", cfg.token_dim, cfg.model_dim, rng);
  p.add("txt.b", 1, cfg.model_dim);
  init_weight(p, "attn.wq", cfg.model_dim, cfg.head_dim, rng);
  init_weight(p, "attn.wk", cfg.model_dim, cfg.head_dim, rng);
  init_weight(p, "attn.wv", cfg.model_dim, cfg.head_dim, rng);
  init_weight(p, "attn.wo", cfg.head_dim, cfg.model_dim, rng);
  init_weight(p, "proj.w", cfg.model_dim, cfg.out_dim, rng);
  p.add("proj.b", 1, cfg.out_dim);
  return p;
}

void add_classifier_head(ParamSet& params, const ModelConfig& cfg, std::size_t n_classes,
                         std::mt19937_64& rng) {
  init_weight(params, "head.w", cfg.out_dim, n_classes, rng);
  params.add("head.b", 1, n_classes);
}

std::vector<double> single_features(const Tokens& visual) {
  if (visual.count == 0) throw Error(Errc::EmptyTokens, "no visual tokens");
  std::vector<double> x(visual.dim, 0.0);
  for (std::size_t t = 0; t < visual.count; ++t) {
    const auto r = visual.row(t);
    for (std::size_t d = 0; d < visual.dim; ++d) x[d] += r[d];
  }
  for (auto& v : x) v /= static_cast<double>(visual.count);
  return x;
}

std::vector<double> single_forward(const ParamSet& p, std::span<const double> x, SingleCache* cache) {
  const Mat& w1 = p.at("mlp.w1");
  const Mat& w2 = p.at("mlp.w2");
  const Mat& wp = p.at("proj.w");
  if (x.size() != w1.rows) throw Error(Errc::InvalidArgument, "feature dim does not match params");
  std::vector<double> h1(w1.cols), h2(w2.cols), u(wp.cols);
  row_affine(x, w1, p.at("mlp.b1"), h1);
  for (auto& v : h1) v = std::tanh(v);
  row_affine(h1, w2, p.at("mlp.b2"), h2);
  for (auto& v : h2) v = std::tanh(v);
  row_affine(h2, wp, p.at("proj.b"), u);
  if (cache) {
    cache->x.assign(x.begin(), x.end());
    cache->h1 = std::move(h1);
    cache->h2 = std::move(h2);
  }
  return u;
}

void single_backward(const ParamSet& p, const SingleCache& c, std::span<const double> grad_u,
                     ParamSet& g) {
  auto dh2 = row_affine_backward(c.h2, p.at("proj.w"), grad_u, g.at("proj.w"), &g.at("proj.b"));
  for (std::size_t i = 0; i < dh2.size(); ++i) dh2[i] *= 1.0 - c.h2[i] * c.h2[i];
  auto dh1 = row_affine_backward(c.h1, p.at("mlp.w2"), dh2, g.at("mlp.w2"), &g.at("mlp.b2"));
  for (std::size_t i = 0; i < dh1.size(); ++i) dh1[i] *= 1.0 - c.h1[i] * c.h1[i];
  row_affine_backward(c.x, p.at("mlp.w1"), dh1, g.at("mlp.w1"), &g.at("mlp.b1"));
}

std::vector<double> multimodal_forward(const ParamSet& p, const Mat& visual, const Mat& text,
                                       MultimodalCache* cache) {
  if (visual.rows == 0 || text.rows == 0) throw Error(Errc::EmptyTokens, "need >= 1 token per modality");
  const Mat& wv = p.at("vis.w");
  const Mat& wt = p.at("txt.w");
  if (visual.cols != wv.rows || text.cols != wt.rows) {
    throw Error(Errc::InvalidArgument, "token dim does not match params");
  }
  Mat xv = matmul(visual, wv);
  add_row_bias(xv, p.at("vis.b").v);
  Mat xt = matmul(text, wt);
  add_row_bias(xt, p.at("txt.b").v);

  const Mat& wq = p.at("attn.wq");
  Mat q = matmul(xv, wq);
  Mat k = matmul(xt, p.at("attn.wk"));
  Mat val = matmul(xt, p.at("attn.wv"));
  const double scale = 1.0 / std::sqrt(static_cast<double>(wq.cols));

  Mat attn = matmul_bt(q, k);
  for (std::size_t i = 0; i < attn.rows; ++i) {
    auto row = attn.row(i);
    double m = -std::numeric_limits<double>::infinity();
    for (auto& s : row) {
      s *= scale;
      m = std::max(m, s);
    }
    double sum = 0.0;
    for (auto& s : row) {
      s = std::exp(s - m);
      sum += s;
    }
    for (auto& s : row) s /= sum;
  }
  Mat ctx = matmul(attn, val);
  const Mat out = matmul(ctx, p.at("attn.wo"));

  std::vector<double> pooled(xv.cols, 0.0);
  for (std::size_t r = 0; r < xv.rows; ++r) {
    for (std::size_t c = 0; c < xv.cols; ++c) pooled[c] += xv(r, c) + out(r, c);
  }
  for (auto& v : pooled) v /= static_cast<double>(xv.rows);

  const Mat& wp = p.at("proj.w");
  std::vector<double> u(wp.cols);
  row_affine(pooled, wp, p.at("proj.b"), u);

  if (cache) {
    cache->visual = visual;
    cache->text = text;
    cache->xv = std::move(xv);
    cache->xt = std::move(xt);
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->val = std::move(val);
    cache->attn = std::move(attn);
    cache->ctx = std::move(ctx);
    cache->pooled = std::move(pooled);
  }
  return u;
}

void multimodal_backward(const ParamSet& p, const MultimodalCache& c,
                         std::span<const double> grad_u, ParamSet& g) {
  const auto dpooled =
      row_affine_backward(c.pooled, p.at("proj.w"), grad_u, g.at("proj.w"), &g.at("proj.b"));
  const std::size_t tv = c.xv.rows;
  const std::size_t tt = c.xt.rows;

  // Mean pool: every residual row receives dpooled / T_v.
  Mat dh(tv, c.xv.cols);
  for (std::size_t r = 0; r < tv; ++r) {
    for (std::size_t j = 0; j < dh.cols; ++j) dh(r, j) = dpooled[j] / static_cast<double>(tv);
  }

  // out = ctx Wo
  const Mat& wo = p.at("attn.wo");
  add_matmul_at(c.ctx, dh, g.at("attn.wo"));
  const Mat dctx = matmul_bt(dh, wo);

  // ctx = attn val
  const Mat dattn = matmul_bt(dctx, c.val);
  Mat dval(tt, c.val.cols);
  add_matmul_at(c.attn, dctx, dval);

  // Row-wise softmax, then the 1/sqrt(d) scale.
  const double scale = 1.0 / std::sqrt(static_cast<double>(c.q.cols));
  Mat dscores(tv, tt);
  for (std::size_t i = 0; i < tv; ++i) {
    double inner = 0.0;
    for (std::size_t j = 0; j < tt; ++j) inner += c.attn(i, j) * dattn(i, j);
    for (std::size_t j = 0; j < tt; ++j) dscores(i, j) = c.attn(i, j) * (dattn(i, j) - inner) * scale;
  }
  const Mat dq = matmul(dscores, c.k);
  Mat dk(tt, c.k.cols);
  add_matmul_at(dscores, c.q, dk);

  Mat dxv = dh;  // residual path
  add_matmul_at(c.xv, dq, g.at("attn.wq"));
  {
    const Mat t = matmul_bt(dq, p.at("attn.wq"));
    for (std::size_t i = 0; i < dxv.v.size(); ++i) dxv.v[i] += t.v[i];
  }
  add_matmul_at(c.xt, dk, g.at("attn.wk"));
  add_matmul_at(c.xt, dval, g.at("attn.wv"));
  Mat dxt = matmul_bt(dk, p.at("attn.wk"));
  {
    const Mat t = matmul_bt(dval, p.at("attn.wv"));
    for (std::size_t i = 0; i < dxt.v.size(); ++i) dxt.v[i] += t.v[i];
  }

  add_matmul_at(c.visual, dxv, g.at("vis.w"));
  colsum_into(dxv, g.at("vis.b"));
  add_matmul_at(c.text, dxt, g.at("txt.w"));
  colsum_into(dxt, g.at("txt.b"));
}

std::vector<double> head_forward(const ParamSet& p, std::span<const double> u) {
  const Mat& w = p.at("head.w");
  std::vector<double> logits(w.cols);
  row_affine(u, w, p.at("head.b"), logits);
  return logits;
}

std::vector<double> head_backward(const ParamSet& p, std::span<const double> u,
                                  std::span<const double> grad_logits, ParamSet& g) {
  return row_affine_backward(u, p.at("head.w"), grad_logits, g.at("head.w"), &g.at("head.b"));
}

std::vector<double> l2_normalize(std::span<const double> u) {
  double sq = 0.0;
  for (const double x : u) sq += x * x;
  const double norm = std::sqrt(sq);
  if (!(norm > kMinNorm)) throw Error(Errc::ZeroEmbedding, "projection norm <= 1e-12");
  std::vector<double> z(u.begin(), u.end());
  for (auto& x : z) x /= norm;
  return z;
}

std::vector<double> l2_normalize_backward(std::span<const double> u, std::span<const double> grad_z) {
  double sq = 0.0;
  for (const double x : u) sq += x * x;
  const double norm = std::sqrt(sq);
  double zg = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) zg += (u[i] / norm) * grad_z[i];
  std::vector<double> gu(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) gu[i] = (grad_z[i] - (u[i] / norm) * zg) / norm;
  return gu;
}

EmbeddingVector encode_single(std::span<const double> features, const ParamSet& params) {
  const auto z = l2_normalize(single_forward(params, features, nullptr));
  return normalize(std::span<const double>(z));
}

EmbeddingVector encode_multimodal(const Mat& visual, const Mat& text, const ParamSet& params) {
  const auto z = l2_normalize(multimodal_forward(params, visual, text, nullptr));
  return normalize(std::span<const double>(z));
}

}  // namespace ebr

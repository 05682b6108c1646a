#include "ebr/scl_loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ebr/errors.hpp"

namespace ebr {

namespace {

void validate(const Mat& z, std::size_t n_labels, double tau) {
  if (!(tau > 0.0)) throw Error(Errc::BadTemperature, "tau must be > 0");
  if (n_labels != z.rows) throw Error(Errc::InvalidArgument, "label count != batch rows");
  if (z.rows < 2) throw Error(Errc::InvalidArgument, "batch needs at least two samples");
}

// Shared forward pass. When grad is non-null it receives dL/dz.
double scl_forward(const Mat& z, std::span<const std::int64_t> labels, double tau, Mat* grad) {
  validate(z, labels.size(), tau);
  const std::size_t n = z.rows;
  const Mat sims = matmul_bt(z, z);

  std::vector<std::size_t> positives(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < n; ++p) {
      if (p != i && labels[p] == labels[i]) ++positives[i];
    }
    if (positives[i] == 0) throw Error(Errc::NoPositives, "anchor " + std::to_string(i));
  }

  if (grad) *grad = Mat(n, z.cols);
  std::vector<double> logits(n);
  std::vector<double> coeff(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < n; ++a) {
      logits[a] = sims(i, a) / tau;
      if (a != i) max_logit = std::max(max_logit, logits[a]);
    }
    double denom = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      if (a != i) denom += std::exp(logits[a] - max_logit);
    }
    const double log_denom = max_logit + std::log(denom);

    const double inv_p = 1.0 / static_cast<double>(positives[i]);
    double pos_sum = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      if (p != i && labels[p] == labels[i]) pos_sum += logits[p] - log_denom;
    }
    total += -inv_p * pos_sum;

    if (!grad) continue;
    // d loss_i / d logit_ia = softmax_ia - [a in P(i)] / |P(i)|
    for (std::size_t a = 0; a < n; ++a) {
      if (a == i) {
        coeff[a] = 0.0;
        continue;
      }
      const double softmax = std::exp(logits[a] - log_denom);
      const double indicator = labels[a] == labels[i] ? inv_p : 0.0;
      coeff[a] = (softmax - indicator) / tau;
    }
    // logit_ia = z_i . z_a / tau: both z_i and z_a receive gradient.
    auto gi = grad->row(i);
    const auto zi = z.row(i);
    for (std::size_t a = 0; a < n; ++a) {
      if (coeff[a] == 0.0) continue;
      const auto za = z.row(a);
      auto ga = grad->row(a);
      for (std::size_t d = 0; d < z.cols; ++d) {
        gi[d] += coeff[a] * za[d];
        ga[d] += coeff[a] * zi[d];
      }
    }
  }
  return total;
}

}  // namespace

double scl_loss(const Mat& z, std::span<const std::int64_t> labels, double tau) {
  return scl_forward(z, labels, tau, nullptr);
}

LossAndGrad scl_loss_and_grad(const Mat& z, std::span<const std::int64_t> labels, double tau) {
  LossAndGrad out;
  out.loss = scl_forward(z, labels, tau, &out.grad);
  return out;
}

double ntxent_loss(const Mat& z, std::span<const std::size_t> twin, double tau) {
  if (!(tau > 0.0)) throw Error(Errc::BadTemperature, "tau must be > 0");
  if (twin.size() != z.rows) throw Error(Errc::InvalidArgument, "twin count != batch rows");
  const std::size_t n = z.rows;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = twin[i];
    if (j >= n || j == i) throw Error(Errc::NoPositives, "anchor without a twin");
    // -log softmax of the twin among all non-anchor rows, via logsumexp.
    std::vector<double> logits;
    logits.reserve(n - 1);
    for (std::size_t a = 0; a < n; ++a) {
      if (a != i) logits.push_back(dot(z.row(i), z.row(a)) / tau);
    }
    const double m = *std::max_element(logits.begin(), logits.end());
    double s = 0.0;
    for (const double l : logits) s += std::exp(l - m);
    total += (m + std::log(s)) - dot(z.row(i), z.row(j)) / tau;
  }
  return total;
}

double softmax_cross_entropy(std::span<const double> logits, std::size_t target,
                             std::span<double> grad) {
  if (target >= logits.size()) throw Error(Errc::InvalidArgument, "target class out of range");
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (const double l : logits) s += std::exp(l - m);
  const double log_z = m + std::log(s);
  if (!grad.empty()) {
    for (std::size_t c = 0; c < logits.size(); ++c) {
      grad[c] = std::exp(logits[c] - log_z) - (c == target ? 1.0 : 0.0);
    }
  }
  return log_z - logits[target];
}

}  // namespace ebr

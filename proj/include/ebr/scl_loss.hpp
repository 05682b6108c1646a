#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "ebr/linalg.hpp"

namespace ebr {

// Supervised contrastive loss over a multiview batch. Row i of z is the
// (unit-norm) embedding of sample i; labels[i] its class. For every anchor i,
// positives P(i) are all other rows with the same label and the denominator
// runs over every row except i:
//
//   L = sum_i  -1/|P(i)|  sum_{p in P(i)}  log( exp(z_i.z_p / tau) / sum_{a != i} exp(z_i.z_a / tau) )
//
// The sum over anchors is returned unscaled. Log-sum-exp is stabilized with a
// per-anchor max. Throws BadTemperature (tau <= 0), NoPositives, InvalidArgument
// (label count != rows, fewer than two rows).
double scl_loss(const Mat& z, std::span<const std::int64_t> labels, double tau);

struct LossAndGrad {
  double loss = 0.0;
  Mat grad;  // dL/dz, same shape as z
};

LossAndGrad scl_loss_and_grad(const Mat& z, std::span<const std::int64_t> labels, double tau);

inline Mat scl_loss_grad(const Mat& z, std::span<const std::int64_t> labels, double tau) {
  return scl_loss_and_grad(z, labels, tau).grad;
}

// NT-Xent (self-supervised) loss: the only positive of anchor i is twin[i].
// Written independently of scl_loss; with one positive per anchor both agree.
double ntxent_loss(const Mat& z, std::span<const std::size_t> twin, double tau);

// Softmax cross-entropy of one logit row against a target class; writes
// dLoss/dlogits into grad when non-empty.
double softmax_cross_entropy(std::span<const double> logits, std::size_t target,
                             std::span<double> grad);

}  // namespace ebr

#pragma once

// Desk-scale encoders.
//
// Single-modal: mean-pooled visual tokens -> MLP (two tanh hidden layers) ->
// linear projection to D -> L2 normalize.
//
// Multimodal: per-modality linear token encoders -> single-head cross-attention
// (queries from visual tokens, keys/values from text tokens, softmax over text
// positions scaled by 1/sqrt(head_dim)) -> residual add onto the visual tokens ->
// mean pool -> linear projection to D -> L2 normalize. Tokens carry no
// positional encoding.
//
// All weights are stored (in x out); a row vector x maps to x W + b.

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ebr/dataset.hpp"
#include "ebr/linalg.hpp"
#include "ebr/vector_core.hpp"

namespace ebr {

struct Tensor {
  std::string name;
  Mat value;
  bool operator==(const Tensor&) const = default;
};

class ParamSet {
 public:
  Mat& add(const std::string& name, std::size_t rows, std::size_t cols);
  Mat& at(const std::string& name);
  const Mat& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::vector<Tensor>& tensors() noexcept { return tensors_; }
  const std::vector<Tensor>& tensors() const noexcept { return tensors_; }

  // Same names and shapes, all zeros.
  ParamSet zeros_like() const;
  std::size_t scalar_count() const;
  bool all_finite() const;

  bool operator==(const ParamSet&) const = default;

 private:
  std::vector<Tensor> tensors_;
};

struct ModelConfig {
  std::size_t token_dim = 16;
  std::size_t n_visual = 4;
  std::size_t n_text = 4;
  std::size_t hidden1 = 64;
  std::size_t hidden2 = 64;
  std::size_t model_dim = 32;
  std::size_t head_dim = 16;
  std::size_t out_dim = kDefaultDim;

  void validate() const;
};

ParamSet init_single_params(const ModelConfig& cfg, std::mt19937_64& rng);
ParamSet init_multimodal_params(const ModelConfig& cfg, std::mt19937_64& rng);
// Adds "head.w" (out_dim x n_classes) and "head.b".
void add_classifier_head(ParamSet& params, const ModelConfig& cfg, std::size_t n_classes,
                         std::mt19937_64& rng);

// Mean of the visual tokens; the single-modal encoder's input.
std::vector<double> single_features(const Tokens& visual);

struct SingleCache {
  std::vector<double> x, h1, h2;
};

// Returns the pre-normalization projection u.
std::vector<double> single_forward(const ParamSet& p, std::span<const double> x, SingleCache* cache);
// Accumulates dL/dparams into grads given dL/du.
void single_backward(const ParamSet& p, const SingleCache& cache, std::span<const double> grad_u,
                     ParamSet& grads);

struct MultimodalCache {
  Mat visual, text;    // raw tokens
  Mat xv, xt;          // encoded tokens
  Mat q, k, val;       // attention projections
  Mat attn;            // softmax weights, T_v x T_t
  Mat ctx;             // attn * val
  std::vector<double> pooled;
};

std::vector<double> multimodal_forward(const ParamSet& p, const Mat& visual, const Mat& text,
                                       MultimodalCache* cache);
void multimodal_backward(const ParamSet& p, const MultimodalCache& cache,
                         std::span<const double> grad_u, ParamSet& grads);

// Classifier head on top of u: logits = u W + b.
std::vector<double> head_forward(const ParamSet& p, std::span<const double> u);
// Accumulates head grads and returns dL/du.
std::vector<double> head_backward(const ParamSet& p, std::span<const double> u,
                                  std::span<const double> grad_logits, ParamSet& grads);

// z = u / |u|; throws ZeroEmbedding when |u| <= 1e-12.
std::vector<double> l2_normalize(std::span<const double> u);
// dL/du from dL/dz through z = u/|u|.
std::vector<double> l2_normalize_backward(std::span<const double> u, std::span<const double> grad_z);

// Throws InvalidArgument on shape mismatch, ZeroEmbedding.
EmbeddingVector encode_single(std::span<const double> features, const ParamSet& params);
// Throws EmptyTokens, InvalidArgument, ZeroEmbedding.
EmbeddingVector encode_multimodal(const Mat& visual, const Mat& text, const ParamSet& params);

}  // namespace ebr

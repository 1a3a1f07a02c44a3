#pragma once

#include "trea/ad/tensor.hpp"
#include "trea/nn/params.hpp"

#include <string>

namespace trea::nn {

/// Additive self-attention pooling: rows are scored by
/// scorer . tanh(weight . x), softmax-normalised, and summed.
struct LinearAttention {
  ad::Tensor weight;  // attn_dim x dim
  ad::Tensor scorer;  // 1 x attn_dim

  static LinearAttention make(Eigen::Index dim, Eigen::Index attn_dim, Initializer& init);
  void register_into(ParamSet& params, const std::string& prefix) const;
};

/// Pools an m x d matrix into a 1 x d row. Throws EmptyInputError for m = 0.
ad::Tensor linear_attention(const ad::Tensor& x, const LinearAttention& attn);
/// The m x 1 attention distribution used by linear_attention.
ad::Tensor linear_attention_scores(const ad::Tensor& x, const LinearAttention& attn);

/// Sigmoid gate over a concatenated pair: g*a + (1-g)*b.
struct GateFusion {
  ad::Tensor weight;  // 1 x 2d

  static GateFusion make(Eigen::Index dim, Initializer& init);
  void register_into(ParamSet& params, const std::string& prefix) const;
};

/// Row-wise gate: `a` is m x d, `b` is m x d or a single 1 x d row that is
/// broadcast against every row of `a`.
ad::Tensor gate(const ad::Tensor& a, const ad::Tensor& b, const GateFusion& g);
/// The m x 1 gate coefficients for the same inputs.
ad::Tensor gate_coefficients(const ad::Tensor& a, const ad::Tensor& b, const GateFusion& g);

struct Linear {
  ad::Tensor weight;  // out x in
  ad::Tensor bias;    // 1 x out

  static Linear make(Eigen::Index in, Eigen::Index out, Initializer& init);
  void register_into(ParamSet& params, const std::string& prefix) const;
  ad::Tensor operator()(const ad::Tensor& x) const;
};

struct LayerNorm {
  ad::Tensor gain;
  ad::Tensor bias;

  static LayerNorm make(Eigen::Index dim);
  void register_into(ParamSet& params, const std::string& prefix) const;
  ad::Tensor operator()(const ad::Tensor& x) const;
};

struct MultiHeadAttention {
  Linear query;
  Linear key;
  Linear value;
  Linear output;
  int heads = 1;

  static MultiHeadAttention make(Eigen::Index dim, int heads, Initializer& init);
  void register_into(ParamSet& params, const std::string& prefix) const;
  /// Scaled dot-product attention of `queries` (n x d) over `memory` (m x d).
  /// With `causal`, query row i only sees memory rows <= i.
  ad::Tensor operator()(const ad::Tensor& queries, const ad::Tensor& memory, bool causal) const;
};

struct FeedForward {
  Linear hidden;
  Linear output;

  static FeedForward make(Eigen::Index dim, Eigen::Index hidden_dim, Eigen::Index out_dim,
                          Initializer& init);
  void register_into(ParamSet& params, const std::string& prefix) const;
  ad::Tensor operator()(const ad::Tensor& x) const;
};

}  // namespace trea::nn

#include "trea/nn/layers.hpp"

#include "trea/error.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace trea::nn {

LinearAttention LinearAttention::make(Eigen::Index dim, Eigen::Index attn_dim, Initializer& init) {
  return {ad::Tensor::parameter(init.xavier(attn_dim, dim)),
          ad::Tensor::parameter(init.xavier(1, attn_dim))};
}

void LinearAttention::register_into(ParamSet& params, const std::string& prefix) const {
  params.add(prefix + ".weight", weight);
  params.add(prefix + ".scorer", scorer);
}

ad::Tensor linear_attention_scores(const ad::Tensor& x, const LinearAttention& attn) {
  if (x.rows() == 0) throw EmptyInputError("linear_attention: no rows to pool");
  auto hidden = ad::tanh(ad::matmul_nt(x, attn.weight));
  auto logits = ad::matmul_nt(hidden, attn.scorer);
  return ad::transpose(ad::softmax_rows(ad::transpose(logits)));
}

ad::Tensor linear_attention(const ad::Tensor& x, const LinearAttention& attn) {
  auto alpha = linear_attention_scores(x, attn);
  return ad::matmul(ad::transpose(alpha), x);
}

GateFusion GateFusion::make(Eigen::Index dim, Initializer& init) {
  return {ad::Tensor::parameter(init.xavier(1, 2 * dim))};
}

void GateFusion::register_into(ParamSet& params, const std::string& prefix) const {
  params.add(prefix + ".weight", weight);
}

namespace {

ad::Tensor match_rows(const ad::Tensor& a, const ad::Tensor& b) {
  if (b.rows() == a.rows()) return b;
  if (b.rows() == 1) return ad::broadcast_rows(b, a.rows());
  throw ContractError("gate: second operand must have matching rows or a single row");
}

}  // namespace

ad::Tensor gate_coefficients(const ad::Tensor& a, const ad::Tensor& b, const GateFusion& g) {
  const std::array<ad::Tensor, 2> parts{a, match_rows(a, b)};
  return ad::sigmoid(ad::matmul_nt(ad::concat_cols(parts), g.weight));
}

ad::Tensor gate(const ad::Tensor& a, const ad::Tensor& b, const GateFusion& g) {
  auto other = match_rows(a, b);
  const std::array<ad::Tensor, 2> parts{a, other};
  auto gamma = ad::sigmoid(ad::matmul_nt(ad::concat_cols(parts), g.weight));
  return ad::add(ad::scale_rows(a, gamma), ad::scale_rows(other, ad::one_minus(gamma)));
}

Linear Linear::make(Eigen::Index in, Eigen::Index out, Initializer& init) {
  return {ad::Tensor::parameter(init.xavier(out, in)), ad::Tensor::parameter(ad::Matrix::Zero(1, out))};
}

void Linear::register_into(ParamSet& params, const std::string& prefix) const {
  params.add(prefix + ".weight", weight);
  params.add(prefix + ".bias", bias);
}

ad::Tensor Linear::operator()(const ad::Tensor& x) const {
  return ad::add_row(ad::matmul_nt(x, weight), bias);
}

LayerNorm LayerNorm::make(Eigen::Index dim) {
  return {ad::Tensor::parameter(ad::Matrix::Ones(1, dim)),
          ad::Tensor::parameter(ad::Matrix::Zero(1, dim))};
}

void LayerNorm::register_into(ParamSet& params, const std::string& prefix) const {
  params.add(prefix + ".gain", gain);
  params.add(prefix + ".bias", bias);
}

ad::Tensor LayerNorm::operator()(const ad::Tensor& x) const { return ad::layer_norm(x, gain, bias); }

MultiHeadAttention MultiHeadAttention::make(Eigen::Index dim, int heads, Initializer& init) {
  if (heads <= 0 || dim % heads != 0) {
    throw ConfigError("attention: dim " + std::to_string(dim) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  MultiHeadAttention mha;
  mha.query = Linear::make(dim, dim, init);
  mha.key = Linear::make(dim, dim, init);
  mha.value = Linear::make(dim, dim, init);
  mha.output = Linear::make(dim, dim, init);
  mha.heads = heads;
  return mha;
}

void MultiHeadAttention::register_into(ParamSet& params, const std::string& prefix) const {
  query.register_into(params, prefix + ".query");
  key.register_into(params, prefix + ".key");
  value.register_into(params, prefix + ".value");
  output.register_into(params, prefix + ".output");
}

ad::Tensor MultiHeadAttention::operator()(const ad::Tensor& queries, const ad::Tensor& memory,
                                          bool causal) const {
  const Eigen::Index dim = queries.cols();
  const Eigen::Index head_dim = dim / heads;
  auto q = query(queries);
  auto k = key(memory);
  auto v = value(memory);

  ad::Tensor mask;
  if (causal) {
    ad::Matrix m = ad::Matrix::Zero(queries.rows(), memory.rows());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = i + 1; j < m.cols(); ++j) m(i, j) = -std::numeric_limits<double>::infinity();
    }
    mask = ad::Tensor::constant(std::move(m));
  }

  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  std::vector<ad::Tensor> outputs;
  outputs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    auto qh = ad::slice_cols(q, h * head_dim, head_dim);
    auto kh = ad::slice_cols(k, h * head_dim, head_dim);
    auto vh = ad::slice_cols(v, h * head_dim, head_dim);
    auto scores = ad::scale(ad::matmul_nt(qh, kh), inv_scale);
    if (causal) scores = ad::add(scores, mask);
    outputs.push_back(ad::matmul(ad::softmax_rows(scores), vh));
  }
  return output(heads == 1 ? outputs.front() : ad::concat_cols(outputs));
}

FeedForward FeedForward::make(Eigen::Index dim, Eigen::Index hidden_dim, Eigen::Index out_dim,
                              Initializer& init) {
  return {Linear::make(dim, hidden_dim, init), Linear::make(hidden_dim, out_dim, init)};
}

void FeedForward::register_into(ParamSet& params, const std::string& prefix) const {
  hidden.register_into(params, prefix + ".hidden");
  output.register_into(params, prefix + ".output");
}

ad::Tensor FeedForward::operator()(const ad::Tensor& x) const { return output(ad::relu(hidden(x))); }

}  // namespace trea::nn

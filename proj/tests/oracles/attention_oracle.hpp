#pragma once

// Scalar-loop references for attention pooling, gating and scoring.
// Plain nested loops over Eigen storage; no vectorised expressions.

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <vector>

namespace trea::oracle {

using Mat = Eigen::MatrixXd;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline std::vector<double> softmax(const std::vector<double>& z, const std::vector<bool>& mask = {}) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (mask.empty() || mask[i]) m = std::max(m, z[i]);
  }
  std::vector<double> out(z.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    out[i] = std::exp(z[i] - m);
    total += out[i];
  }
  for (auto& v : out) v /= total;
  return out;
}

/// score_i = b . tanh(W x_i); output = sum_i softmax(score)_i x_i.
inline Mat linear_attention(const Mat& x, const Mat& w, const Mat& b) {
  std::vector<double> scores(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index a = 0; a < w.rows(); ++a) {
      double h = 0.0;
      for (Eigen::Index j = 0; j < x.cols(); ++j) h += w(a, j) * x(i, j);
      s += b(0, a) * std::tanh(h);
    }
    scores[static_cast<std::size_t>(i)] = s;
  }
  const auto alpha = softmax(scores);
  Mat out = Mat::Zero(1, x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) out(0, j) += alpha[static_cast<std::size_t>(i)] * x(i, j);
  }
  return out;
}

/// Row-wise gamma = sigmoid(w . [a_i, b]); gamma a_i + (1 - gamma) b.
inline Mat gate(const Mat& a, const Mat& b_row, const Mat& w) {
  const auto d = a.cols();
  Mat out(a.rows(), d);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const Eigen::Index bi = b_row.rows() == 1 ? 0 : i;
    double z = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) z += w(0, j) * a(i, j) + w(0, d + j) * b_row(bi, j);
    const double g = sigmoid(z);
    for (Eigen::Index j = 0; j < d; ++j) out(i, j) = g * a(i, j) + (1.0 - g) * b_row(bi, j);
  }
  return out;
}

inline double cosine(const Mat& a, const Mat& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (Eigen::Index j = 0; j < a.size(); ++j) {
    dot += a(j) * b(j);
    na += a(j) * a(j);
    nb += b(j) * b(j);
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

}  // namespace trea::oracle

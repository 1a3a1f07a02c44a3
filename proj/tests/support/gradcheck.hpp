#pragma once

#include "trea/ad/tensor.hpp"
#include "trea/nn/params.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>

namespace trea::testing {

inline ad::Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  ad::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;
  std::size_t checked = 0;
};

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

/// Central differences over every scalar of every registered tensor.
inline GradCheckResult grad_check(const nn::ParamSet& params, const std::function<ad::Tensor()>& loss,
                                  double step = 1e-4) {
  auto ps = params;
  ps.zero_grad();
  ad::backward(loss());
  GradCheckResult out;
  for (const auto& entry : ps.entries()) {
    ad::Tensor t = entry.tensor;
    const ad::Matrix analytic = t.grad().size() ? t.grad() : ad::Matrix::Zero(t.rows(), t.cols());
    for (Eigen::Index i = 0; i < t.value().size(); ++i) {
      double& x = t.mutable_value().data()[i];
      const double saved = x;
      double plus, minus;
      {
        ad::NoGradGuard guard;
        x = saved + step;
        plus = loss().scalar();
        x = saved - step;
        minus = loss().scalar();
      }
      x = saved;
      const double numeric = (plus - minus) / (2 * step);
      const double err = relative_error(analytic.data()[i], numeric);
      ++out.checked;
      if (err > out.max_rel_error) {
        out.max_rel_error = err;
        out.worst = entry.name + "[" + std::to_string(i) + "] analytic=" + std::to_string(analytic.data()[i]) +
                    " numeric=" + std::to_string(numeric);
      }
    }
  }
  return out;
}

}  // namespace trea::testing

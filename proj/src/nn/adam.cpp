#include "trea/nn/adam.hpp"

#include <cmath>

namespace trea::nn {

double clip_gradients(ParamSet& params, ClipMode mode, double threshold) {
  const double norm = params.grad_norm();
  for (const auto& e : params.entries()) {
    auto t = e.tensor;
    if (t.grad().size() == 0) continue;
    if (mode == ClipMode::global_norm) {
      if (norm > threshold) t.mutable_grad() *= threshold / norm;
    } else {
      t.mutable_grad() = t.grad().cwiseMax(-threshold).cwiseMin(threshold);
    }
  }
  return norm;
}

Adam::Adam(const ParamSet& params, AdamOptions options) : params_(params), options_(options) {
  for (const auto& e : params_.entries()) {
    first_.push_back(ad::Matrix::Zero(e.tensor.rows(), e.tensor.cols()));
    second_.push_back(ad::Matrix::Zero(e.tensor.rows(), e.tensor.cols()));
  }
}

void Adam::step() {
  ++steps_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(steps_));
  std::size_t i = 0;
  for (const auto& e : params_.entries()) {
    auto t = e.tensor;
    auto& m = first_[i];
    auto& v = second_[i];
    ++i;
    if (t.grad().size() == 0) {
      m *= options_.beta1;
      v *= options_.beta2;
    } else {
      m = options_.beta1 * m + (1.0 - options_.beta1) * t.grad();
      v = options_.beta2 * v + (1.0 - options_.beta2) * t.grad().cwiseAbs2();
    }
    const double step_size = options_.learning_rate / bc1;
    t.mutable_value().array() -=
        step_size * m.array() / ((v.array() / bc2).sqrt() + options_.epsilon);
  }
}

}  // namespace trea::nn

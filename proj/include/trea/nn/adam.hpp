#pragma once

#include "trea/nn/params.hpp"

#include <vector>

namespace trea::nn {

enum class ClipMode { global_norm, value };

/// Clips gradients in place. Returns the global norm before clipping.
/// Parameters that received no gradient this step are treated as zero.
double clip_gradients(ParamSet& params, ClipMode mode, double threshold);

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(const ParamSet& params, AdamOptions options);

  void step();
  long steps() const { return steps_; }

 private:
  ParamSet params_;
  AdamOptions options_;
  std::vector<ad::Matrix> first_;
  std::vector<ad::Matrix> second_;
  long steps_ = 0;
};

}  // namespace trea::nn

#pragma once

#include "trea/ad/tensor.hpp"

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace trea::nn {

/// Seeded source of initial parameter values.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  ad::Matrix uniform(Eigen::Index rows, Eigen::Index cols, double limit);
  /// Glorot uniform for a (fan_out x fan_in) weight.
  ad::Matrix xavier(Eigen::Index rows, Eigen::Index cols);

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

/// Ordered, named view of the learnable tensors of a model.
class ParamSet {
 public:
  struct Entry {
    std::string name;
    ad::Tensor tensor;
  };

  void add(std::string name, ad::Tensor tensor);
  void append(const ParamSet& other);

  std::span<const Entry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();
  double grad_norm() const;

  /// Binary checkpoint: magic, entry count, then (name, rows, cols, values).
  void save(std::ostream& out) const;
  /// Overwrites values in place; names and shapes must match exactly.
  void load(std::istream& in);

  /// Deep copy of the current values, in entry order.
  std::vector<ad::Matrix> snapshot() const;
  void restore(const std::vector<ad::Matrix>& values);

 private:
  std::vector<Entry> entries_;
};

}  // namespace trea::nn

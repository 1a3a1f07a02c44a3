#pragma once

// Minimal reverse-mode automatic differentiation over dense double matrices.
//
// A Tensor is a shared handle to a node in a dynamically built graph. Leaf
// parameters persist across steps and accumulate gradients; every other
// node lives as long as something downstream references it. Calling
// backward() on a 1x1 result runs the recorded adjoints in reverse
// topological order.

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace trea::ad {

using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void accumulate(const Matrix& g);
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor constant(Matrix value);
  static Tensor parameter(Matrix value);
  static Tensor zeros(Eigen::Index rows, Eigen::Index cols);

  const Matrix& value() const { return node_->value; }
  /// Direct write access, for optimizers and finite-difference probes.
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  Matrix& mutable_grad() { return node_->grad; }

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  bool empty() const { return !node_ || node_->value.size() == 0; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  double scalar() const;
  void zero_grad();

  const std::shared_ptr<Node>& node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node> node_;
};

/// While alive, newly created nodes record no adjoints (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

void backward(const Tensor& root);

// --- linear algebra -------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);
/// a * b^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);
/// Constant sparse left factor: s * a.
Tensor spmm(const SparseMatrix& s, const Tensor& a);
Tensor transpose(const Tensor& a);

// --- elementwise ----------------------------------------------------------
Tensor add(const Tensor& a, const Tensor& b);
/// a (m x n) + row (1 x n) broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& row);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
/// 1 - a
Tensor one_minus(const Tensor& a);
/// a (m x n) with row i multiplied by w(i) for w (m x 1).
Tensor scale_rows(const Tensor& a, const Tensor& w);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);

// --- normalisation --------------------------------------------------------
Tensor softmax_rows(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// --- shape ----------------------------------------------------------------
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& a, Eigen::Index start, Eigen::Index count);
Tensor slice_rows(const Tensor& a, Eigen::Index start, Eigen::Index count);
/// Gathers rows by index; a negative index yields a zero row.
Tensor gather_rows(const Tensor& a, std::span<const long> indices);
/// Repeats a 1 x n row m times.
Tensor broadcast_rows(const Tensor& row, Eigen::Index m);

// --- reductions -----------------------------------------------------------
Tensor sum(const Tensor& a);
Tensor pick(const Tensor& a, Eigen::Index r, Eigen::Index c);
/// m x 1 column of a(i, cols[i]).
Tensor pick_per_row(const Tensor& a, std::span<const long> cols);
/// Cosine similarity of two 1 x n rows; defined as 0 when either is zero.
Tensor cosine(const Tensor& a, const Tensor& b);

}  // namespace trea::ad

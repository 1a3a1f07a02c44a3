#include "trea/ad/tensor.hpp"

#include "trea/error.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <unordered_set>
#include <utility>

namespace trea::ad {

namespace {

thread_local bool g_grad_enabled = true;

Tensor make(Matrix value, std::initializer_list<Tensor> parents, std::function<void(Node&)> bw) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (g_grad_enabled) {
    bool any = false;
    for (const auto& p : parents) any = any || p.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(parents.size());
      for (const auto& p : parents) node->parents.push_back(p.node());
      node->backward = std::move(bw);
    }
  }
  return Tensor(std::move(node));
}

Tensor make_n(Matrix value, std::span<const Tensor> parents, std::function<void(Node&)> bw) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (g_grad_enabled) {
    bool any = false;
    for (const auto& p : parents) any = any || p.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(parents.size());
      for (const auto& p : parents) node->parents.push_back(p.node());
      node->backward = std::move(bw);
    }
  }
  return Tensor(std::move(node));
}

void acc(const std::shared_ptr<Node>& n, const Matrix& g) {
  if (n->requires_grad) n->accumulate(g);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                        std::to_string(b.cols()));
  }
}

}  // namespace

void Node::accumulate(const Matrix& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Tensor Tensor::constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Tensor(std::move(node));
}

Tensor Tensor::parameter(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Eigen::Index rows, Eigen::Index cols) { return constant(Matrix::Zero(rows, cols)); }

double Tensor::scalar() const {
  if (rows() != 1 || cols() != 1) throw ContractError("scalar(): tensor is not 1x1");
  return node_->value(0, 0);
}

void Tensor::zero_grad() { node_->grad = Matrix::Zero(rows(), cols()); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

void backward(const Tensor& root) {
  if (root.rows() != 1 || root.cols() != 1) throw ContractError("backward(): root must be 1x1");
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && parent->backward && seen.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }

  root.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && node->grad.size() != 0) node->backward(*node);
  }
}

// --- linear algebra -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) throw ContractError("matmul: inner dimension mismatch");
  return make(a.value() * b.value(), {a, b}, [](Node& self) {
    const auto& pa = self.parents[0];
    const auto& pb = self.parents[1];
    if (pa->requires_grad) pa->accumulate(self.grad * pb->value.transpose());
    if (pb->requires_grad) pb->accumulate(pa->value.transpose() * self.grad);
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) throw ContractError("matmul_nt: inner dimension mismatch");
  return make(a.value() * b.value().transpose(), {a, b}, [](Node& self) {
    const auto& pa = self.parents[0];
    const auto& pb = self.parents[1];
    if (pa->requires_grad) pa->accumulate(self.grad * pb->value);
    if (pb->requires_grad) pb->accumulate(self.grad.transpose() * pa->value);
  });
}

Tensor spmm(const SparseMatrix& s, const Tensor& a) {
  if (s.cols() != a.rows()) throw ContractError("spmm: inner dimension mismatch");
  Matrix value = s * a.value();
  return make(std::move(value), {a}, [s](Node& self) {
    acc(self.parents[0], Matrix(s.transpose() * self.grad));
  });
}

Tensor transpose(const Tensor& a) {
  return make(a.value().transpose(), {a},
              [](Node& self) { acc(self.parents[0], self.grad.transpose()); });
}

// --- elementwise ----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  return make(a.value() + b.value(), {a, b}, [](Node& self) {
    acc(self.parents[0], self.grad);
    acc(self.parents[1], self.grad);
  });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ContractError("add_row: row shape mismatch");
  Matrix value = a.value().rowwise() + row.value().row(0);
  return make(std::move(value), {a, row}, [](Node& self) {
    acc(self.parents[0], self.grad);
    acc(self.parents[1], self.grad.colwise().sum());
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  return make(a.value() - b.value(), {a, b}, [](Node& self) {
    acc(self.parents[0], self.grad);
    acc(self.parents[1], -self.grad);
  });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "hadamard");
  return make(a.value().cwiseProduct(b.value()), {a, b}, [](Node& self) {
    const auto& pa = self.parents[0];
    const auto& pb = self.parents[1];
    if (pa->requires_grad) pa->accumulate(self.grad.cwiseProduct(pb->value));
    if (pb->requires_grad) pb->accumulate(self.grad.cwiseProduct(pa->value));
  });
}

Tensor scale(const Tensor& a, double c) {
  return make(a.value() * c, {a}, [c](Node& self) { acc(self.parents[0], self.grad * c); });
}

Tensor one_minus(const Tensor& a) {
  Matrix value = (1.0 - a.value().array()).matrix();
  return make(std::move(value), {a}, [](Node& self) { acc(self.parents[0], -self.grad); });
}

Tensor scale_rows(const Tensor& a, const Tensor& w) {
  if (w.cols() != 1 || w.rows() != a.rows()) throw ContractError("scale_rows: weight shape mismatch");
  Matrix value = a.value().array().colwise() * w.value().col(0).array();
  return make(std::move(value), {a, w}, [](Node& self) {
    const auto& pa = self.parents[0];
    const auto& pw = self.parents[1];
    if (pa->requires_grad) {
      pa->accumulate(Matrix(self.grad.array().colwise() * pw->value.col(0).array()));
    }
    if (pw->requires_grad) pw->accumulate(self.grad.cwiseProduct(pa->value).rowwise().sum());
  });
}

Tensor sigmoid(const Tensor& a) {
  Matrix value = a.value().unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  return make(std::move(value), {a}, [](Node& self) {
    const Matrix& y = self.value;
    acc(self.parents[0], Matrix(self.grad.array() * y.array() * (1.0 - y.array())));
  });
}

Tensor tanh(const Tensor& a) {
  Matrix value = a.value().array().tanh().matrix();
  return make(std::move(value), {a}, [](Node& self) {
    const Matrix& y = self.value;
    acc(self.parents[0], Matrix(self.grad.array() * (1.0 - y.array().square())));
  });
}

Tensor relu(const Tensor& a) {
  Matrix value = a.value().cwiseMax(0.0);
  return make(std::move(value), {a}, [](Node& self) {
    const Matrix& x = self.parents[0]->value;
    acc(self.parents[0], Matrix((x.array() > 0.0).select(self.grad.array(), 0.0)));
  });
}

// --- normalisation --------------------------------------------------------

namespace {

Matrix softmax_value(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    auto e = (x.row(r).array() - m).exp();
    out.row(r) = e / e.sum();
  }
  return out;
}

}  // namespace

Tensor softmax_rows(const Tensor& a) {
  return make(softmax_value(a.value()), {a}, [](Node& self) {
    const Matrix& s = self.value;
    Matrix g(s.rows(), s.cols());
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
      const double dot = self.grad.row(r).dot(s.row(r));
      g.row(r) = s.row(r).array() * (self.grad.row(r).array() - dot);
    }
    acc(self.parents[0], g);
  });
}

Tensor log_softmax_rows(const Tensor& a) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    const double lse = m + std::log((x.row(r).array() - m).exp().sum());
    out.row(r) = x.row(r).array() - lse;
  }
  return make(std::move(out), {a}, [](Node& self) {
    const Matrix s = self.value.array().exp().matrix();
    Matrix g = self.grad;
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      const double total = self.grad.row(r).sum();
      g.row(r) -= s.row(r) * total;
    }
    acc(self.parents[0], g);
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const Eigen::Index n = x.cols();
  if (gain.rows() != 1 || gain.cols() != n || bias.rows() != 1 || bias.cols() != n) {
    throw ContractError("layer_norm: parameter shape mismatch");
  }
  Matrix xhat(x.rows(), n);
  Eigen::VectorXd inv(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mu = x.value().row(r).mean();
    const double var = (x.value().row(r).array() - mu).square().mean();
    inv(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x.value().row(r).array() - mu) * inv(r);
  }
  Matrix out = (xhat.array().rowwise() * gain.value().row(0).array()).matrix();
  out.rowwise() += bias.value().row(0);
  return make(std::move(out), {x, gain, bias}, [xhat, inv, n](Node& self) {
    const auto& px = self.parents[0];
    const auto& pg = self.parents[1];
    const auto& pb = self.parents[2];
    if (pg->requires_grad) pg->accumulate(self.grad.cwiseProduct(xhat).colwise().sum());
    if (pb->requires_grad) pb->accumulate(self.grad.colwise().sum());
    if (px->requires_grad) {
      Matrix dxhat = self.grad.array().rowwise() * pg->value.row(0).array();
      Matrix dx(dxhat.rows(), n);
      for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
        const double s1 = dxhat.row(r).sum();
        const double s2 = dxhat.row(r).dot(xhat.row(r));
        dx.row(r) = (inv(r) / static_cast<double>(n)) *
                    (static_cast<double>(n) * dxhat.row(r).array() - s1 - xhat.row(r).array() * s2);
      }
      px->accumulate(dx);
    }
  });
}

// --- shape ----------------------------------------------------------------

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ContractError("concat_cols: row count mismatch");
    cols += p.cols();
  }
  Matrix value(rows, cols);
  std::vector<Eigen::Index> widths;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    value.middleCols(at, p.cols()) = p.value();
    widths.push_back(p.cols());
    at += p.cols();
  }
  return make_n(std::move(value), parts, [widths](Node& self) {
    Eigen::Index off = 0;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      acc(self.parents[i], self.grad.middleCols(off, widths[i]));
      off += widths[i];
    }
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ContractError("concat_rows: column count mismatch");
    rows += p.rows();
  }
  Matrix value(rows, cols);
  std::vector<Eigen::Index> heights;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    value.middleRows(at, p.rows()) = p.value();
    heights.push_back(p.rows());
    at += p.rows();
  }
  return make_n(std::move(value), parts, [heights](Node& self) {
    Eigen::Index off = 0;
    for (std::size_t i = 0; i < heights.size(); ++i) {
      acc(self.parents[i], self.grad.middleRows(off, heights[i]));
      off += heights[i];
    }
  });
}

Tensor slice_cols(const Tensor& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw ContractError("slice_cols: out of range");
  return make(a.value().middleCols(start, count), {a}, [start, count](Node& self) {
    const auto& p = self.parents[0];
    Matrix g = Matrix::Zero(p->value.rows(), p->value.cols());
    g.middleCols(start, count) = self.grad;
    acc(p, g);
  });
}

Tensor slice_rows(const Tensor& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw ContractError("slice_rows: out of range");
  return make(a.value().middleRows(start, count), {a}, [start, count](Node& self) {
    const auto& p = self.parents[0];
    Matrix g = Matrix::Zero(p->value.rows(), p->value.cols());
    g.middleRows(start, count) = self.grad;
    acc(p, g);
  });
}

Tensor gather_rows(const Tensor& a, std::span<const long> indices) {
  Matrix value = Matrix::Zero(static_cast<Eigen::Index>(indices.size()), a.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const long idx = indices[i];
    if (idx >= a.rows()) throw ContractError("gather_rows: index out of range");
    if (idx >= 0) value.row(static_cast<Eigen::Index>(i)) = a.value().row(idx);
  }
  std::vector<long> idx(indices.begin(), indices.end());
  return make(std::move(value), {a}, [idx = std::move(idx)](Node& self) {
    const auto& p = self.parents[0];
    Matrix g = Matrix::Zero(p->value.rows(), p->value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] >= 0) g.row(idx[i]) += self.grad.row(static_cast<Eigen::Index>(i));
    }
    acc(p, g);
  });
}

Tensor broadcast_rows(const Tensor& row, Eigen::Index m) {
  if (row.rows() != 1) throw ContractError("broadcast_rows: input must be a single row");
  Matrix value = row.value().replicate(m, 1);
  return make(std::move(value), {row},
              [](Node& self) { acc(self.parents[0], self.grad.colwise().sum()); });
}

// --- reductions -----------------------------------------------------------

Tensor sum(const Tensor& a) {
  Matrix value(1, 1);
  value(0, 0) = a.value().sum();
  return make(std::move(value), {a}, [](Node& self) {
    const auto& p = self.parents[0];
    acc(p, Matrix::Constant(p->value.rows(), p->value.cols(), self.grad(0, 0)));
  });
}

Tensor pick(const Tensor& a, Eigen::Index r, Eigen::Index c) {
  if (r < 0 || c < 0 || r >= a.rows() || c >= a.cols()) throw ContractError("pick: out of range");
  Matrix value(1, 1);
  value(0, 0) = a.value()(r, c);
  return make(std::move(value), {a}, [r, c](Node& self) {
    const auto& p = self.parents[0];
    Matrix g = Matrix::Zero(p->value.rows(), p->value.cols());
    g(r, c) = self.grad(0, 0);
    acc(p, g);
  });
}

Tensor pick_per_row(const Tensor& a, std::span<const long> cols) {
  if (static_cast<Eigen::Index>(cols.size()) != a.rows()) throw ContractError("pick_per_row: one column per row");
  Matrix value(a.rows(), 1);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const long c = cols[static_cast<std::size_t>(i)];
    if (c < 0 || c >= a.cols()) throw ContractError("pick_per_row: column out of range");
    value(i, 0) = a.value()(i, c);
  }
  std::vector<long> index(cols.begin(), cols.end());
  return make(std::move(value), {a}, [index = std::move(index)](Node& self) {
    const auto& p = self.parents[0];
    Matrix g = Matrix::Zero(p->value.rows(), p->value.cols());
    for (std::size_t i = 0; i < index.size(); ++i) g(static_cast<Eigen::Index>(i), index[i]) = self.grad(static_cast<Eigen::Index>(i), 0);
    acc(p, g);
  });
}

Tensor cosine(const Tensor& a, const Tensor& b) {
  if (a.rows() != 1 || b.rows() != 1 || a.cols() != b.cols()) {
    throw ContractError("cosine: inputs must be rows of equal width");
  }
  const double na = a.value().norm();
  const double nb = b.value().norm();
  Matrix value = Matrix::Zero(1, 1);
  if (na == 0.0 || nb == 0.0) return make(std::move(value), {a, b}, [](Node&) {});
  const double c = a.value().row(0).dot(b.value().row(0)) / (na * nb);
  value(0, 0) = c;
  return make(std::move(value), {a, b}, [na, nb, c](Node& self) {
    const auto& pa = self.parents[0];
    const auto& pb = self.parents[1];
    const double g = self.grad(0, 0);
    if (pa->requires_grad) pa->accumulate(g * (pb->value / (na * nb) - c * pa->value / (na * na)));
    if (pb->requires_grad) pb->accumulate(g * (pa->value / (na * nb) - c * pb->value / (nb * nb)));
  });
}

}  // namespace trea::ad

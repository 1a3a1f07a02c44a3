#include "doctest.h"

#include "support/gradcheck.hpp"
#include "trea/ad/tensor.hpp"
#include "trea/error.hpp"
#include "trea/nn/adam.hpp"
#include "trea/nn/layers.hpp"

#include <array>
#include <cmath>
#include <sstream>

using namespace trea;
using trea::testing::grad_check;
using trea::testing::random_matrix;

namespace {

// Contract an arbitrary-shaped output with fixed random weights so every
// output element reaches the scalar loss with a distinct coefficient.
ad::Tensor probe(const ad::Tensor& out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ad::sum(ad::hadamard(out, ad::Tensor::constant(random_matrix(out.rows(), out.cols(), rng))));
}

struct Fixture {
  std::mt19937_64 rng{42};
  nn::ParamSet params;
  ad::Tensor make(Eigen::Index r, Eigen::Index c, const std::string& name, double scale = 1.0) {
    auto t = ad::Tensor::parameter(random_matrix(r, c, rng, scale));
    params.add(name, t);
    return t;
  }
  void expect_ok(const std::function<ad::Tensor()>& f) {
    const auto res = grad_check(params, f);
    INFO(res.worst);
    CHECK(res.max_rel_error < 1e-4);
  }
};

}  // namespace

TEST_CASE("elementwise ops have correct gradients") {
  Fixture fx;
  auto a = fx.make(3, 4, "a");
  auto b = fx.make(3, 4, "b");
  auto row = fx.make(1, 4, "row");
  auto w = fx.make(3, 1, "w");
  fx.expect_ok([&] { return probe(ad::add(a, b), 1); });
  fx.expect_ok([&] { return probe(ad::sub(a, b), 2); });
  fx.expect_ok([&] { return probe(ad::hadamard(a, b), 3); });
  fx.expect_ok([&] { return probe(ad::scale(a, -2.5), 4); });
  fx.expect_ok([&] { return probe(ad::one_minus(a), 5); });
  fx.expect_ok([&] { return probe(ad::add_row(a, row), 6); });
  fx.expect_ok([&] { return probe(ad::scale_rows(a, w), 7); });
  fx.expect_ok([&] { return probe(ad::sigmoid(a), 8); });
  fx.expect_ok([&] { return probe(ad::tanh(a), 9); });
  fx.expect_ok([&] { return probe(ad::relu(ad::add(a, ad::Tensor::constant(ad::Matrix::Constant(3, 4, 0.05)))), 10); });
}

TEST_CASE("matrix ops have correct gradients") {
  Fixture fx;
  auto a = fx.make(3, 4, "a");
  auto b = fx.make(4, 2, "b");
  auto c = fx.make(5, 4, "c");
  fx.expect_ok([&] { return probe(ad::matmul(a, b), 11); });
  fx.expect_ok([&] { return probe(ad::matmul_nt(a, c), 12); });
  fx.expect_ok([&] { return probe(ad::transpose(a), 13); });
  ad::SparseMatrix s(2, 3);
  s.insert(0, 1) = 0.5;
  s.insert(1, 0) = -1.5;
  s.insert(1, 2) = 2.0;
  s.makeCompressed();
  fx.expect_ok([&] { return probe(ad::spmm(s, a), 14); });
}

TEST_CASE("normalisation ops have correct gradients") {
  Fixture fx;
  auto a = fx.make(3, 5, "a");
  auto gain = fx.make(1, 5, "gain");
  auto bias = fx.make(1, 5, "bias");
  fx.expect_ok([&] { return probe(ad::softmax_rows(a), 15); });
  fx.expect_ok([&] { return probe(ad::log_softmax_rows(a), 16); });
  fx.expect_ok([&] { return probe(ad::layer_norm(a, gain, bias), 17); });
}

TEST_CASE("shape ops have correct gradients") {
  Fixture fx;
  auto a = fx.make(3, 4, "a");
  auto b = fx.make(3, 2, "b");
  auto r = fx.make(1, 4, "r");
  fx.expect_ok([&] {
    const std::array<ad::Tensor, 2> parts{a, b};
    return probe(ad::concat_cols(parts), 18);
  });
  fx.expect_ok([&] {
    const std::array<ad::Tensor, 2> parts{a, r};
    return probe(ad::concat_rows(parts), 19);
  });
  fx.expect_ok([&] { return probe(ad::slice_cols(a, 1, 2), 20); });
  fx.expect_ok([&] { return probe(ad::slice_rows(a, 1, 2), 21); });
  fx.expect_ok([&] {
    const std::array<long, 5> idx{2, -1, 0, 2, 1};
    return probe(ad::gather_rows(a, idx), 22);
  });
  fx.expect_ok([&] { return probe(ad::broadcast_rows(r, 3), 23); });
}

TEST_CASE("reductions have correct gradients") {
  Fixture fx;
  auto a = fx.make(1, 5, "a");
  auto b = fx.make(1, 5, "b");
  fx.expect_ok([&] { return ad::cosine(a, b); });
  fx.expect_ok([&] { return ad::pick(ad::log_softmax_rows(a), 0, 3); });
  fx.expect_ok([&] { return ad::sum(ad::hadamard(a, a)); });
  auto m = fx.make(3, 4, "m");
  fx.expect_ok([&] {
    const std::array<long, 3> cols{2, 0, 2};
    return probe(ad::pick_per_row(ad::log_softmax_rows(m), cols), 24);
  });
}

TEST_CASE("gather with negative index yields a zero row") {
  auto a = ad::Tensor::constant(ad::Matrix::Ones(2, 3));
  const std::array<long, 2> idx{-1, 1};
  auto g = ad::gather_rows(a, idx);
  CHECK(g.value().row(0).isZero());
  CHECK(g.value().row(1).isOnes());
}

TEST_CASE("cosine of a zero vector is zero with zero gradient") {
  auto a = ad::Tensor::parameter(ad::Matrix::Zero(1, 3));
  auto b = ad::Tensor::parameter(ad::Matrix::Ones(1, 3));
  auto c = ad::cosine(a, b);
  CHECK(c.scalar() == 0.0);
  ad::backward(c);
  CHECK(std::isfinite(a.grad().sum()));
}

TEST_CASE("softmax is stable for large logits") {
  ad::Matrix m(1, 3);
  m << 1000.0, 999.0, -1000.0;
  auto s = ad::softmax_rows(ad::Tensor::constant(m));
  CHECK(s.value().sum() == doctest::Approx(1.0));
  CHECK(std::isfinite(ad::log_softmax_rows(ad::Tensor::constant(m)).value()(2)));
}

TEST_CASE("no-grad guard records no adjoints") {
  auto a = ad::Tensor::parameter(ad::Matrix::Ones(2, 2));
  ad::Tensor y;
  {
    ad::NoGradGuard guard;
    y = ad::sum(ad::hadamard(a, a));
  }
  CHECK_FALSE(y.requires_grad());
  CHECK(ad::grad_enabled());
}

TEST_CASE("backward rejects non-scalar roots") {
  auto a = ad::Tensor::parameter(ad::Matrix::Ones(2, 2));
  CHECK_THROWS_AS(ad::backward(a), ContractError);
}

TEST_CASE("shared subexpressions accumulate gradients") {
  auto a = ad::Tensor::parameter(ad::Matrix::Constant(1, 1, 3.0));
  auto y = ad::add(ad::hadamard(a, a), a);  // a^2 + a
  ad::backward(y);
  CHECK(a.grad()(0, 0) == doctest::Approx(7.0));
}

TEST_CASE("layers have correct gradients") {
  std::mt19937_64 rng(5);
  nn::Initializer init(9);
  nn::ParamSet ps;
  auto attn = nn::LinearAttention::make(4, 3, init);
  attn.register_into(ps, "attn");
  auto gate = nn::GateFusion::make(4, init);
  gate.register_into(ps, "gate");
  auto mha = nn::MultiHeadAttention::make(4, 2, init);
  mha.register_into(ps, "mha");
  auto ffn = nn::FeedForward::make(4, 6, 4, init);
  ffn.register_into(ps, "ffn");
  auto ln = nn::LayerNorm::make(4);
  ln.register_into(ps, "ln");
  auto x = ad::Tensor::parameter(random_matrix(3, 4, rng));
  auto y = ad::Tensor::parameter(random_matrix(1, 4, rng));
  auto mem = ad::Tensor::parameter(random_matrix(5, 4, rng));
  ps.add("x", x);
  ps.add("y", y);
  ps.add("mem", mem);
  auto loss = [&] {
    auto pooled = nn::linear_attention(x, attn);
    auto fused = nn::gate(x, y, gate);
    auto self = mha(fused, fused, true);
    auto cross = mha(self, mem, false);
    auto h = ffn(ln(cross));
    return ad::add(probe(h, 30), probe(pooled, 31));
  };
  const auto res = grad_check(ps, loss);
  INFO(res.worst);
  CHECK(res.max_rel_error < 1e-4);
}

TEST_CASE("linear attention special cases") {
  nn::Initializer init(1);
  auto attn = nn::LinearAttention::make(3, 3, init);
  ad::Matrix row(1, 3);
  row << 0.3, -1.0, 2.0;
  CHECK(nn::linear_attention(ad::Tensor::constant(row), attn).value().isApprox(row));

  attn.weight.mutable_value().setZero();
  attn.scorer.mutable_value().setZero();
  ad::Matrix two(2, 3);
  two << 1, 2, 3, 5, 6, 7;
  ad::Matrix mean = (two.row(0) + two.row(1)) / 2;
  CHECK(nn::linear_attention(ad::Tensor::constant(two), attn).value().isApprox(mean));
  CHECK_THROWS_AS(nn::linear_attention(ad::Tensor::zeros(0, 3), attn), EmptyInputError);
}

TEST_CASE("causal self-attention ignores future positions") {
  nn::Initializer init(3);
  std::mt19937_64 rng(4);
  auto mha = nn::MultiHeadAttention::make(4, 2, init);
  ad::Matrix x = random_matrix(4, 4, rng);
  auto before = mha(ad::Tensor::constant(x), ad::Tensor::constant(x), true).value();
  x.row(3) *= -7.0;
  auto after = mha(ad::Tensor::constant(x), ad::Tensor::constant(x), true).value();
  CHECK(before.topRows(3).isApprox(after.topRows(3), 1e-12));
  CHECK_THROWS_AS(nn::MultiHeadAttention::make(5, 2, init), ConfigError);
}

TEST_CASE("global-norm clipping bounds the gradient norm") {
  nn::ParamSet ps;
  auto a = ad::Tensor::parameter(ad::Matrix::Zero(1, 2));
  ps.add("a", a);
  a.mutable_grad() = ad::Matrix::Constant(1, 2, 3.0);
  const double before = nn::clip_gradients(ps, nn::ClipMode::global_norm, 0.02);
  CHECK(before == doctest::Approx(std::sqrt(18.0)));
  CHECK(ps.grad_norm() <= 0.02 + 1e-12);

  a.mutable_grad() = ad::Matrix::Constant(1, 2, -3.0);
  nn::clip_gradients(ps, nn::ClipMode::value, 0.5);
  CHECK(a.grad().maxCoeff() == doctest::Approx(-0.5));
}

TEST_CASE("adam first step moves each weight by the learning rate") {
  nn::ParamSet ps;
  ad::Matrix init(1, 3);
  init << 1.0, -2.0, 0.5;
  auto a = ad::Tensor::parameter(init);
  ps.add("a", a);
  ad::Matrix g(1, 3);
  g << 0.3, -4.0, 1e-3;
  a.mutable_grad() = g;
  nn::Adam adam(ps, {});
  adam.step();
  ad::Matrix expected = init.array() - 1e-3 * g.array().sign();
  CHECK(a.value().isApprox(expected, 1e-6));
  CHECK(adam.steps() == 1);
}

TEST_CASE("param set round-trips through the binary format") {
  std::mt19937_64 rng(8);
  nn::ParamSet ps;
  auto a = ad::Tensor::parameter(random_matrix(2, 3, rng));
  auto b = ad::Tensor::parameter(random_matrix(4, 1, rng));
  ps.add("a", a);
  ps.add("b", b);
  std::stringstream buf;
  ps.save(buf);
  const auto saved = ps.snapshot();
  a.mutable_value().setZero();
  b.mutable_value().setZero();
  ps.load(buf);
  CHECK(a.value() == saved[0]);
  CHECK(b.value() == saved[1]);

  nn::ParamSet other;
  other.add("a", ad::Tensor::parameter(ad::Matrix::Zero(2, 2)));
  std::stringstream buf2;
  ps.save(buf2);
  CHECK_THROWS_AS(other.load(buf2), ValidationError);
}

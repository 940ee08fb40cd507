#include <cmath>
#include <functional>

#include "doctest.h"
#include "dnsd/autodiff.hpp"
#include "fixtures.hpp"
#include "gradcheck.hpp"

using namespace dnsd;
using testing::random_tensor;

namespace {

using UnaryOp = std::function<ad::Var(ad::Tape&, const ad::Var&)>;

// Sum of the op output weighted by a fixed random probe, so every output entry matters.
double check_unary(const Shape& in_shape, const UnaryOp& op, std::uint64_t seed, double shift = 0.0) {
  SplitMix64 rng(seed);
  ad::Parameter p("p", random_tensor(in_shape, rng));
  for (double& v : p.value.values()) v += shift;
  Tensor probe;
  {
    ad::Tape t;
    probe = random_tensor(op(t, t.parameter(p)).shape(), rng);
  }
  const auto rep = testing::gradcheck(
      {&p}, [&](ad::Tape& t) { return ad::sum(ad::mul(op(t, t.parameter(p)), t.constant(probe))); },
      1e-3, 1e-7, testing::Stencil::five_point);
  return rep.worst_rel;
}

}  // namespace

TEST_CASE("matmul forward matches a triple loop") {
  SplitMix64 rng(1);
  const Tensor a = random_tensor({4, 7}, rng), b = random_tensor({7, 3}, rng);
  ad::Tape t;
  const Tensor c = ad::matmul(t.constant(a), t.constant(b)).value();
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 7; ++k) s += a.at(i, k) * b.at(k, j);
      CHECK(std::abs(c.at(i, j) - s) < 1e-12);
    }
  CHECK_THROWS_AS(ad::matmul(t.constant(a), t.constant(a)), ShapeError);
}

TEST_CASE("every differentiable op passes a finite-difference check") {
  const double tol = 1e-6;
  SUBCASE("dense") {
    SplitMix64 rng(3);
    const Tensor b = random_tensor({5, 2}, rng);
    CHECK(check_unary({3, 5}, [&](ad::Tape& t, const ad::Var& x) { return ad::matmul(x, t.constant(b)); }, 1) < tol);
    CHECK(check_unary({5, 3}, [&](ad::Tape& t, const ad::Var& x) { return ad::matmul(t.constant(b.reshaped({2, 5})), x); }, 2) < tol);
    CHECK(check_unary({3, 4}, [](ad::Tape&, const ad::Var& x) { return ad::transpose(x); }, 3) < tol);
    CHECK(check_unary({3, 4}, [](ad::Tape&, const ad::Var& x) { return ad::matmul(x, ad::transpose(x)); }, 4) < tol);
  }
  SUBCASE("elementwise") {
    SplitMix64 rng(5);
    const Tensor other = random_tensor({3, 4}, rng);
    Tensor positive = other;
    for (double& v : positive.values()) v = 1.0 + std::abs(v);
    CHECK(check_unary({3, 4}, [&](ad::Tape& t, const ad::Var& x) { return ad::add(x, t.constant(other)); }, 6) < tol);
    CHECK(check_unary({3, 4}, [&](ad::Tape& t, const ad::Var& x) { return ad::sub(t.constant(other), x); }, 7) < tol);
    CHECK(check_unary({3, 4}, [&](ad::Tape& t, const ad::Var& x) { return ad::mul(x, t.constant(other)); }, 8) < tol);
    CHECK(check_unary({3, 4}, [&](ad::Tape& t, const ad::Var& x) { return ad::div(x, t.constant(positive)); }, 9) < tol);
    CHECK(check_unary({3, 4}, [&](ad::Tape& t, const ad::Var& x) { return ad::div(t.constant(other), x); }, 10, 3.0) < tol);
    CHECK(check_unary({1}, [&](ad::Tape& t, const ad::Var& x) { return ad::mul(x, t.constant(other)); }, 11) < tol);
    CHECK(check_unary({3, 4}, [](ad::Tape&, const ad::Var& x) { return ad::scale(x, -2.5); }, 12) < tol);
    CHECK(check_unary({3, 4}, [](ad::Tape&, const ad::Var& x) { return ad::add_constant(x, 0.7); }, 13) < tol);
    CHECK(check_unary({3, 4}, [](ad::Tape&, const ad::Var& x) { return ad::tanh(x); }, 14) < tol);
    CHECK(check_unary({3, 4}, [](ad::Tape&, const ad::Var& x) { return ad::sigmoid(x); }, 15) < tol);
    CHECK(check_unary({3, 4}, [](ad::Tape&, const ad::Var& x) { return ad::relu(x); }, 16) < tol);
  }
  SUBCASE("reductions") {
    CHECK(check_unary({3, 4}, [](ad::Tape&, const ad::Var& x) { return ad::sum(x); }, 17) < tol);
    CHECK(check_unary({3, 4}, [](ad::Tape&, const ad::Var& x) { return ad::mean(x); }, 18) < tol);
    CHECK(check_unary({5, 6}, [](ad::Tape&, const ad::Var& x) { return ad::row_mean(x); }, 19) < tol);
    CHECK(check_unary({5, 6}, [](ad::Tape&, const ad::Var& x) { return ad::row_std(x, 1e-5); }, 20) < tol);
  }
  SUBCASE("layout") {
    const auto idx = ad::make_index({2, 0, 0, 3, 1});
    const auto targets = ad::make_index({1, 1, 0, 3, 3, 2});
    CHECK(check_unary({2, 6}, [](ad::Tape&, const ad::Var& x) { return ad::reshape(x, {3, 4}); }, 21) < tol);
    CHECK(check_unary({3, 6}, [](ad::Tape&, const ad::Var& x) { return ad::slice_cols(x, 1, 4); }, 22) < tol);
    CHECK(check_unary({3, 2}, [](ad::Tape&, const ad::Var& x) { return ad::concat_cols(x, ad::tanh(x)); }, 23) < tol);
    CHECK(check_unary({2, 3}, [](ad::Tape&, const ad::Var& x) { return ad::tile_rows(x, 4); }, 24) < tol);
    CHECK(check_unary({4, 1}, [](ad::Tape&, const ad::Var& x) { return ad::repeat_cols(x, 3); }, 25) < tol);
    CHECK(check_unary({4, 3}, [&](ad::Tape&, const ad::Var& x) { return ad::gather_rows(x, idx); }, 26) < tol);
    CHECK(check_unary({6, 2}, [&](ad::Tape&, const ad::Var& x) { return ad::segment_sum(x, targets, 5); }, 27) < tol);
  }
}

TEST_CASE("segment_sum matches a scatter loop and leaves untargeted rows zero") {
  SplitMix64 rng(30);
  const Tensor m = random_tensor({6, 2, 3}, rng);
  const auto targets = ad::make_index({4, 0, 4, 2, 0, 4});
  ad::Tape t;
  const Tensor out = ad::segment_sum(t.constant(m), targets, 6).value();
  REQUIRE(out.shape() == Shape{6, 2, 3});
  Tensor expect(Shape{6, 2, 3});
  for (std::size_t e = 0; e < 6; ++e)
    for (std::size_t i = 0; i < 6; ++i) expect[(*targets)[e] * 6 + i] += m[e * 6 + i];
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(std::abs(out[i] - expect[i]) < 1e-15);
  for (std::size_t v : {1u, 3u, 5u})
    for (std::size_t i = 0; i < 6; ++i) CHECK(out[v * 6 + i] == 0.0);
  CHECK_THROWS_AS(ad::segment_sum(t.constant(m), ad::make_index({0, 0, 0, 0, 0, 9}), 6), std::out_of_range);
}

TEST_CASE("chain rule through a shared subexpression accumulates both paths") {
  ad::Parameter p("x", Tensor::scalar(0.3));
  ad::Tape t;
  const ad::Var x = t.parameter(p);
  const ad::Var y = ad::tanh(x);
  // f = y·y + 3y  =>  f' = (2y + 3)(1 − y²)
  t.backward(ad::add(ad::mul(y, y), ad::scale(y, 3.0)));
  const double yv = std::tanh(0.3);
  CHECK(p.grad.item() == doctest::Approx((2 * yv + 3) * (1 - yv * yv)).epsilon(1e-14));
}

TEST_CASE("cross entropy equals a naive softmax oracle") {
  SUBCASE("uniform logits give ln C") {
    ad::Tape t;
    const ad::Var l = ad::cross_entropy(t.constant(Tensor(Shape{4, 3})), {0, 1, 2, 1}, {1, 1, 1, 1});
    CHECK(l.value().item() == doctest::Approx(std::log(3.0)).epsilon(1e-15));
  }
  SUBCASE("random logits with a mask") {
    SplitMix64 rng(40);
    const Tensor logits = random_tensor({5, 3}, rng, 3.0);
    const std::vector<int> labels{2, 0, 1, 1, 0};
    const std::vector<std::uint8_t> mask{1, 0, 1, 1, 1};
    double expect = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
      if (!mask[i]) continue;
      double z = 0.0;
      for (std::size_t k = 0; k < 3; ++k) z += std::exp(logits.at(i, k));
      expect -= std::log(std::exp(logits.at(i, labels[i])) / z);
    }
    expect /= 4.0;
    ad::Tape t;
    CHECK(std::abs(ad::cross_entropy(t.constant(logits), labels, mask).value().item() - expect) < 1e-12);
    ad::Parameter p("logits", logits);
    CHECK(testing::gradcheck({&p}, [&](ad::Tape& tt) {
            return ad::cross_entropy(tt.parameter(p), labels, mask);
          }).worst_rel < 1e-6);
  }
  SUBCASE("huge logits stay finite and approach zero loss") {
    ad::Tape t;
    const Tensor big = Tensor::matrix({{1000.0, 0.0, -1000.0}});
    CHECK(ad::cross_entropy(t.constant(big), {0}, {1}).value().item() < 1e-300);
  }
  SUBCASE("empty mask is rejected") {
    ad::Tape t;
    CHECK_THROWS_AS(ad::cross_entropy(t.constant(Tensor(Shape{2, 3})), {0, 1}, {0, 0}),
                    std::invalid_argument);
  }
}

TEST_CASE("row_std agrees with a two-pass variance") {
  SplitMix64 rng(50);
  Tensor x = random_tensor({4, 6}, rng);
  for (double& v : x.values()) v += 1e6;  // large offset defeats one-pass formulas
  ad::Tape t;
  const Tensor s = ad::row_std(t.constant(x), 1e-5).value();
  for (std::size_t i = 0; i < 4; ++i) {
    double mean = 0.0;
    for (std::size_t k = 0; k < 6; ++k) mean += x.at(i, k);
    mean /= 6;
    double var = 0.0;
    for (std::size_t k = 0; k < 6; ++k) var += (x.at(i, k) - mean) * (x.at(i, k) - mean);
    var /= 6;
    CHECK(s.at(i, 0) == doctest::Approx(std::sqrt(var + 1e-5)).epsilon(1e-9));
  }
}

TEST_CASE("tape misuse and non-finite values are reported") {
  ad::Parameter p("w", Tensor::scalar(1.0));
  ad::Tape t;
  const ad::Var loss = ad::scale(t.parameter(p), 2.0);
  t.backward(loss);
  CHECK(p.grad.item() == 2.0);
  CHECK_THROWS_AS(t.backward(loss), ad::TapeError);

  ad::Tape t2;
  CHECK_THROWS_AS(t2.backward(ad::sum(t2.constant(Tensor(Shape{2})))), ad::TapeError);
  CHECK_THROWS_AS(t2.backward(t2.constant(Tensor(Shape{2}))), ad::TapeError);

  ad::Tape t3;
  CHECK_THROWS_AS(ad::div(t3.constant(Tensor::scalar(1.0)), t3.constant(Tensor::scalar(0.0))),
                  NonFiniteError);
  Tensor bad = Tensor::scalar(std::nan(""));
  CHECK_THROWS_AS(t3.constant(bad), NonFiniteError);

  ad::Tape other;
  const ad::Var foreign = other.constant(Tensor::scalar(1.0));
  CHECK_THROWS_AS(t3.value(foreign), ad::TapeError);
}

TEST_CASE("parameters not reached by the loss receive zero gradients") {
  ad::Parameter used("a", Tensor::scalar(2.0)), unused("b", Tensor(Shape{2, 2}, 5.0));
  unused.grad.fill(9.0);
  ad::Tape t;
  t.parameter(unused);
  t.backward(ad::mul(t.parameter(used), t.parameter(used)));
  CHECK(used.grad.item() == 4.0);
  for (double g : unused.grad.values()) CHECK(g == 0.0);
}

#include <cmath>

#include "doctest.h"
#include "invmih/autograd.hpp"
#include "support/oracles.hpp"

using namespace invmih;

namespace {

// Scalar probe: mean squared distance to a fixed random target.
Var<double> probe(const Var<double>& y, uint64_t seed) {
  return ad::mean_squared_error(y, Var<double>(randn<double>(y.shape(), seed)));
}

void expect_gradient(Var<double> x, const std::function<Var<double>()>& f, double tol = 1e-6) {
  x.zero_grad();
  f().backward();
  const Tensor<double> analytic = x.grad();
  const auto r = testing::check_gradient(x.mutable_value(), analytic, [&] { return f().value()[0]; }, 30);
  CHECK(r.max_rel < tol);
}

}  // namespace

TEST_CASE("tensor shape contracts") {
  CHECK_THROWS_AS(Tensor<float>(Shape{1, 0, 2, 2}), ShapeError);
  CHECK_THROWS_AS(Tensor<float>(Shape{1, 1, 2, 2}, std::vector<float>(3)), ShapeError);
  const Tensor<float> a = randn<float>(Shape{2, 3, 4, 5}, 1);
  const Tensor<float> s = slice_channels(a, 1, 2);
  CHECK(s.shape() == Shape{2, 2, 4, 5});
  CHECK(s.at(1, 0, 3, 4) == a.at(1, 1, 3, 4));
  const std::vector<Tensor<float>> parts = {slice_channels(a, 0, 1), s};
  CHECK(max_abs_diff(concat_channels<float>(parts), a) == 0.0);
  const std::vector<Tensor<float>> halves = {slice_batch(a, 0, 1), slice_batch(a, 1, 1)};
  CHECK(max_abs_diff(concat_batch<float>(halves), a) == 0.0);
}

TEST_CASE("seeded random tensors are reproducible") {
  CHECK(max_abs_diff(randn<float>(Shape{1, 2, 8, 8}, 9), randn<float>(Shape{1, 2, 8, 8}, 9)) == 0.0);
  CHECK(max_abs_diff(randn<float>(Shape{1, 2, 8, 8}, 9), randn<float>(Shape{1, 2, 8, 8}, 10)) > 0.0);
}

TEST_CASE("conv2d matches a direct convolution") {
  for (int k : {1, 3, 5}) {
    CAPTURE(k);
    const Tensor<double> x = randn<double>(Shape{2, 4, 9, 7}, 1);
    const Tensor<double> w = randn<double>(Shape{5, 4, k, k}, 2);
    const Tensor<double> b = randn<double>(Shape{1, 5, 1, 1}, 3);
    const Var<double> y = ad::conv2d(Var<double>(x), Var<double>(w), Var<double>(b));
    CHECK(max_abs_diff(y.value(), testing::naive_conv2d(x, w, b)) < 1e-12);
  }
}

TEST_CASE("conv2d gradients match central differences") {
  Var<double> x(randn<double>(Shape{2, 3, 6, 5}, 1), true);
  Var<double> w(randn<double>(Shape{4, 3, 3, 3}, 2), true);
  Var<double> b(randn<double>(Shape{1, 4, 1, 1}, 3), true);
  auto f = [&] { return probe(ad::conv2d(x, w, b), 4); };
  expect_gradient(x, f);
  expect_gradient(w, f);
  expect_gradient(b, f);
}

TEST_CASE("elementwise op gradients match central differences") {
  Var<double> a(randn<double>(Shape{1, 2, 4, 4}, 1), true);
  Var<double> b(randn<double>(Shape{1, 2, 4, 4}, 2), true);
  expect_gradient(a, [&] { return probe(ad::add(a, b), 3); });
  expect_gradient(b, [&] { return probe(ad::sub(a, b), 3); });
  expect_gradient(a, [&] { return probe(ad::mul(a, b), 3); });
  expect_gradient(b, [&] { return probe(ad::mul(a, b), 3); });
  expect_gradient(a, [&] { return probe(ad::scale(a, 0.7), 3); });
  expect_gradient(a, [&] { return probe(ad::exp(a), 3); });
  expect_gradient(a, [&] { return probe(ad::leaky_relu(a, 0.2), 3); });
  expect_gradient(a, [&] { return probe(ad::clamp_scale(a, 2.0), 3); });
  expect_gradient(a, [&] { return ad::mean_abs_error(a, b); });
}

TEST_CASE("concat and slice gradients route to the right inputs") {
  Var<double> a(randn<double>(Shape{2, 2, 3, 3}, 1), true);
  Var<double> b(randn<double>(Shape{2, 3, 3, 3}, 2), true);
  auto cat = [&] {
    const std::vector<Var<double>> parts = {a, b};
    return ad::concat_channels<double>(parts);
  };
  expect_gradient(a, [&] { return probe(ad::slice_channels(cat(), 1, 3), 5); });
  expect_gradient(b, [&] { return probe(ad::slice_channels(cat(), 1, 3), 5); });
  auto bat = [&] {
    const std::vector<Var<double>> parts = {a, a};
    return ad::concat_batch<double>(parts);
  };
  expect_gradient(a, [&] { return probe(ad::slice_batch(bat(), 1, 2), 6); });
}

TEST_CASE("gradient accumulates over repeated use of one input") {
  Var<double> a(Tensor<double>(Shape{1, 1, 1, 1}, 3.0), true);
  const Var<double> zero(Tensor<double>(Shape{1, 1, 1, 1}, 0.0));
  // (a*a - 0)^2 = a^4 -> 4 a^3 = 108
  ad::mean_squared_error(ad::mul(a, a), zero).backward();
  CHECK(a.grad()[0] == doctest::Approx(108.0));
}

TEST_CASE("straight-through quantizer: identity inside [0,1], zero outside") {
  Tensor<double> v(Shape{1, 1, 1, 6}, std::vector<double>{-0.3, 0.0, 0.2, 0.5, 1.0, 1.4});
  Var<double> x(v, true);
  const Var<double> q = ad::quantize_ste(x);
  CHECK(q.value()[0] == 0.0);
  CHECK(q.value()[3] == doctest::Approx(128.0 / 255.0));
  CHECK(q.value()[5] == 1.0);
  ad::mean_squared_error(q, Var<double>(Tensor<double>(v.shape(), 0.0))).backward();
  // d/dq of mean(q^2) is 2q/6; the quantizer passes it through only inside [0,1].
  for (int i = 0; i < 6; ++i) {
    const double want = (v[i] < 0.0 || v[i] > 1.0) ? 0.0 : 2.0 * q.value()[i] / 6.0;
    CHECK(x.grad()[i] == doctest::Approx(want));
  }
}

TEST_CASE("frozen inputs record no graph") {
  const Var<float> a(randn<float>(Shape{1, 1, 2, 2}, 1));
  const Var<float> y = ad::exp(a);
  CHECK_FALSE(y.requires_grad());
  CHECK(y.node()->parents.empty());
}

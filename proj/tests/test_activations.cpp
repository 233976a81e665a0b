#include <cmath>

#include "doctest.h"
#include "rrauq/activations.hpp"
#include "rrauq/errors.hpp"

using namespace rrauq;

TEST_CASE("droprelu q=1 is relu and q=0 is identity") {
  RngStream rng(1, 0);
  const Tensor x = rng_draw(rng, Distribution::normal(0, 1), {50});
  RngStream r1(2, 0), r2(2, 0);
  const Tensor y1 = activate(x, sample_mask(ActivationKind::droprelu(1.0), x.shape(), r1));
  const Tensor y0 = activate(x, sample_mask(ActivationKind::droprelu(0.0), x.shape(), r2));
  CHECK(y1 == elementwise(UnaryOp::relu, x));
  CHECK(y0 == x);
}

TEST_CASE("activation examples") {
  const Tensor x = Tensor::vector({-2.0, 3.0});
  SampledMask m{Tensor::vector({0.25, 0.25})};
  CHECK(activate(x, m) == Tensor::vector({-0.5, 3.0}));
  const Tensor g = activate_backward(x, m, Tensor::vector({1.0, 1.0}));
  CHECK(g == Tensor::vector({0.25, 1.0}));
  // x = 0 takes the positive branch.
  CHECK(activate_backward(Tensor::vector({0.0}), SampledMask{Tensor::vector({0.0})},
                          Tensor::vector({2.0})) == Tensor::vector({2.0}));
}

TEST_CASE("rrelu slopes lie in [l, u) and deterministic slope is the midpoint") {
  RngStream rng(3, 0);
  const auto kind = ActivationKind::rrelu(0.1, 0.3);
  const auto m = sample_mask(kind, {1000}, rng);
  for (double a : m.slopes.data()) {
    CHECK(a >= 0.1);
    CHECK(a < 0.3);
  }
  const auto d = deterministic_mask(kind, {3});
  for (double a : d.slopes.data()) CHECK(a == doctest::Approx(0.2));
  CHECK(deterministic_mask(ActivationKind::droprelu(0.3), {2}).slopes == Tensor::vector({0, 0}));
}

TEST_CASE("droprelu slope frequency follows q") {
  RngStream rng(4, 0);
  const auto m = sample_mask(ActivationKind::droprelu(0.8), {100000}, rng);
  double zeros = 0.0;
  for (double a : m.slopes.data()) zeros += a == 0.0;
  CHECK(std::fabs(zeros / 100000 - 0.8) < 0.01);
}

TEST_CASE("activation parameter validation") {
  CHECK_THROWS_AS(ActivationKind::droprelu(1.1), ParameterError);
  CHECK_THROWS_AS(ActivationKind::droprelu(-0.1), ParameterError);
  CHECK_THROWS_AS(ActivationKind::rrelu(0.3, 0.1), ParameterError);
  CHECK_THROWS_AS(ActivationKind::rrelu(0.2, 1.0), ParameterError);
  CHECK_NOTHROW(ActivationKind::droprelu(0.0));
}

TEST_CASE("relu and identity do not consume randomness") {
  RngStream rng(5, 0);
  sample_mask(ActivationKind::relu(), {10}, rng);
  sample_mask(ActivationKind::identity(), {10}, rng);
  CHECK(rng.counter() == 0);
}

TEST_CASE("dropout forward and backward") {
  RngStream rng(6, 0);
  const Tensor x({1000}, 1.0);
  const auto r = dropout_forward(x, DropoutSpec{0.2}, DropoutMode::sample, rng);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK((r.y[i] == 0.0 || r.y[i] == doctest::Approx(1.25)));
    CHECK(r.y[i] == r.keep_mask[i]);
  }
  const Tensor g = dropout_backward(Tensor({1000}, 2.0), r.keep_mask);
  CHECK(g[0] == 2.0 * r.keep_mask[0]);
  RngStream rng2(6, 0);
  const auto d = dropout_forward(x, DropoutSpec{0.2}, DropoutMode::deterministic, rng2);
  CHECK(d.y == x);
  CHECK_THROWS_AS(dropout_forward(x, DropoutSpec{1.0}, DropoutMode::sample, rng), ParameterError);
  CHECK_NOTHROW(dropout_forward(x, DropoutSpec{1.0}, DropoutMode::sample, rng, false));
  const auto u = dropout_forward(x, DropoutSpec{1.0}, DropoutMode::sample, rng, false);
  CHECK(reduce_all(u.y, ReduceKind::sum) == 0.0);
}

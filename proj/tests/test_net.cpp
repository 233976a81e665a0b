#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "rrauq/errors.hpp"
#include "rrauq/net.hpp"

using namespace rrauq;

namespace {

NetworkGraph mlp(ActivationKind act, std::size_t in = 3, std::size_t hidden = 5, std::size_t out = 4) {
  NetworkGraph net({in}, {{DenseLayer{in, hidden}, ""},
                          {ActivationLayer{act}, ""},
                          {DenseLayer{hidden, out}, ""}});
  net.initialize(RngStream(1, 0));
  return net;
}

std::vector<int> labels_for(std::size_t n, int classes) {
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % classes);
  return y;
}

}  // namespace

TEST_CASE("shape errors name the offending layer") {
  try {
    NetworkGraph bad({3}, {{DenseLayer{3, 4}, "first"}, {DenseLayer{5, 2}, "second"}});
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("second") != std::string::npos);
  }
  CHECK_THROWS_AS(NetworkGraph({1, 8, 8}, {{Conv2dLayer{2, 4, 3, 1, Padding::same}, ""}}), DimensionError);
}

TEST_CASE("parameter layout folds bias into the last column") {
  const auto net = mlp(ActivationKind::relu());
  REQUIRE(net.params().size() == 2);
  CHECK(net.params()[0].value.shape() == Shape{5, 4});
  CHECK(net.params()[1].value.shape() == Shape{4, 6});
  CHECK(net.parameter_count() == 5 * 4 + 4 * 6);
  for (std::size_t r = 0; r < 5; ++r) CHECK(net.params()[0].value.at(r, 3) == 0.0);
  const double bound = std::sqrt(6.0 / 3.0);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 3; ++c) CHECK(std::fabs(net.params()[0].value.at(r, c)) <= bound);
  NetworkGraph conv({1, 6, 6}, {{Conv2dLayer{1, 2, 3, 1, Padding::valid}, ""}, {FlattenLayer{}, ""}});
  CHECK(conv.params()[0].value.shape() == Shape{2, 10});
  CHECK(conv.output_shape() == Shape{2 * 4 * 4});
}

TEST_CASE("dense forward matches a hand computation") {
  NetworkGraph net({2}, {{DenseLayer{2, 1}, ""}});
  net.param_value(0) = Tensor::matrix({{2.0, -1.0, 0.5}});
  const auto r = forward(net, Tensor::matrix({{1.0, 3.0}}), ForwardMode::deterministic, RngStream(0, 0));
  CHECK(r.logits.at(0, 0) == doctest::Approx(2.0 - 3.0 + 0.5));
}

TEST_CASE("conv forward matches a direct convolution") {
  NetworkGraph net({1, 3, 3}, {{Conv2dLayer{1, 1, 3, 1, Padding::same}, ""}, {FlattenLayer{}, ""}});
  Tensor w({1, 10}, 0.0);
  for (std::size_t k = 0; k < 9; ++k) w[k] = static_cast<double>(k + 1);
  w[9] = 0.5;
  net.param_value(0) = w;
  Tensor x({1, 1, 3, 3});
  for (std::size_t k = 0; k < 9; ++k) x[k] = static_cast<double>(k);
  const auto y = forward(net, x, ForwardMode::deterministic, RngStream(0, 0)).logits;
  for (int oy = 0; oy < 3; ++oy)
    for (int ox = 0; ox < 3; ++ox) {
      double s = 0.5;
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          const int iy = oy + ky - 1, ix = ox + kx - 1;
          if (iy < 0 || ix < 0 || iy > 2 || ix > 2) continue;
          s += w[ky * 3 + kx] * x[iy * 3 + ix];
        }
      CHECK(y.at(0, oy * 3 + ox) == doctest::Approx(s));
    }
}

TEST_CASE("gradient check on small networks") {
  RngStream rng(2, 0);
  const Tensor x = rng_draw(rng, Distribution::normal(0, 1), {6, 3});
  const auto y = labels_for(6, 4);
  for (auto act : {ActivationKind::relu(), ActivationKind::droprelu(0.7), ActivationKind::rrelu()}) {
    auto net = mlp(act);
    const auto r = grad_check(net, x, y, 1e-6, RngStream(3, 0), 40);
    CHECK(r.passed);
    CHECK(r.checked == 40);
  }
  NetworkGraph conv({1, 5, 5}, {{Conv2dLayer{1, 2, 3, 2, Padding::same}, ""},
                                {ActivationLayer{ActivationKind::droprelu(0.5)}, ""},
                                {DropoutLayer{0.3}, ""},
                                {FlattenLayer{}, ""},
                                {DenseLayer{18, 3}, ""}});
  conv.initialize(RngStream(4, 0));
  const Tensor xi = rng_draw(rng, Distribution::normal(0, 1), {4, 1, 5, 5});
  CHECK(grad_check(conv, xi, labels_for(4, 3), 1e-6, RngStream(5, 0), 40).passed);
}

TEST_CASE("stale traces are rejected") {
  auto net = mlp(ActivationKind::relu());
  const Tensor x({2, 3}, 0.5);
  auto r = forward(net, x, ForwardMode::train, RngStream(0, 0));
  net.param_value(0)[0] += 1.0;
  CHECK_THROWS_AS(backward(net, r.trace, Tensor({2, 4}, 1.0)), ContractError);
  auto other = mlp(ActivationKind::relu());
  auto r2 = forward(other, x, ForwardMode::train, RngStream(0, 0));
  CHECK_THROWS_AS(backward(net, r2.trace, Tensor({2, 4}, 1.0)), ContractError);
  auto r3 = forward(net, x, ForwardMode::train, RngStream(0, 0), false);
  CHECK_THROWS_AS(backward(net, r3.trace, Tensor({2, 4}, 1.0)), ContractError);
}

TEST_CASE("forward modes") {
  auto net = mlp(ActivationKind::droprelu(0.5));
  RngStream rng(9, 0);
  const Tensor x = rng_draw(rng, Distribution::normal(0, 1), {8, 3});
  const auto a = forward(net, x, ForwardMode::mc_eval, RngStream(1, 0)).logits;
  const auto b = forward(net, x, ForwardMode::mc_eval, RngStream(1, 0)).logits;
  const auto c = forward(net, x, ForwardMode::mc_eval, RngStream(2, 0)).logits;
  CHECK(a == b);
  CHECK(a != c);
  const auto d1 = forward(net, x, ForwardMode::deterministic, RngStream(1, 0)).logits;
  const auto d2 = forward(net, x, ForwardMode::deterministic, RngStream(2, 0)).logits;
  CHECK(d1 == d2);
  auto relu_net = mlp(ActivationKind::relu());
  CHECK(forward(relu_net, x, ForwardMode::deterministic, RngStream(0, 0)).logits == d1);
}

TEST_CASE("replay reproduces a recorded pass") {
  auto net = mlp(ActivationKind::rrelu());
  const Tensor x({4, 3}, -0.3);
  const auto r = forward(net, x, ForwardMode::train, RngStream(7, 0));
  CHECK(replay_forward(net, x, r.trace.masks).logits == r.logits);
}

TEST_CASE("softmax cross entropy") {
  const Tensor logits = Tensor::matrix({{0.0, 0.0}, {10.0, 0.0}});
  const std::vector<int> y = {0, 1};
  const auto r = softmax_cross_entropy(logits, y);
  const double l1 = std::log(2.0), l2 = 10.0 + std::log1p(std::exp(-10.0));
  CHECK(r.loss == doctest::Approx((l1 + l2) / 2.0).epsilon(1e-12));
  CHECK(r.grad_logits.at(0, 0) == doctest::Approx(-0.25));
  const std::vector<int> bad = {0, 2};
  CHECK_THROWS_AS(softmax_cross_entropy(logits, bad), ContractError);
}

TEST_CASE("learning rate schedule") {
  OptimizerState opt;
  opt.learning_rate = 0.1;
  CHECK(scheduled_lr(opt, 0, 100) == doctest::Approx(0.1));
  CHECK(scheduled_lr(opt, 44, 100) == doctest::Approx(0.1));
  CHECK(scheduled_lr(opt, 45, 100) == doctest::Approx(0.01));
  CHECK(scheduled_lr(opt, 68, 100) == doctest::Approx(0.001));
  CHECK(scheduled_lr(opt, 90, 100) == doctest::Approx(0.0001));
}

TEST_CASE("nesterov step matches the update rule") {
  NetworkGraph net({1}, {{DenseLayer{1, 1}, ""}});
  net.param_value(0) = Tensor::matrix({{1.0, 0.0}});
  OptimizerState opt;
  opt.momentum = 0.9;
  opt.weight_decay = 0.1;
  Gradients g{{Tensor::matrix({{0.5, 1.0}})}, Tensor()};
  sgd_step(net, g, opt, 0.1);
  // g = 0.5 + 0.1 * 1 = 0.6; v = 0.6; w = 1 - 0.1 * (0.6 + 0.54)
  CHECK(net.params()[0].value.at(0, 0) == doctest::Approx(1.0 - 0.1 * 1.14));
  CHECK(net.params()[0].value.at(0, 1) == doctest::Approx(-0.1 * 1.9));
}

TEST_CASE("training lowers the loss and is reproducible") {
  const Dataset data = gen_two_moons(200, 0.1, 1);
  auto run = [&] {
    auto net = mlp(ActivationKind::droprelu(0.9), 2, 16, 2);
    OptimizerState opt;
    return train(net, data, opt, TrainOptions{15, 32}, RngStream(4, 0));
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.loss_curve == b.loss_curve);
  CHECK(a.loss_curve.back() < 0.6 * a.loss_curve.front());
}

TEST_CASE("divergence raises TrainingError with the epoch") {
  const Dataset data = gen_two_moons(100, 0.1, 1);
  auto net = mlp(ActivationKind::relu(), 2, 16, 2);
  OptimizerState opt;
  opt.learning_rate = 1e6;
  opt.schedule.clear();
  try {
    train(net, data, opt, TrainOptions{20, 10}, RngStream(0, 0));
    FAIL("expected divergence");
  } catch (const TrainingError& e) {
    CHECK(e.epoch() < 20);
  }
}

TEST_CASE("checkpoint round trip") {
  auto net = mlp(ActivationKind::relu());
  const auto path = std::filesystem::temp_directory_path() / "rrauq_ckpt_test.ckpt";
  save_checkpoint(net, path);
  auto other = mlp(ActivationKind::relu());
  other.initialize(RngStream(99, 0));
  CHECK(other.params()[0].value != net.params()[0].value);
  load_checkpoint(other, path);
  for (std::size_t i = 0; i < net.params().size(); ++i) CHECK(other.params()[i].value == net.params()[i].value);
  auto wrong = mlp(ActivationKind::relu(), 3, 6, 4);
  CHECK_THROWS_AS(load_checkpoint(wrong, path), DimensionError);
  auto bytes = encode_checkpoint(net.params());
  bytes[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bytes), FormatError);
  auto truncated = encode_checkpoint(net.params());
  truncated.resize(truncated.size() - 3);
  CHECK_THROWS_AS(decode_checkpoint(truncated), FormatError);
  CHECK_THROWS_AS(load_checkpoint(other, "/nonexistent/dir/x.ckpt"), IoError);
  std::filesystem::remove(path);
}

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "rrauq/errors.hpp"
#include "rrauq/mc.hpp"

using namespace rrauq;

namespace {

NetworkGraph net_with(ActivationKind act) {
  NetworkGraph net({2}, {{DenseLayer{2, 8}, ""}, {ActivationLayer{act}, ""}, {DenseLayer{8, 3}, ""}});
  net.initialize(RngStream(3, 0));
  return net;
}

Tensor inputs(std::size_t n) {
  RngStream rng(1, 0);
  return rng_draw(rng, Distribution::normal(0, 1), {n, 2});
}

}  // namespace

TEST_CASE("mc_predict shape, validity and thread independence") {
  const auto net = net_with(ActivationKind::droprelu(0.5));
  const Tensor x = inputs(1100);
  const auto a = mc_predict(net, x, 7, RngStream(5, 0), 1);
  const auto b = mc_predict(net, x, 7, RngStream(5, 0), 4);
  CHECK(a.probs.shape() == Shape{7, 1100, 3});
  CHECK(a.probs == b.probs);
  CHECK_NOTHROW(a.validate());
  CHECK(a.pass(0) != a.pass(1));
  CHECK_THROWS_AS(mc_predict(net, x, 0, RngStream(5, 0)), ParameterError);
}

TEST_CASE("a deterministic network gives identical passes and a warning") {
  const auto net = net_with(ActivationKind::relu());
  const auto ps = mc_predict(net, inputs(10), 3, RngStream(1, 0));
  CHECK(ps.pass(0) == ps.pass(2));
  CHECK(!ps.warnings.empty());
  CHECK(deterministic_predict(net, inputs(10)).pass(0) == ps.pass(0));
}

TEST_CASE("aggregate is permutation invariant bit for bit") {
  const auto net = net_with(ActivationKind::rrelu());
  const auto ps = mc_predict(net, inputs(50), 9, RngStream(2, 0));
  PredictiveSet shuffled = ps;
  std::vector<std::size_t> order = {4, 0, 8, 3, 1, 7, 2, 6, 5};
  const std::size_t block = 50 * 3;
  for (std::size_t i = 0; i < 9; ++i)
    std::copy_n(ps.probs.data().begin() + order[i] * block, block, shuffled.probs.data().begin() + i * block);
  const auto a = aggregate(ps), b = aggregate(shuffled);
  CHECK(a.mean_probs == b.mean_probs);
  CHECK(a.entropy == b.entropy);
  CHECK(a.mean_variance == b.mean_variance);
  CHECK(a.expected_entropy == b.expected_entropy);
}

TEST_CASE("aggregate against hand values") {
  PredictiveSet ps;
  ps.probs = Tensor({2, 1, 2}, std::vector<double>{0.9, 0.1, 0.5, 0.5});
  const auto s = aggregate(ps);
  CHECK(s.mean_probs.at(0, 0) == doctest::Approx(0.7));
  CHECK(s.predicted_label[0] == 0);
  CHECK(s.confidence[0] == doctest::Approx(0.7));
  CHECK(s.entropy[0] == doctest::Approx(-(0.7 * std::log(0.7) + 0.3 * std::log(0.3))));
  CHECK(s.mean_variance[0] == doctest::Approx(0.04));
  CHECK(entropy_nats(std::vector<double>{1.0, 0.0}) == 0.0);
}

TEST_CASE("ensemble predict checks head dimensions") {
  std::vector<NetworkGraph> nets;
  nets.push_back(net_with(ActivationKind::relu()));
  nets.push_back(NetworkGraph({2}, {{DenseLayer{2, 4}, ""}}));
  CHECK_THROWS_AS(ensemble_predict(nets, inputs(3)), ContractError);
  nets.pop_back();
  nets.push_back(net_with(ActivationKind::relu()));
  const auto ps = ensemble_predict(nets, inputs(3));
  CHECK(ps.passes() == 2);
}

TEST_CASE("predictive set serialization round trips exactly") {
  const auto ps = mc_predict(net_with(ActivationKind::droprelu(0.7)), inputs(20), 4, RngStream(9, 0));
  CHECK(decode_predictive_set(encode_predictive_set(ps)).probs == ps.probs);
  CHECK(predictive_set_from_csv(predictive_set_to_csv(ps)).probs == ps.probs);
  auto bytes = encode_predictive_set(ps);
  bytes.resize(bytes.size() - 8);
  CHECK_THROWS_AS(decode_predictive_set(bytes), FormatError);
  CHECK_THROWS_AS(predictive_set_from_csv("pass,sample,class,prob\n0,0,0,abc\n"), FormatError);
}

TEST_CASE("validate rejects rows that do not sum to one") {
  PredictiveSet ps;
  ps.probs = Tensor({1, 1, 2}, std::vector<double>{0.6, 0.6});
  CHECK_THROWS_AS(ps.validate(), ContractError);
}

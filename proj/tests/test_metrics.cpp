#include <cmath>

#include "doctest.h"
#include "rrauq/errors.hpp"
#include "rrauq/metrics.hpp"
#include "rrauq/rng.hpp"

using namespace rrauq;

TEST_CASE("accuracy") {
  const std::vector<int> a = {0, 1, 2, 1}, b = {0, 1, 2, 0}, c = {1, 0, 0, 0};
  CHECK(accuracy(a, a) == 1.0);
  CHECK(accuracy(a, b) == 0.75);
  CHECK(accuracy(std::vector<int>{0, 1}, std::vector<int>{1, 0}) == 0.0);
  CHECK_THROWS_AS(accuracy(a, std::vector<int>{0}), ContractError);
  CHECK_THROWS_AS(accuracy(std::vector<int>{}, std::vector<int>{}), ContractError);
  (void)c;
}

TEST_CASE("ece examples") {
  CHECK(ece(std::vector<double>{1.0, 1.0}, {true, true}).ece == 0.0);
  CHECK(ece(std::vector<double>{0.95, 0.65}, {true, false}, 30).ece == doctest::Approx(0.35).epsilon(1e-14));
  CHECK(ece(std::vector<double>{0.4, 0.4, 0.4}, {false, false, false}, 10).ece == doctest::Approx(0.4));
  CHECK_THROWS_AS(ece(std::vector<double>{1.2}, {true}), ContractError);
  CHECK_THROWS_AS(ece(std::vector<double>{-0.1}, {true}), ContractError);
  CHECK_THROWS_AS(ece(std::vector<double>{0.5, 0.5}, {true}), ContractError);
}

TEST_CASE("ece bin boundaries are half open on the left") {
  CHECK(ece_bin_index(0.0, 10) == 1);
  CHECK(ece_bin_index(0.1, 10) == 1);
  CHECK(ece_bin_index(std::nextafter(0.1, 1.0), 10) == 2);
  CHECK(ece_bin_index(1.0, 10) == 10);
  CHECK(ece_bin_index(0.5, 1) == 1);
  const auto r = ece(std::vector<double>{0.0, 0.3, 1.0}, {false, true, true}, 10);
  std::size_t total = 0;
  for (const auto& b : r.bins) total += b.count;
  CHECK(total == 3);
  CHECK(r.bins.size() == 10);
  CHECK(r.bins[0].count == 1);
}

TEST_CASE("calibrated synthetic data has small ece") {
  RngStream rng(4, 0);
  const std::size_t n = 200000, bins = 10;
  std::vector<double> conf(n);
  std::vector<bool> correct(n);
  for (std::size_t i = 0; i < n; ++i) {
    conf[i] = rng.next_double();
    correct[i] = rng.next_double() < conf[i];
  }
  const auto r = ece(conf, correct, bins);
  CHECK(r.ece < 2.0 / bins);
  CHECK(r.ece >= 0.0);
}

TEST_CASE("jsd values") {
  const Tensor p = Tensor::matrix({{1.0, 0.0}}), q = Tensor::matrix({{0.0, 1.0}});
  CHECK(std::fabs(jsd_pair(p, q) - std::log(2.0)) < 1e-12);
  CHECK(jsd_pair(p, p) == 0.0);
  const Tensor a = Tensor::matrix({{0.2, 0.3, 0.5}, {0.6, 0.4, 0.0}});
  const Tensor b = Tensor::matrix({{0.1, 0.1, 0.8}, {0.3, 0.3, 0.4}});
  CHECK(jsd_pair(a, b) == jsd_pair(b, a));
  const Tensor un = Tensor::matrix({{0.5, 0.6}});
  CHECK_THROWS_AS(jsd_pair(un, p), ContractError);
  CHECK_THROWS_AS(jsd_pair(a, p), DimensionError);
}

TEST_CASE("disagreement") {
  const std::vector<int> a = {0, 1, 1, 2}, b = {0, 0, 1, 1};
  CHECK(disagreement(a, a) == 0.0);
  CHECK(disagreement(a, b) == 0.5);
  CHECK(disagreement(a, b) == disagreement(b, a));
}

TEST_CASE("diversity matrix against brute force enumeration") {
  PredictiveSet ps;
  ps.probs = Tensor({4, 3, 2}, std::vector<double>{
                                   0.9, 0.1, 0.2, 0.8, 0.5, 0.5,  //
                                   0.6, 0.4, 0.7, 0.3, 0.1, 0.9,  //
                                   0.1, 0.9, 0.2, 0.8, 0.3, 0.7,  //
                                   0.9, 0.1, 0.2, 0.8, 0.5, 0.5});
  const auto d = diversity_matrix(ps);
  double sum = 0.0, mx = 0.0, dsum = 0.0, dmx = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) {
      double js = 0.0;
      for (std::size_t s = 0; s < 3; ++s) {
        double term = 0.0;
        for (std::size_t c = 0; c < 2; ++c) {
          const double pi = ps.probs[(i * 3 + s) * 2 + c], pj = ps.probs[(j * 3 + s) * 2 + c];
          const double m = 0.5 * (pi + pj);
          if (pi > 0) term += 0.5 * pi * std::log(pi / m);
          if (pj > 0) term += 0.5 * pj * std::log(pj / m);
        }
        js += term / 3.0;
      }
      const auto li = ps.pass_labels(i), lj = ps.pass_labels(j);
      double dis = 0.0;
      for (std::size_t s = 0; s < 3; ++s) dis += li[s] != lj[s];
      dis /= 3.0;
      CHECK(d.pairwise_jsd[i][j] == doctest::Approx(js).epsilon(1e-12));
      CHECK(d.pairwise_dis[i][j] == doctest::Approx(dis));
      sum += js;
      dsum += dis;
      mx = std::max(mx, js);
      dmx = std::max(dmx, dis);
      ++pairs;
    }
  CHECK(pairs == 6);
  CHECK(d.mean_jsd == doctest::Approx(sum / 6).epsilon(1e-12));
  CHECK(d.max_jsd == doctest::Approx(mx).epsilon(1e-12));
  CHECK(d.mean_dis == doctest::Approx(dsum / 6));
  CHECK(d.max_dis == doctest::Approx(dmx));
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(d.pairwise_jsd[i][i] == 0.0);
    for (std::size_t j = 0; j < 4; ++j) CHECK(d.pairwise_jsd[i][j] == d.pairwise_jsd[j][i]);
  }
  CHECK(d.pairwise_jsd[0][3] == 0.0);
  CHECK_THROWS_AS(diversity_matrix(ps.head(1)), ContractError);
}

TEST_CASE("disjoint one-hot members") {
  PredictiveSet ps;
  ps.probs = Tensor({2, 2, 2}, std::vector<double>{1, 0, 0, 1, 0, 1, 1, 0});
  const auto d = diversity_matrix(ps);
  CHECK(d.mean_dis == 1.0);
  CHECK(std::fabs(d.mean_jsd - std::log(2.0)) < 1e-12);
}

TEST_CASE("shift sweep statistics") {
  const auto rows = shift_sweep({{0, {0.9}}, {1, {0.1, 0.5, 0.3}}, {2, {4.0, 1.0, 2.0, 3.0}}});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].median == 0.9);
  CHECK(rows[0].count == 1);
  CHECK(rows[1].median == 0.3);
  CHECK(rows[1].min == 0.1);
  CHECK(rows[1].max == 0.5);
  CHECK(rows[2].q1 == doctest::Approx(1.75));
  CHECK(rows[2].q3 == doctest::Approx(3.25));
  CHECK(rows[2].median == doctest::Approx(2.5));
}

TEST_CASE("csv headers") {
  const auto r = ece(std::vector<double>{0.5}, {true}, 2);
  CHECK(reliability_csv(r).rfind("bin_lo,bin_hi,count,acc,conf\n", 0) == 0);
  CHECK(sweep_csv({}).rfind("severity,min,q1,median,q3,max,count\n", 0) == 0);
  CHECK(format_double(0.1) == "0.10000000000000001");
}

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rrauq {

/// Var(sum_k P_k x_k) with P_k ~ Bernoulli(1 - p): p (1 - p) sum x^2.
double analytic_dropout_var(std::span<const double> x, double p);

/// q (1 - q) sum x^2, the ReLU-independent part of the DropReLU output
/// variance. Exact when every x_k < 0.
double analytic_droprelu_var_floor(std::span<const double> x, double q);

/// Exact variance of sum_k [(1 - Q_k) x_k + Q_k ReLU(x_k)]: only negative
/// inputs are random, so it equals q (1 - q) sum_{x_k < 0} x_k^2.
double exact_droprelu_var(std::span<const double> x, double q);

/// Exact variance of sum_k y_k with y_k = x_k for x_k >= 0 and a_k x_k
/// otherwise, a_k ~ Uniform(l, u): (u - l)^2 / 12 sum_{x_k < 0} x_k^2.
double exact_rrelu_var(std::span<const double> x, double lower, double upper);

enum class LayerNoise { dropout_unscaled, droprelu, rrelu };

struct VarianceEstimate {
  double mean = 0.0;
  double variance = 0.0;        // unbiased sample variance
  double standard_error = 0.0;  // delete-one jackknife
  std::size_t trials = 0;
};

/// Sample variance of the summed layer output over independent mask draws.
/// `a` is p, q or the RReLU lower bound; `b` is the RReLU upper bound.
/// Trials are drawn in fixed chunks so the estimate does not depend on
/// `threads`. Throws ParameterError below 10^4 trials.
VarianceEstimate empirical_layer_var(LayerNoise kind, std::span<const double> x, double a,
                                     double b, std::size_t trials, std::uint64_t seed,
                                     std::size_t threads = 1);

/// Variance and jackknife error of a sample.
VarianceEstimate sample_variance(std::span<const double> values);

struct DominanceCell {
  double p = 0.0;
  double q = 0.0;
  double var_dropout = 0.0;
  double se_dropout = 0.0;
  double var_droprelu = 0.0;
  double se_droprelu = 0.0;
  /// Measured var_droprelu - q (1 - q) sum x^2.
  double epsilon = 0.0;
  /// var_droprelu >= var_dropout - 3 * sqrt(se_dropout^2 + se_droprelu^2).
  bool dominant = false;
  /// q <= 1 - p, where dominance is asserted.
  bool claim_region = false;
  /// q (1 - q) >= p (1 - p), so the floor alone would imply dominance if the
  /// remainder were non-negative.
  bool floor_implies = false;
};

std::vector<DominanceCell> dominance_scan(std::span<const double> x,
                                          std::span<const double> p_grid,
                                          std::span<const double> q_grid, std::size_t trials,
                                          std::uint64_t seed, std::size_t threads = 1);

/// Columns p,q,var_dropout,se_dropout,var_droprelu,se_droprelu,dominant.
std::string dominance_csv(const std::vector<DominanceCell>& cells);

}  // namespace rrauq

#include "rrauq/variance.hpp"

#include <cmath>
#include <sstream>

#include "rrauq/errors.hpp"
#include "rrauq/mc.hpp"
#include "rrauq/metrics.hpp"
#include "rrauq/rng.hpp"

namespace rrauq {

namespace {

constexpr std::size_t kTrialChunk = 1 << 16;

void check_probability(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw ParameterError(std::string(name) + " must lie in [0,1], got " + std::to_string(v));
  }
}

double sum_squares(std::span<const double> x, bool negative_only) {
  double total = 0.0;
  for (double v : x)
    if (!negative_only || v < 0.0) total += v * v;
  return total;
}

}  // namespace

double analytic_dropout_var(std::span<const double> x, double p) {
  check_probability(p, "dropout rate");
  return p * (1.0 - p) * sum_squares(x, false);
}

double analytic_droprelu_var_floor(std::span<const double> x, double q) {
  check_probability(q, "retention rate");
  return q * (1.0 - q) * sum_squares(x, false);
}

double exact_droprelu_var(std::span<const double> x, double q) {
  check_probability(q, "retention rate");
  return q * (1.0 - q) * sum_squares(x, true);
}

double exact_rrelu_var(std::span<const double> x, double lower, double upper) {
  return (upper - lower) * (upper - lower) / 12.0 * sum_squares(x, true);
}

VarianceEstimate sample_variance(std::span<const double> y) {
  const std::size_t n = y.size();
  if (n < 3) throw ParameterError("sample variance needs at least three values");
  // Shift by the first value so constant samples give exactly zero.
  const double shift = y[0];
  double sum = 0.0;
  for (double v : y) sum += v - shift;
  const double dn = static_cast<double>(n);
  const double mean_shifted = sum / dn;
  double m2 = 0.0, m4 = 0.0;
  for (double v : y) {
    const double d = (v - shift) - mean_shifted;
    const double d2 = d * d;
    m2 += d2;
    m4 += d2 * d2;
  }
  VarianceEstimate est;
  est.trials = n;
  est.mean = shift + mean_shifted;
  est.variance = m2 / (dn - 1.0);
  // Leave-one-out variances are (SS - d_i^2 n / (n-1)) / (n-2), so their
  // spread follows from the second and fourth central moments.
  const double mean_d2 = m2 / dn;
  const double spread = std::max(0.0, m4 - dn * mean_d2 * mean_d2);  // sum (d_i^2 - mean)^2
  const double factor = dn / ((dn - 1.0) * (dn - 2.0));
  est.standard_error = std::sqrt((dn - 1.0) / dn * factor * factor * spread);
  return est;
}

VarianceEstimate empirical_layer_var(LayerNoise kind, std::span<const double> x, double a,
                                     double b, std::size_t trials, std::uint64_t seed,
                                     std::size_t threads) {
  if (trials < 10000) {
    throw ParameterError("variance estimates need at least 1e4 trials, got " +
                         std::to_string(trials));
  }
  if (kind == LayerNoise::rrelu) {
    if (!(a >= 0.0 && a < b && b < 1.0)) throw ParameterError("rrelu bounds must satisfy 0 <= l < u < 1");
  } else {
    check_probability(a, kind == LayerNoise::dropout_unscaled ? "dropout rate" : "retention rate");
  }
  std::vector<double> outputs(trials);
  const RngStream root(seed, static_cast<std::uint64_t>(kind) + 1);
  const std::size_t chunks = (trials + kTrialChunk - 1) / kTrialChunk;
  parallel_for(chunks, threads, [&](std::size_t chunk) {
    RngStream rng = root.fork(chunk);
    const std::size_t end = std::min(trials, (chunk + 1) * kTrialChunk);
    for (std::size_t t = chunk * kTrialChunk; t < end; ++t) {
      double total = 0.0;
      for (double xk : x) {
        switch (kind) {
          case LayerNoise::dropout_unscaled:
            // P_k = 1 keeps the unit, with probability 1 - p.
            total += rng.bernoulli(1.0 - a) * xk;
            break;
          case LayerNoise::droprelu: {
            const double qk = rng.bernoulli(a);
            total += (1.0 - qk) * xk + qk * (xk >= 0.0 ? xk : 0.0);
            break;
          }
          case LayerNoise::rrelu:
            total += xk >= 0.0 ? xk : rng.uniform(a, b) * xk;
            break;
        }
      }
      outputs[t] = total;
    }
  });
  return sample_variance(outputs);
}

std::vector<DominanceCell> dominance_scan(std::span<const double> x,
                                          std::span<const double> p_grid,
                                          std::span<const double> q_grid, std::size_t trials,
                                          std::uint64_t seed, std::size_t threads) {
  std::vector<DominanceCell> cells;
  const RngStream seeds(seed, 0x5CA7);
  std::size_t cell_index = 0;
  for (double p : p_grid) {
    check_probability(p, "dropout rate");
    for (double q : q_grid) {
      check_probability(q, "retention rate");
      RngStream cell_seeds = seeds.fork(cell_index++);
      DominanceCell cell;
      cell.p = p;
      cell.q = q;
      const auto drop = empirical_layer_var(LayerNoise::dropout_unscaled, x, p, 0.0, trials,
                                            cell_seeds.next_u64(), threads);
      const auto relu = empirical_layer_var(LayerNoise::droprelu, x, q, 0.0, trials,
                                            cell_seeds.next_u64(), threads);
      cell.var_dropout = drop.variance;
      cell.se_dropout = drop.standard_error;
      cell.var_droprelu = relu.variance;
      cell.se_droprelu = relu.standard_error;
      cell.epsilon = relu.variance - analytic_droprelu_var_floor(x, q);
      const double combined = std::sqrt(drop.standard_error * drop.standard_error +
                                        relu.standard_error * relu.standard_error);
      cell.dominant = relu.variance >= drop.variance - 3.0 * combined;
      cell.claim_region = q <= 1.0 - p + 1e-12;
      cell.floor_implies = q * (1.0 - q) >= p * (1.0 - p) - 1e-15;
      cells.push_back(cell);
    }
  }
  return cells;
}

std::string dominance_csv(const std::vector<DominanceCell>& cells) {
  std::ostringstream out;
  out << "p,q,var_dropout,se_dropout,var_droprelu,se_droprelu,dominant\n";
  for (const auto& c : cells) {
    out << format_double(c.p) << ',' << format_double(c.q) << ',' << format_double(c.var_dropout)
        << ',' << format_double(c.se_dropout) << ',' << format_double(c.var_droprelu) << ','
        << format_double(c.se_droprelu) << ',' << (c.dominant ? "true" : "false") << '\n';
  }
  return out.str();
}

}  // namespace rrauq

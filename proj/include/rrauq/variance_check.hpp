#pragma once

#include <cstdint>
#include <vector>

#include "rrauq/experiment.hpp"
#include "rrauq/variance.hpp"

namespace rrauq {

struct VarianceCheckOptions {
  std::uint64_t seed = 0;
  std::size_t vectors = 20;
  std::size_t max_dim = 16;
  std::size_t trials = 1000000;
  std::vector<double> dropout_rates = {0.2, 0.5};
  std::vector<double> retention_rates = {0.5, 0.8};
  std::size_t scan_vectors = 3;
  std::size_t scan_trials = 200000;
  std::vector<double> p_grid = {0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<double> q_grid = {0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95};
  std::size_t threads = 1;
};

/// Empirical variance against a closed form.
struct VarianceAgreement {
  std::size_t vector_index = 0;
  double rate = 0.0;
  double analytic = 0.0;
  VarianceEstimate empirical;
  bool within_3se = false;
};

struct EpsilonCase {
  std::size_t vector_index = 0;
  double q = 0.0;
  double floor = 0.0;      // q (1 - q) sum x^2
  double exact = 0.0;      // q (1 - q) sum_{x<0} x^2
  VarianceEstimate empirical;
  double epsilon = 0.0;    // empirical - floor
  bool nonnegative = false;  // epsilon >= -3 SE
};

struct ScanResult {
  std::vector<double> x;
  std::vector<DominanceCell> cells;
};

struct VarianceCheckReport {
  std::vector<std::vector<double>> mixed_vectors;
  std::vector<std::vector<double>> negative_vectors;
  std::vector<VarianceAgreement> dropout;            // mixed-sign x
  std::vector<VarianceAgreement> droprelu_negative;  // all-negative x
  std::vector<EpsilonCase> droprelu_mixed;
  std::vector<ScanResult> scans;
};

/// Random vectors of length 2..max_dim. Mixed vectors hold at least one
/// entry of each sign.
std::vector<double> random_mixed_vector(RngStream& rng, std::size_t max_dim);
std::vector<double> random_negative_vector(RngStream& rng, std::size_t max_dim);

VarianceCheckReport run_variance_check(const VarianceCheckOptions& options);

VarianceCheckOptions variance_options_from_json(const Json& j);
Json variance_report_to_json(const VarianceCheckReport& report);
/// CSV of every scan cell with a leading vector column.
std::string variance_scan_csv(const VarianceCheckReport& report);

}  // namespace rrauq

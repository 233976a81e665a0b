#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "rrauq/mc.hpp"
#include "rrauq/tensor.hpp"

namespace rrauq {

double accuracy(std::span<const int> predicted, std::span<const int> truth);

struct ReliabilityBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  double accuracy = 0.0;    // 0 for empty bins
  double confidence = 0.0;  // 0 for empty bins
};

struct EceResult {
  double ece = 0.0;
  std::vector<ReliabilityBin> bins;
};

/// Bins are the half-open intervals ((m-1)/M, m/M]; a confidence of exactly
/// 0 falls in the first bin.
EceResult ece(std::span<const double> confidences, const std::vector<bool>& correct,
              std::size_t bins = 30);

/// Returns the 1-based bin of a confidence under the interval rule above.
std::size_t ece_bin_index(double confidence, std::size_t bins);

/// Mean over rows of the Jensen-Shannon divergence (nats).
double jsd_pair(const Tensor& p, const Tensor& q);

double jsd_row(std::span<const double> p, std::span<const double> q);

/// Fraction of positions where the labels differ.
double disagreement(std::span<const int> a, std::span<const int> b);

struct DiversityReport {
  std::size_t members = 0;
  std::vector<std::vector<double>> pairwise_jsd;
  std::vector<std::vector<double>> pairwise_dis;
  double mean_jsd = 0.0;
  double max_jsd = 0.0;
  double mean_dis = 0.0;
  double max_dis = 0.0;
};

/// Every unordered pair of passes of `ps`. Needs at least two passes.
DiversityReport diversity_matrix(const PredictiveSet& ps);

struct SweepRow {
  int severity = 0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  std::size_t count = 0;
};

/// Box-plot statistics per severity key; quartiles interpolate linearly
/// between order statistics.
std::vector<SweepRow> shift_sweep(const std::map<int, std::vector<double>>& values);

double quantile_linear(std::vector<double> values, double fraction);

std::string reliability_csv(const EceResult& result);
std::string diversity_csv(const DiversityReport& report);
std::string sweep_csv(const std::vector<SweepRow>& rows);

/// printf("%.17g"), the round-trip representation used in every CSV.
std::string format_double(double v);

}  // namespace rrauq

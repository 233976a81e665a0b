#include "rrauq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "rrauq/errors.hpp"

namespace rrauq {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) {
    throw ContractError("accuracy: " + std::to_string(predicted.size()) + " predictions vs " +
                        std::to_string(truth.size()) + " labels");
  }
  if (truth.empty()) throw ContractError("accuracy of an empty set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

std::size_t ece_bin_index(double c, std::size_t bins) {
  const double m = static_cast<double>(bins);
  auto index = static_cast<std::size_t>(std::ceil(c * m));
  index = std::clamp<std::size_t>(index, 1, bins);
  // Settle rounding at the boundaries against the interval definition.
  while (index > 1 && c <= static_cast<double>(index - 1) / m) --index;
  while (index < bins && c > static_cast<double>(index) / m) ++index;
  return index;
}

EceResult ece(std::span<const double> confidences, const std::vector<bool>& correct,
              std::size_t bins) {
  if (bins == 0) throw ContractError("ece needs at least one bin");
  if (confidences.size() != correct.size()) {
    throw ContractError("ece: confidence and correctness lengths differ");
  }
  if (confidences.empty()) throw ContractError("ece of an empty set");
  EceResult result;
  result.bins.resize(bins);
  std::vector<double> hit_sum(bins, 0.0), conf_sum(bins, 0.0);
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    const double c = confidences[i];
    if (!(c >= 0.0 && c <= 1.0)) {
      throw ContractError("ece: confidence " + std::to_string(c) + " outside [0,1]");
    }
    const std::size_t b = ece_bin_index(c, bins) - 1;
    ++result.bins[b].count;
    hit_sum[b] += correct[i] ? 1.0 : 0.0;
    conf_sum[b] += c;
  }
  const double n = static_cast<double>(confidences.size());
  for (std::size_t b = 0; b < bins; ++b) {
    auto& bin = result.bins[b];
    bin.lo = static_cast<double>(b) / static_cast<double>(bins);
    bin.hi = static_cast<double>(b + 1) / static_cast<double>(bins);
    if (bin.count == 0) continue;
    const double count = static_cast<double>(bin.count);
    bin.accuracy = hit_sum[b] / count;
    bin.confidence = conf_sum[b] / count;
    result.ece += count / n * std::fabs(bin.accuracy - bin.confidence);
  }
  return result;
}

namespace {

void require_distribution_rows(const Tensor& t, const char* which) {
  const std::size_t n = t.dim(0), c = t.dim(1);
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      const double v = t.at(i, k);
      if (!(v >= 0.0)) throw ContractError(std::string("jsd: negative entry in ") + which);
      total += v;
    }
    if (std::fabs(total - 1.0) > 1e-6) {
      throw ContractError(std::string("jsd: row ") + std::to_string(i) + " of " + which +
                          " sums to " + std::to_string(total));
    }
  }
}

inline double kl_term(double p, double mix) { return p > 0.0 ? p * std::log(p / mix) : 0.0; }

}  // namespace

double jsd_row(std::span<const double> p, std::span<const double> q) {
  double total = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double mix = 0.5 * (p[k] + q[k]);
    // Written as a commutative sum so that swapping p and q is bit-exact.
    total += 0.5 * kl_term(p[k], mix) + 0.5 * kl_term(q[k], mix);
  }
  return std::max(0.0, total);
}

double jsd_pair(const Tensor& p, const Tensor& q) {
  if (p.rank() != 2 || p.shape() != q.shape()) {
    throw DimensionError("jsd: shapes " + shape_to_string(p.shape()) + " and " +
                         shape_to_string(q.shape()));
  }
  require_distribution_rows(p, "P");
  require_distribution_rows(q, "Q");
  const std::size_t n = p.dim(0), c = p.dim(1);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += jsd_row(p.data().subspan(i * c, c), q.data().subspan(i * c, c));
  }
  return total / static_cast<double>(n);
}

double disagreement(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size() || a.empty()) {
    throw ContractError("disagreement needs two label vectors of equal, positive length");
  }
  std::size_t diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += a[i] != b[i];
  return static_cast<double>(diff) / static_cast<double>(a.size());
}

DiversityReport diversity_matrix(const PredictiveSet& ps) {
  const std::size_t m = ps.passes();
  if (m < 2) throw ContractError("diversity needs at least two members");
  DiversityReport report;
  report.members = m;
  report.pairwise_jsd.assign(m, std::vector<double>(m, 0.0));
  report.pairwise_dis.assign(m, std::vector<double>(m, 0.0));
  std::vector<Tensor> passes;
  std::vector<std::vector<int>> labels;
  for (std::size_t i = 0; i < m; ++i) {
    passes.push_back(ps.pass(i));
    labels.push_back(ps.pass_labels(i));
  }
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      const double jsd = jsd_pair(passes[i], passes[j]);
      const double dis = disagreement(labels[i], labels[j]);
      report.pairwise_jsd[i][j] = report.pairwise_jsd[j][i] = jsd;
      report.pairwise_dis[i][j] = report.pairwise_dis[j][i] = dis;
      report.mean_jsd += jsd;
      report.mean_dis += dis;
      report.max_jsd = std::max(report.max_jsd, jsd);
      report.max_dis = std::max(report.max_dis, dis);
      ++pairs;
    }
  report.mean_jsd /= static_cast<double>(pairs);
  report.mean_dis /= static_cast<double>(pairs);
  return report;
}

double quantile_linear(std::vector<double> values, double fraction) {
  if (values.empty()) throw ContractError("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = fraction * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double t = pos - static_cast<double>(lo);
  return values[lo] + t * (values[hi] - values[lo]);
}

std::vector<SweepRow> shift_sweep(const std::map<int, std::vector<double>>& values) {
  std::vector<SweepRow> rows;
  for (const auto& [severity, group] : values) {
    if (group.empty()) continue;
    SweepRow row;
    row.severity = severity;
    row.count = group.size();
    row.min = *std::min_element(group.begin(), group.end());
    row.max = *std::max_element(group.begin(), group.end());
    row.q1 = quantile_linear(group, 0.25);
    row.median = quantile_linear(group, 0.5);
    row.q3 = quantile_linear(group, 0.75);
    rows.push_back(row);
  }
  return rows;
}

std::string reliability_csv(const EceResult& result) {
  std::ostringstream out;
  out << "bin_lo,bin_hi,count,acc,conf\n";
  for (const auto& b : result.bins) {
    out << format_double(b.lo) << ',' << format_double(b.hi) << ',' << b.count << ','
        << format_double(b.accuracy) << ',' << format_double(b.confidence) << '\n';
  }
  return out.str();
}

std::string diversity_csv(const DiversityReport& report) {
  std::ostringstream out;
  out << "member_i,member_j,jsd,dis\n";
  for (std::size_t i = 0; i < report.members; ++i)
    for (std::size_t j = 0; j < report.members; ++j) {
      out << i << ',' << j << ',' << format_double(report.pairwise_jsd[i][j]) << ','
          << format_double(report.pairwise_dis[i][j]) << '\n';
    }
  return out.str();
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "severity,min,q1,median,q3,max,count\n";
  for (const auto& r : rows) {
    out << r.severity << ',' << format_double(r.min) << ',' << format_double(r.q1) << ','
        << format_double(r.median) << ',' << format_double(r.q3) << ',' << format_double(r.max)
        << ',' << r.count << '\n';
  }
  return out.str();
}

}  // namespace rrauq

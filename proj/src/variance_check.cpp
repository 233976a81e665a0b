#include "rrauq/variance_check.hpp"

#include <cmath>
#include <sstream>

#include "rrauq/errors.hpp"

namespace rrauq {

std::vector<double> random_mixed_vector(RngStream& rng, std::size_t max_dim) {
  const std::size_t k = 2 + rng.next_below(max_dim - 1);
  std::vector<double> x(k);
  for (auto& v : x) v = rng.uniform(-2.0, 2.0);
  // Force one entry of each sign.
  x[0] = -std::fabs(x[0]) - 0.05;
  x[1] = std::fabs(x[1]) + 0.05;
  return x;
}

std::vector<double> random_negative_vector(RngStream& rng, std::size_t max_dim) {
  const std::size_t k = 2 + rng.next_below(max_dim - 1);
  std::vector<double> x(k);
  for (auto& v : x) v = -rng.uniform(0.05, 2.0);
  return x;
}

VarianceCheckReport run_variance_check(const VarianceCheckOptions& o) {
  if (o.max_dim < 2) throw ParameterError("max_dim must be at least 2");
  VarianceCheckReport report;
  const RngStream root(o.seed, 0x7A41A);
  RngStream vec_rng = root.fork("vectors");
  for (std::size_t i = 0; i < o.vectors; ++i) {
    report.mixed_vectors.push_back(random_mixed_vector(vec_rng, o.max_dim));
    report.negative_vectors.push_back(random_negative_vector(vec_rng, o.max_dim));
  }
  RngStream seeds = root.fork("trials");
  for (std::size_t i = 0; i < o.vectors; ++i) {
    const auto& mixed = report.mixed_vectors[i];
    const auto& negative = report.negative_vectors[i];
    for (double p : o.dropout_rates) {
      VarianceAgreement a;
      a.vector_index = i;
      a.rate = p;
      a.analytic = analytic_dropout_var(mixed, p);
      a.empirical = empirical_layer_var(LayerNoise::dropout_unscaled, mixed, p, 0.0, o.trials,
                                        seeds.next_u64(), o.threads);
      a.within_3se = std::fabs(a.empirical.variance - a.analytic) < 3.0 * a.empirical.standard_error;
      report.dropout.push_back(a);
    }
    for (double q : o.retention_rates) {
      VarianceAgreement a;
      a.vector_index = i;
      a.rate = q;
      a.analytic = analytic_droprelu_var_floor(negative, q);
      a.empirical = empirical_layer_var(LayerNoise::droprelu, negative, q, 0.0, o.trials,
                                        seeds.next_u64(), o.threads);
      a.within_3se = std::fabs(a.empirical.variance - a.analytic) < 3.0 * a.empirical.standard_error;
      report.droprelu_negative.push_back(a);

      EpsilonCase e;
      e.vector_index = i;
      e.q = q;
      e.floor = analytic_droprelu_var_floor(mixed, q);
      e.exact = exact_droprelu_var(mixed, q);
      e.empirical = empirical_layer_var(LayerNoise::droprelu, mixed, q, 0.0, o.trials,
                                        seeds.next_u64(), o.threads);
      e.epsilon = e.empirical.variance - e.floor;
      e.nonnegative = e.epsilon >= -3.0 * e.empirical.standard_error;
      report.droprelu_mixed.push_back(e);
    }
  }
  RngStream scan_rng = root.fork("scan");
  for (std::size_t v = 0; v < o.scan_vectors; ++v) {
    ScanResult scan;
    scan.x = random_mixed_vector(scan_rng, o.max_dim);
    scan.cells = dominance_scan(scan.x, o.p_grid, o.q_grid, o.scan_trials, scan_rng.next_u64(),
                                o.threads);
    report.scans.push_back(std::move(scan));
  }
  return report;
}

VarianceCheckOptions variance_options_from_json(const Json& j) {
  VarianceCheckOptions o;
  if (j.is_null()) return o;
  if (!j.is_object()) throw ConfigError("variance-check config must be an object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "seed") o.seed = value.get<std::uint64_t>();
      else if (key == "vectors") o.vectors = value.get<std::size_t>();
      else if (key == "max_dim") o.max_dim = value.get<std::size_t>();
      else if (key == "trials") o.trials = value.get<std::size_t>();
      else if (key == "dropout_rates") o.dropout_rates = value.get<std::vector<double>>();
      else if (key == "retention_rates") o.retention_rates = value.get<std::vector<double>>();
      else if (key == "scan_vectors") o.scan_vectors = value.get<std::size_t>();
      else if (key == "scan_trials") o.scan_trials = value.get<std::size_t>();
      else if (key == "p_grid") o.p_grid = value.get<std::vector<double>>();
      else if (key == "q_grid") o.q_grid = value.get<std::vector<double>>();
      else throw ConfigError("variance-check: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("variance-check: ") + e.what());
  }
  if (o.trials < 10000 || o.scan_trials < 10000) {
    throw ConfigError("variance-check trials must be at least 1e4");
  }
  if (o.max_dim < 2) throw ConfigError("variance-check max_dim must be at least 2");
  return o;
}

namespace {

Json estimate_json(const VarianceEstimate& e) {
  return {{"variance", e.variance}, {"standard_error", e.standard_error}, {"trials", e.trials}};
}

}  // namespace

Json variance_report_to_json(const VarianceCheckReport& r) {
  Json j;
  j["mixed_vectors"] = r.mixed_vectors;
  j["negative_vectors"] = r.negative_vectors;
  auto agreements = [](const std::vector<VarianceAgreement>& list) {
    Json a = Json::array();
    for (const auto& v : list) {
      a.push_back({{"vector", v.vector_index},
                   {"rate", v.rate},
                   {"analytic", v.analytic},
                   {"empirical", estimate_json(v.empirical)},
                   {"within_3se", v.within_3se}});
    }
    return a;
  };
  j["dropout_agreement"] = agreements(r.dropout);
  j["droprelu_negative_agreement"] = agreements(r.droprelu_negative);
  j["droprelu_mixed_epsilon"] = Json::array();
  for (const auto& e : r.droprelu_mixed) {
    j["droprelu_mixed_epsilon"].push_back({{"vector", e.vector_index},
                                           {"q", e.q},
                                           {"floor", e.floor},
                                           {"exact", e.exact},
                                           {"empirical", estimate_json(e.empirical)},
                                           {"epsilon", e.epsilon},
                                           {"nonnegative", e.nonnegative}});
  }
  j["scans"] = Json::array();
  for (const auto& s : r.scans) {
    Json cells = Json::array();
    for (const auto& c : s.cells) {
      cells.push_back({{"p", c.p},
                       {"q", c.q},
                       {"var_dropout", c.var_dropout},
                       {"se_dropout", c.se_dropout},
                       {"var_droprelu", c.var_droprelu},
                       {"se_droprelu", c.se_droprelu},
                       {"epsilon", c.epsilon},
                       {"claim_region", c.claim_region},
                       {"basis", c.floor_implies ? "floor" : "empirical-only"},
                       {"dominant", c.dominant}});
    }
    j["scans"].push_back({{"x", s.x}, {"cells", cells}});
  }
  return j;
}

std::string variance_scan_csv(const VarianceCheckReport& report) {
  std::ostringstream out;
  for (std::size_t v = 0; v < report.scans.size(); ++v) {
    std::istringstream lines(dominance_csv(report.scans[v].cells));
    std::string line;
    bool header = true;
    while (std::getline(lines, line)) {
      if (header) {
        if (v == 0) out << "vector," << line << '\n';
        header = false;
        continue;
      }
      out << v << ',' << line << '\n';
    }
  }
  return out.str();
}

}  // namespace rrauq

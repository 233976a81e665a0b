#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "rrauq/data.hpp"
#include "rrauq/metrics.hpp"
#include "rrauq/net.hpp"

namespace rrauq {

using Json = nlohmann::ordered_json;

enum class Method { single, mc_dropout, deep_ensemble, mc_droprelu, mc_rrelu };

struct MethodSpec {
  Method kind = Method::single;
  double dropout_rate = 0.2;  // mc_dropout
  std::size_t members = 4;    // deep_ensemble
  double retention = 0.9;     // mc_droprelu
  double lower = 1.0 / 8.0;   // mc_rrelu
  double upper = 1.0 / 3.0;

  bool monte_carlo() const noexcept {
    return kind == Method::mc_dropout || kind == Method::mc_droprelu || kind == Method::mc_rrelu;
  }
  std::string label() const;
};

enum class Position { all, first, last };

std::string position_name(Position p);
Position parse_position(const std::string& name);

struct DatasetSpec {
  std::string kind = "two_moons";  // two_moons | blobs | idx
  std::size_t n_train = 1000;
  std::size_t n_test = 1000;
  double noise = 0.1;  // two_moons
  std::vector<std::vector<double>> centers = {{-2.0, 0.0}, {2.0, 0.0}};  // blobs
  double sigma = 0.5;                                                  // blobs
  std::string train_images, train_labels, test_images, test_labels;    // idx
  int classes = 10;                                                    // idx

  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

struct TrainingSpec {
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::vector<LrStep> schedule = {{0.45, 10.0}, {0.675, 10.0}, {0.90, 10.0}};
};

struct ShiftSpec {
  std::vector<CorruptionKind> corruptions;
  std::vector<int> severities = {1, 2, 3, 4, 5};
};

struct ExperimentConfig {
  std::string name = "experiment";
  MethodSpec method;
  std::string architecture = "mlp-2x64";
  DatasetSpec dataset;
  TrainingSpec training;
  std::size_t passes = 50;
  Position position = Position::all;
  std::uint64_t seed = 0;
  std::size_t ece_bins = 30;
  /// Members (ensemble) or leading passes (MC) used for diversity.
  std::size_t diversity_members = 4;
  ShiftSpec shift;
};

/// Strict parse: unknown keys and out-of-range values raise ConfigError.
ExperimentConfig config_from_json(const Json& j);
Json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

/// The method's network. Presets: "mlp-<depth>x<width>" and "cnn-small".
/// Stochastic activations (or dropout after the activation, for
/// mc_dropout) go to the activation sites selected by `position`; every
/// other site is a plain ReLU.
NetworkGraph build_network(const std::string& architecture, const Shape& input_shape,
                           int classes, const MethodSpec& method, Position position);

/// Number of activation sites of a preset.
std::size_t activation_sites(const std::string& architecture, const Shape& input_shape,
                             int classes);

struct Splits {
  Dataset train;  // normalized
  Dataset test;   // normalized
  NormalizationStats stats;
  /// Normalized corrupted test sets in (corruption, severity) order.
  std::vector<std::pair<CorruptionSpec, Dataset>> shifted;
};

/// Builds train/test/shifted splits from the config's streams.
Splits prepare_data(const ExperimentConfig& config);

struct EvalResult {
  double accuracy = 0.0;
  double ece = 0.0;
  double mean_entropy = 0.0;
  std::vector<ReliabilityBin> bins;
};

EvalResult evaluate(const PredictiveSet& ps, std::span<const int> labels, std::size_t bins);

struct ShiftResult {
  CorruptionSpec spec;
  EvalResult eval;
};

struct Report {
  ExperimentConfig config;
  std::string status = "ok";
  std::string error;
  std::size_t parameter_count = 0;        // one model
  std::size_t total_parameter_count = 0;  // all members
  double size_multiplier = 1.0;
  std::vector<std::vector<double>> loss_curves;
  EvalResult clean;
  std::optional<DiversityReport> diversity;
  std::vector<ShiftResult> shifted;
  std::vector<SweepRow> accuracy_sweep;
  std::vector<SweepRow> ece_sweep;
  std::vector<std::string> notes;
  // Outside the determinism contract.
  double train_seconds = 0.0;
  double inference_seconds = 0.0;
  std::size_t threads = 1;
};

struct RunOptions {
  std::size_t threads = 1;
};

/// Trained networks of one experiment (one per ensemble member).
struct TrainedModels {
  std::vector<NetworkGraph> members;
  std::vector<std::vector<double>> loss_curves;
  double seconds = 0.0;
};

/// Networks trained for a method (M for deep_ensemble, else 1).
std::size_t member_count(const MethodSpec& method);

TrainedModels train_models(const ExperimentConfig& config, const Dataset& train,
                           const RunOptions& options);

/// Predictions of a trained method. MC passes for split k draw from
/// master.fork("mc").fork(k), so clean (k = 0) and shifted splits use
/// disjoint streams.
PredictiveSet predict_models(const ExperimentConfig& config, const TrainedModels& models,
                             const Tensor& x, std::uint64_t split, const RunOptions& options);

/// Divergence is recorded as status "diverged" rather than thrown.
Report run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Full report, including timings.
Json report_to_json(const Report& report);
/// The deterministic part of the report (no timings).
Json report_body(const Report& report);
Report report_from_json(const Json& j);
/// One "path,value" row per scalar leaf of report_to_json.
std::string report_to_csv(const Report& report);

enum class ReportFormat { json, csv };
void emit_report(const Report& report, ReportFormat format, const std::filesystem::path& path);

struct SuiteRow {
  std::string name;
  std::string method;
  std::string position;
  double accuracy = 0.0;
  double ece = 0.0;
  double size_multiplier = 1.0;
  std::size_t parameter_count = 0;
  std::string status;
  double train_seconds = 0.0;  // outside the determinism contract
};

struct SuiteTable {
  std::vector<SuiteRow> rows;
  std::vector<Report> reports;
};

/// Every config must share one dataset spec; size multipliers are relative
/// to a plain single model of the same architecture.
SuiteTable run_suite(const std::vector<ExperimentConfig>& configs, const RunOptions& options = {});

struct PositionRow {
  std::vector<Position> positions;  // more than one after deduplication
  SuiteRow result;
};

/// One experiment per distinct network; positions that yield an identical
/// network share a row.
std::vector<PositionRow> position_analysis(const ExperimentConfig& base,
                                           const std::vector<Position>& positions,
                                           const RunOptions& options = {});

struct QSweepRow {
  double q = 0.0;
  double accuracy = 0.0;
  double ece = 0.0;
  std::string status;
};

std::vector<QSweepRow> q_sweep(const ExperimentConfig& base, const std::vector<double>& qs,
                               const RunOptions& options = {});

Json suite_to_json(const std::vector<SuiteRow>& rows, bool include_timing);
std::string suite_csv(const std::vector<SuiteRow>& rows);
Json position_to_json(const std::vector<PositionRow>& rows, bool include_timing);
std::string position_csv(const std::vector<PositionRow>& rows);
Json q_sweep_to_json(const std::vector<QSweepRow>& rows);
std::string q_sweep_csv(const std::vector<QSweepRow>& rows);

/// Writes text to a file, throwing IoError on failure.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace rrauq

#include <chrono>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include "rrauq/errors.hpp"
#include "rrauq/experiment.hpp"

namespace rrauq {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

RngStream master_stream(const ExperimentConfig& config) { return RngStream(config.seed, 0); }

std::uint64_t derived_seed(const RngStream& stream) {
  RngStream copy = stream;
  return copy.next_u64();
}

struct Preset {
  std::vector<LayerSpec> layers;
  std::vector<std::size_t> sites;  // indices of activation layers
};

Preset preset_layers(const std::string& architecture, const Shape& input_shape, int classes) {
  if (classes < 2) throw ConfigError("a classifier needs at least two classes");
  const auto c = static_cast<std::size_t>(classes);
  Preset preset;
  auto add_activation = [&] {
    preset.sites.push_back(preset.layers.size());
    preset.layers.push_back({ActivationLayer{ActivationKind::relu()}, ""});
  };
  static const std::regex mlp_pattern(R"(mlp-(\d+)x(\d+))");
  std::smatch match;
  if (std::regex_match(architecture, match, mlp_pattern)) {
    const std::size_t depth = std::stoul(match[1]);
    const std::size_t width = std::stoul(match[2]);
    if (depth == 0 || width == 0) throw ConfigError("mlp depth and width must be positive");
    std::size_t in = shape_size(input_shape);
    if (input_shape.size() != 1) preset.layers.push_back({FlattenLayer{}, ""});
    for (std::size_t d = 0; d < depth; ++d) {
      preset.layers.push_back({DenseLayer{in, width}, ""});
      add_activation();
      in = width;
    }
    preset.layers.push_back({DenseLayer{in, c}, ""});
    return preset;
  }
  if (architecture == "cnn-small") {
    if (input_shape.size() != 3) throw ConfigError("cnn-small needs image input [C x H x W]");
    const std::size_t channels = input_shape[0];
    preset.layers.push_back({Conv2dLayer{channels, 8, 3, 1, Padding::same}, ""});
    add_activation();
    preset.layers.push_back({Conv2dLayer{8, 16, 3, 2, Padding::same}, ""});
    add_activation();
    preset.layers.push_back({FlattenLayer{}, ""});
    const std::size_t h = (input_shape[1] - 1) / 2 + 1, w = (input_shape[2] - 1) / 2 + 1;
    preset.layers.push_back({DenseLayer{16 * h * w, 64}, ""});
    add_activation();
    preset.layers.push_back({DenseLayer{64, c}, ""});
    return preset;
  }
  throw ConfigError("unknown architecture '" + architecture + "'");
}

std::string describe_layers(const NetworkGraph& net) {
  std::ostringstream out;
  for (const auto& layer : net.layers()) {
    out << layer.name << ':';
    if (const auto* a = std::get_if<ActivationLayer>(&layer.kind)) out << a->kind.to_string();
    else if (const auto* d = std::get_if<DropoutLayer>(&layer.kind)) out << "dropout(" << d->rate << ")";
    else out << layer.kind.index();
    out << ';';
  }
  return out.str();
}

Json eval_to_json(const EvalResult& e) {
  Json j;
  j["accuracy"] = e.accuracy;
  j["ece"] = e.ece;
  j["mean_entropy"] = e.mean_entropy;
  j["reliability"] = Json::array();
  for (const auto& b : e.bins) {
    j["reliability"].push_back(
        {{"bin_lo", b.lo}, {"bin_hi", b.hi}, {"count", b.count}, {"acc", b.accuracy}, {"conf", b.confidence}});
  }
  return j;
}

EvalResult eval_from_json(const Json& j) {
  EvalResult e;
  e.accuracy = j.at("accuracy").get<double>();
  e.ece = j.at("ece").get<double>();
  e.mean_entropy = j.at("mean_entropy").get<double>();
  for (const auto& b : j.at("reliability")) {
    e.bins.push_back({b.at("bin_lo").get<double>(), b.at("bin_hi").get<double>(),
                      b.at("count").get<std::size_t>(), b.at("acc").get<double>(),
                      b.at("conf").get<double>()});
  }
  return e;
}

Json sweep_to_json(const std::vector<SweepRow>& rows) {
  Json j = Json::array();
  for (const auto& r : rows) {
    j.push_back({{"severity", r.severity}, {"min", r.min}, {"q1", r.q1}, {"median", r.median},
                 {"q3", r.q3}, {"max", r.max}, {"count", r.count}});
  }
  return j;
}

std::vector<SweepRow> sweep_from_json(const Json& j) {
  std::vector<SweepRow> rows;
  for (const auto& r : j) {
    rows.push_back({r.at("severity").get<int>(), r.at("min").get<double>(), r.at("q1").get<double>(),
                    r.at("median").get<double>(), r.at("q3").get<double>(),
                    r.at("max").get<double>(), r.at("count").get<std::size_t>()});
  }
  return rows;
}

void flatten(const Json& j, const std::string& path, std::ostringstream& out) {
  if (j.is_object()) {
    for (const auto& [key, value] : j.items()) flatten(value, path.empty() ? key : path + "." + key, out);
  } else if (j.is_array()) {
    if (j.empty()) out << path << ",[]\n";
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], path + "[" + std::to_string(i) + "]", out);
  } else if (j.is_null()) {
    out << path << ",null\n";
  } else if (j.is_number_float()) {
    out << path << ',' << format_double(j.get<double>()) << '\n';
  } else if (j.is_string()) {
    std::string s = j.get<std::string>();
    if (s.find_first_of(",\"\n") != std::string::npos) {
      std::string quoted = "\"";
      for (char ch : s) quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      s = quoted + "\"";
    }
    out << path << ',' << s << '\n';
  } else {
    out << path << ',' << j.dump() << '\n';
  }
}

}  // namespace

NetworkGraph build_network(const std::string& architecture, const Shape& input_shape,
                           int classes, const MethodSpec& method, Position position) {
  Preset preset = preset_layers(architecture, input_shape, classes);
  std::vector<std::size_t> chosen;
  switch (position) {
    case Position::all: chosen = preset.sites; break;
    case Position::first: chosen = {preset.sites.front()}; break;
    case Position::last: chosen = {preset.sites.back()}; break;
  }
  std::vector<LayerSpec> layers;
  for (std::size_t i = 0; i < preset.layers.size(); ++i) {
    LayerSpec layer = preset.layers[i];
    const bool selected = std::find(chosen.begin(), chosen.end(), i) != chosen.end();
    if (selected && method.kind == Method::mc_droprelu) {
      layer.kind = ActivationLayer{ActivationKind::droprelu(method.retention)};
    } else if (selected && method.kind == Method::mc_rrelu) {
      layer.kind = ActivationLayer{ActivationKind::rrelu(method.lower, method.upper)};
    }
    layers.push_back(layer);
    if (selected && method.kind == Method::mc_dropout) {
      layers.push_back({DropoutLayer{method.dropout_rate}, ""});
    }
  }
  // Names follow the preset layer positions so checkpoints stay comparable
  // across methods.
  std::size_t preset_index = 0;
  for (auto& layer : layers) {
    if (std::holds_alternative<DropoutLayer>(layer.kind)) {
      layer.name = "dropout" + std::to_string(preset_index - 1);
      continue;
    }
    const char* base = std::holds_alternative<DenseLayer>(layer.kind)    ? "dense"
                       : std::holds_alternative<Conv2dLayer>(layer.kind) ? "conv"
                       : std::holds_alternative<FlattenLayer>(layer.kind) ? "flatten"
                                                                          : "act";
    layer.name = base + std::to_string(preset_index++);
  }
  return NetworkGraph(input_shape, std::move(layers));
}

std::size_t activation_sites(const std::string& architecture, const Shape& input_shape,
                             int classes) {
  return preset_layers(architecture, input_shape, classes).sites.size();
}

Splits prepare_data(const ExperimentConfig& config) {
  const RngStream master = master_stream(config);
  const auto& spec = config.dataset;
  Dataset train, test;
  if (spec.kind == "two_moons") {
    train = gen_two_moons(spec.n_train, spec.noise, derived_seed(master.fork("data-train")));
    test = gen_two_moons(spec.n_test, spec.noise, derived_seed(master.fork("data-test")));
  } else if (spec.kind == "blobs") {
    train = gen_blobs(spec.n_train, spec.centers, spec.sigma, derived_seed(master.fork("data-train")));
    test = gen_blobs(spec.n_test, spec.centers, spec.sigma, derived_seed(master.fork("data-test")));
  } else {
    train = load_idx(spec.train_images, spec.train_labels, spec.classes);
    test = load_idx(spec.test_images, spec.test_labels, spec.classes);
    if (spec.n_train > 0 && spec.n_train < train.size()) train = train.subset(0, spec.n_train);
    if (spec.n_test > 0 && spec.n_test < test.size()) test = test.subset(0, spec.n_test);
  }
  train.validate();
  test.validate();

  Splits splits;
  auto [train_norm, stats] = normalize(train);
  splits.train = std::move(train_norm);
  splits.stats = stats;
  splits.test = normalize(test, &stats).first;

  const RngStream corruption_root = master.fork("corruption");
  for (auto kind : config.shift.corruptions) {
    for (int severity : config.shift.severities) {
      const CorruptionSpec cs{kind, severity};
      const std::uint64_t seed = derived_seed(
          corruption_root.fork(static_cast<std::uint64_t>(kind)).fork(static_cast<std::uint64_t>(severity)));
      // Images are corrupted in pixel space, points in normalized feature space.
      Dataset shifted = test.is_image() ? normalize(corrupt(test, cs, seed), &stats).first
                                        : corrupt(splits.test, cs, seed);
      splits.shifted.emplace_back(cs, std::move(shifted));
    }
  }
  return splits;
}

EvalResult evaluate(const PredictiveSet& ps, std::span<const int> labels, std::size_t bins) {
  const PredictionSummary summary = aggregate(ps);
  EvalResult e;
  e.accuracy = accuracy(summary.predicted_label, labels);
  std::vector<bool> correct(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) correct[i] = summary.predicted_label[i] == labels[i];
  // Softmax rounding can push a confidence a hair above 1.
  std::vector<double> confidence = summary.confidence;
  for (auto& c : confidence) c = std::min(c, 1.0);
  auto result = ece(confidence, correct, bins);
  e.ece = result.ece;
  e.bins = std::move(result.bins);
  double h = 0.0;
  for (double v : summary.entropy) h += v;
  e.mean_entropy = h / static_cast<double>(summary.entropy.size());
  return e;
}

std::size_t member_count(const MethodSpec& m) {
  return m.kind == Method::deep_ensemble ? m.members : 1;
}

TrainedModels train_models(const ExperimentConfig& config, const Dataset& train,
                           const RunOptions& options) {
  const RngStream master = master_stream(config);
  const std::size_t members = member_count(config.method);
  TrainedModels models;
  for (std::size_t m = 0; m < members; ++m) {
    models.members.push_back(build_network(config.architecture, train.sample_shape(),
                                           train.class_count, config.method, config.position));
    models.members.back().initialize(master.fork("init").fork(m));
  }
  models.loss_curves.resize(members);
  const auto start = std::chrono::steady_clock::now();
  parallel_for(members, options.threads, [&](std::size_t m) {
    OptimizerState opt;
    opt.learning_rate = config.training.learning_rate;
    opt.momentum = config.training.momentum;
    opt.weight_decay = config.training.weight_decay;
    opt.schedule = config.training.schedule;
    TrainOptions to{config.training.epochs, std::min(config.training.batch_size, train.size())};
    models.loss_curves[m] =
        rrauq::train(models.members[m], train, opt, to, master.fork("train").fork(m)).loss_curve;
  });
  models.seconds = seconds_since(start);
  return models;
}

PredictiveSet predict_models(const ExperimentConfig& config, const TrainedModels& models,
                             const Tensor& x, std::uint64_t split, const RunOptions& options) {
  if (config.method.monte_carlo()) {
    return mc_predict(models.members.front(), x, config.passes,
                      master_stream(config).fork("mc").fork(split), options.threads);
  }
  return ensemble_predict(models.members, x, options.threads);
}

Report run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  Report report;
  report.config = config;
  report.threads = options.threads;
  const Splits splits = prepare_data(config);
  const Shape input = splits.train.sample_shape();
  const int classes = splits.train.class_count;

  const NetworkGraph plain =
      build_network(config.architecture, input, classes, MethodSpec{}, Position::all);
  const NetworkGraph method_net =
      build_network(config.architecture, input, classes, config.method, config.position);
  report.parameter_count = method_net.parameter_count();
  report.total_parameter_count = report.parameter_count * member_count(config.method);
  report.size_multiplier = static_cast<double>(report.total_parameter_count) /
                           static_cast<double>(plain.parameter_count());
  report.notes.push_back("corrupted test splits are standardized with training-set statistics");

  TrainedModels models;
  try {
    models = train_models(config, splits.train, options);
  } catch (const TrainingError& e) {
    report.status = "diverged";
    report.error = e.what();
    return report;
  }
  report.loss_curves = models.loss_curves;
  report.train_seconds = models.seconds;

  const auto start = std::chrono::steady_clock::now();
  const PredictiveSet clean = predict_models(config, models, splits.test.features, 0, options);
  for (const auto& w : clean.warnings) report.notes.push_back(w);
  report.clean = evaluate(clean, splits.test.labels, config.ece_bins);
  if (clean.passes() >= 2) {
    report.diversity = diversity_matrix(clean.head(std::min(config.diversity_members, clean.passes())));
  }

  std::map<int, std::vector<double>> acc_by_severity, ece_by_severity;
  acc_by_severity[0].push_back(report.clean.accuracy);
  ece_by_severity[0].push_back(report.clean.ece);
  for (std::size_t k = 0; k < splits.shifted.size(); ++k) {
    const auto& [spec, data] = splits.shifted[k];
    const PredictiveSet ps = predict_models(config, models, data.features, k + 1, options);
    ShiftResult sr{spec, evaluate(ps, data.labels, config.ece_bins)};
    acc_by_severity[spec.severity].push_back(sr.eval.accuracy);
    ece_by_severity[spec.severity].push_back(sr.eval.ece);
    report.shifted.push_back(std::move(sr));
  }
  report.accuracy_sweep = shift_sweep(acc_by_severity);
  report.ece_sweep = shift_sweep(ece_by_severity);
  report.inference_seconds = seconds_since(start);
  return report;
}

Json report_body(const Report& r) {
  Json j;
  j["schema"] = "rrauq-report/1";
  j["status"] = r.status;
  j["error"] = r.error.empty() ? Json(nullptr) : Json(r.error);
  j["seed"] = r.config.seed;
  j["config"] = config_to_json(r.config);
  j["model"] = {{"parameter_count", r.parameter_count},
                {"total_parameter_count", r.total_parameter_count},
                {"size_multiplier", r.size_multiplier}};
  j["training"] = {{"loss_curves", r.loss_curves}};
  j["clean"] = r.status == "ok" ? eval_to_json(r.clean) : Json(nullptr);
  if (r.diversity) {
    const auto& d = *r.diversity;
    j["diversity"] = {{"members", d.members},       {"mean_jsd", d.mean_jsd},
                      {"max_jsd", d.max_jsd},       {"mean_dis", d.mean_dis},
                      {"max_dis", d.max_dis},       {"pairwise_jsd", d.pairwise_jsd},
                      {"pairwise_dis", d.pairwise_dis}};
  } else {
    j["diversity"] = nullptr;
  }
  Json shift;
  shift["results"] = Json::array();
  for (const auto& s : r.shifted) {
    Json row;
    row["corruption"] = corruption_name(s.spec.kind);
    row["severity"] = s.spec.severity;
    row["eval"] = eval_to_json(s.eval);
    shift["results"].push_back(row);
  }
  shift["accuracy_sweep"] = sweep_to_json(r.accuracy_sweep);
  shift["ece_sweep"] = sweep_to_json(r.ece_sweep);
  j["shift"] = shift;
  j["notes"] = r.notes;
  return j;
}

Json report_to_json(const Report& r) {
  Json j = report_body(r);
  j["timing"] = {{"train_seconds", r.train_seconds},
                 {"inference_seconds", r.inference_seconds},
                 {"threads", r.threads}};
  return j;
}

Report report_from_json(const Json& j) {
  Report r;
  try {
    r.config = config_from_json(j.at("config"));
    r.status = j.at("status").get<std::string>();
    r.error = j.at("error").is_null() ? "" : j.at("error").get<std::string>();
    const Json& model = j.at("model");
    r.parameter_count = model.at("parameter_count").get<std::size_t>();
    r.total_parameter_count = model.at("total_parameter_count").get<std::size_t>();
    r.size_multiplier = model.at("size_multiplier").get<double>();
    r.loss_curves = j.at("training").at("loss_curves").get<std::vector<std::vector<double>>>();
    if (!j.at("clean").is_null()) r.clean = eval_from_json(j.at("clean"));
    if (!j.at("diversity").is_null()) {
      const Json& d = j.at("diversity");
      DiversityReport dr;
      dr.members = d.at("members").get<std::size_t>();
      dr.mean_jsd = d.at("mean_jsd").get<double>();
      dr.max_jsd = d.at("max_jsd").get<double>();
      dr.mean_dis = d.at("mean_dis").get<double>();
      dr.max_dis = d.at("max_dis").get<double>();
      dr.pairwise_jsd = d.at("pairwise_jsd").get<std::vector<std::vector<double>>>();
      dr.pairwise_dis = d.at("pairwise_dis").get<std::vector<std::vector<double>>>();
      r.diversity = std::move(dr);
    }
    for (const auto& s : j.at("shift").at("results")) {
      r.shifted.push_back({{parse_corruption(s.at("corruption").get<std::string>()),
                            s.at("severity").get<int>()},
                           eval_from_json(s.at("eval"))});
    }
    r.accuracy_sweep = sweep_from_json(j.at("shift").at("accuracy_sweep"));
    r.ece_sweep = sweep_from_json(j.at("shift").at("ece_sweep"));
    r.notes = j.at("notes").get<std::vector<std::string>>();
    if (j.contains("timing")) {
      r.train_seconds = j.at("timing").at("train_seconds").get<double>();
      r.inference_seconds = j.at("timing").at("inference_seconds").get<double>();
      r.threads = j.at("timing").at("threads").get<std::size_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("report: ") + e.what());
  }
  return r;
}

std::string report_to_csv(const Report& report) {
  std::ostringstream out;
  out << "path,value\n";
  flatten(report_to_json(report), "", out);
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

void emit_report(const Report& report, ReportFormat format, const std::filesystem::path& path) {
  write_text(path, format == ReportFormat::json ? report_to_json(report).dump(2) + "\n"
                                                : report_to_csv(report));
}

namespace {

SuiteRow row_of(const Report& r) {
  SuiteRow row;
  row.name = r.config.name;
  row.method = r.config.method.label();
  row.position = position_name(r.config.position);
  row.accuracy = r.clean.accuracy;
  row.ece = r.clean.ece;
  row.size_multiplier = r.size_multiplier;
  row.parameter_count = r.total_parameter_count;
  row.status = r.status;
  row.train_seconds = r.train_seconds;
  return row;
}

}  // namespace

SuiteTable run_suite(const std::vector<ExperimentConfig>& configs, const RunOptions& options) {
  if (configs.empty()) throw ContractError("a suite needs at least one config");
  for (const auto& c : configs) {
    if (!(c.dataset == configs.front().dataset)) {
      throw ContractError("suite mixes datasets: '" + c.name + "' differs from '" +
                          configs.front().name + "'");
    }
  }
  SuiteTable table;
  for (const auto& c : configs) {
    table.reports.push_back(run_experiment(c, options));
    table.rows.push_back(row_of(table.reports.back()));
  }
  return table;
}

std::vector<PositionRow> position_analysis(const ExperimentConfig& base,
                                           const std::vector<Position>& positions,
                                           const RunOptions& options) {
  if (base.method.kind != Method::mc_droprelu && base.method.kind != Method::mc_rrelu) {
    throw ContractError("position analysis needs an mc_droprelu or mc_rrelu method");
  }
  if (positions.empty()) throw ContractError("position analysis needs at least one position");
  const Splits probe = prepare_data(base);
  std::vector<std::pair<std::string, std::vector<Position>>> groups;
  for (auto p : positions) {
    const std::string signature =
        describe_layers(build_network(base.architecture, probe.train.sample_shape(),
                                      probe.train.class_count, base.method, p));
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const auto& g) { return g.first == signature; });
    if (it == groups.end()) groups.push_back({signature, {p}});
    else if (std::find(it->second.begin(), it->second.end(), p) == it->second.end())
      it->second.push_back(p);
  }
  std::vector<PositionRow> rows;
  for (const auto& [signature, group] : groups) {
    ExperimentConfig config = base;
    config.position = group.front();
    PositionRow row;
    row.positions = group;
    row.result = row_of(run_experiment(config, options));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<QSweepRow> q_sweep(const ExperimentConfig& base, const std::vector<double>& qs,
                               const RunOptions& options) {
  if (qs.size() < 2) throw ContractError("a q sweep needs at least two values");
  for (double q : qs)
    if (!(q >= 0.0 && q <= 1.0)) throw ParameterError("sweep q values must lie in [0,1]");
  std::vector<QSweepRow> rows;
  for (double q : qs) {
    ExperimentConfig config = base;
    config.method = MethodSpec{};
    config.method.kind = Method::mc_droprelu;
    config.method.retention = q;
    const Report r = run_experiment(config, options);
    rows.push_back({q, r.clean.accuracy, r.clean.ece, r.status});
  }
  return rows;
}

Json suite_to_json(const std::vector<SuiteRow>& rows, bool include_timing) {
  Json j = Json::array();
  for (const auto& r : rows) {
    Json row = {{"name", r.name},
                {"method", r.method},
                {"position", r.position},
                {"accuracy", r.accuracy},
                {"ece", r.ece},
                {"size_multiplier", r.size_multiplier},
                {"parameter_count", r.parameter_count},
                {"status", r.status}};
    if (include_timing) row["train_seconds"] = r.train_seconds;
    j.push_back(row);
  }
  return j;
}

std::string suite_csv(const std::vector<SuiteRow>& rows) {
  std::ostringstream out;
  out << "name,method,position,accuracy,ece,size_multiplier,parameter_count,status,train_seconds\n";
  for (const auto& r : rows) {
    out << r.name << ",\"" << r.method << "\"," << r.position << ',' << format_double(r.accuracy)
        << ',' << format_double(r.ece) << ',' << format_double(r.size_multiplier) << ','
        << r.parameter_count << ',' << r.status << ',' << format_double(r.train_seconds) << '\n';
  }
  return out.str();
}

Json position_to_json(const std::vector<PositionRow>& rows, bool include_timing) {
  Json j = Json::array();
  for (const auto& r : rows) {
    Json positions = Json::array();
    for (auto p : r.positions) positions.push_back(position_name(p));
    Json row = suite_to_json({r.result}, include_timing)[0];
    row["positions"] = positions;
    j.push_back(row);
  }
  return j;
}

std::string position_csv(const std::vector<PositionRow>& rows) {
  std::ostringstream out;
  out << "positions,accuracy,ece,status,train_seconds\n";
  for (const auto& r : rows) {
    std::string names;
    for (auto p : r.positions) names += (names.empty() ? "" : "+") + position_name(p);
    out << names << ',' << format_double(r.result.accuracy) << ',' << format_double(r.result.ece)
        << ',' << r.result.status << ',' << format_double(r.result.train_seconds) << '\n';
  }
  return out.str();
}

Json q_sweep_to_json(const std::vector<QSweepRow>& rows) {
  Json j = Json::array();
  for (const auto& r : rows)
    j.push_back({{"q", r.q}, {"accuracy", r.accuracy}, {"ece", r.ece}, {"status", r.status}});
  return j;
}

std::string q_sweep_csv(const std::vector<QSweepRow>& rows) {
  std::ostringstream out;
  out << "q,accuracy,ece,status\n";
  for (const auto& r : rows)
    out << format_double(r.q) << ',' << format_double(r.accuracy) << ',' << format_double(r.ece)
        << ',' << r.status << '\n';
  return out.str();
}

}  // namespace rrauq

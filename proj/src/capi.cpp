#include "rrauq/rrauq.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "rrauq/errors.hpp"
#include "rrauq/experiment.hpp"
#include "rrauq/variance_check.hpp"

struct rrauq_config {
  rrauq::ExperimentConfig value;
};

struct rrauq_report {
  rrauq::Report value;
};

struct rrauq_models {
  rrauq::ExperimentConfig config;
  rrauq::TrainedModels value;
};

struct rrauq_predictions {
  rrauq::PredictiveSet value;
  std::vector<int> labels;
};

namespace {

thread_local std::string last_error;

rrauq_status fail(rrauq_status status, const std::string& message) {
  last_error = message;
  return status;
}

rrauq_status status_of(const rrauq::Error& e) {
  if (dynamic_cast<const rrauq::ConfigError*>(&e)) return RRAUQ_ERR_CONFIG;
  if (dynamic_cast<const rrauq::TrainingError*>(&e)) return RRAUQ_ERR_DIVERGED;
  if (dynamic_cast<const rrauq::IoError*>(&e)) return RRAUQ_ERR_IO;
  if (dynamic_cast<const rrauq::FormatError*>(&e)) return RRAUQ_ERR_FORMAT;
  if (dynamic_cast<const rrauq::DimensionError*>(&e)) return RRAUQ_ERR_DIMENSION;
  if (dynamic_cast<const rrauq::ParameterError*>(&e)) return RRAUQ_ERR_PARAMETER;
  if (dynamic_cast<const rrauq::ContractError*>(&e)) return RRAUQ_ERR_CONTRACT;
  if (dynamic_cast<const rrauq::UnsupportedError*>(&e)) return RRAUQ_ERR_UNSUPPORTED;
  return RRAUQ_ERR_INTERNAL;
}

template <typename F>
rrauq_status guard(F&& body) {
  try {
    last_error.clear();
    return body();
  } catch (const rrauq::Error& e) {
    return fail(status_of(e), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(RRAUQ_ERR_CONFIG, e.what());
  } catch (const std::bad_alloc&) {
    return fail(RRAUQ_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(RRAUQ_ERR_INTERNAL, e.what());
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

void put(char** out, const std::string& s) {
  if (out) *out = copy_string(s);
}

rrauq::RunOptions options(size_t threads) { return {threads == 0 ? 1 : threads}; }

#define RRAUQ_REQUIRE(ptr)                                                  \
  do {                                                                      \
    if (!(ptr)) return fail(RRAUQ_ERR_NULL_ARGUMENT, #ptr " is NULL");     \
  } while (0)

std::filesystem::path member_path(const std::filesystem::path& dir, std::size_t m) {
  return dir / ("member_" + std::to_string(m) + ".ckpt");
}

std::string labels_csv(const std::vector<int>& labels) {
  std::string s = "sample,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    s += std::to_string(i) + "," + std::to_string(labels[i]) + "\n";
  }
  return s;
}

std::vector<int> parse_labels_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "sample,label") {
    throw rrauq::FormatError("labels file: expected header 'sample,label'");
  }
  std::vector<int> labels;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    try {
      if (comma == std::string::npos) throw std::invalid_argument("missing comma");
      if (std::stoul(line.substr(0, comma)) != labels.size()) {
        throw std::invalid_argument("samples out of order");
      }
      labels.push_back(std::stoi(line.substr(comma + 1)));
    } catch (const std::exception& e) {
      throw rrauq::FormatError("labels file line " + std::to_string(row) + ": " + e.what());
    }
  }
  return labels;
}

std::string read_text(const std::filesystem::path& path) {
  const auto bytes = rrauq::read_file_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

}  // namespace

extern "C" {

const char* rrauq_version(void) { return "0.1.0"; }

const char* rrauq_last_error(void) { return last_error.c_str(); }

const char* rrauq_status_name(rrauq_status status) {
  switch (status) {
    case RRAUQ_OK: return "ok";
    case RRAUQ_ERR_INTERNAL: return "internal error";
    case RRAUQ_ERR_CONFIG: return "config error";
    case RRAUQ_ERR_DIVERGED: return "training diverged";
    case RRAUQ_ERR_IO: return "i/o error";
    case RRAUQ_ERR_FORMAT: return "format error";
    case RRAUQ_ERR_DIMENSION: return "dimension error";
    case RRAUQ_ERR_PARAMETER: return "parameter error";
    case RRAUQ_ERR_CONTRACT: return "contract error";
    case RRAUQ_ERR_UNSUPPORTED: return "unsupported";
    case RRAUQ_ERR_NULL_ARGUMENT: return "null argument";
  }
  return "unknown";
}

void rrauq_string_free(char* s) { std::free(s); }

rrauq_status rrauq_config_parse(const char* json, rrauq_config** out) {
  RRAUQ_REQUIRE(json);
  RRAUQ_REQUIRE(out);
  return guard([&] {
    rrauq::Json j;
    try {
      j = rrauq::Json::parse(json);
    } catch (const nlohmann::json::parse_error& e) {
      throw rrauq::ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    *out = new rrauq_config{rrauq::config_from_json(j)};
    return RRAUQ_OK;
  });
}

rrauq_status rrauq_config_load(const char* path, rrauq_config** out) {
  RRAUQ_REQUIRE(path);
  RRAUQ_REQUIRE(out);
  return guard([&] {
    *out = new rrauq_config{rrauq::load_config(path)};
    return RRAUQ_OK;
  });
}

rrauq_status rrauq_config_set_seed(rrauq_config* config, uint64_t seed) {
  RRAUQ_REQUIRE(config);
  config->value.seed = seed;
  return RRAUQ_OK;
}

rrauq_status rrauq_config_to_json(const rrauq_config* config, char** out) {
  RRAUQ_REQUIRE(config);
  RRAUQ_REQUIRE(out);
  return guard([&] {
    *out = copy_string(rrauq::config_to_json(config->value).dump(2));
    return RRAUQ_OK;
  });
}

void rrauq_config_free(rrauq_config* config) { delete config; }

rrauq_status rrauq_run_experiment(const rrauq_config* config, size_t threads, rrauq_report** out) {
  RRAUQ_REQUIRE(config);
  RRAUQ_REQUIRE(out);
  return guard([&] {
    auto* report = new rrauq_report{rrauq::run_experiment(config->value, options(threads))};
    *out = report;
    if (report->value.status == "diverged") return fail(RRAUQ_ERR_DIVERGED, report->value.error);
    return RRAUQ_OK;
  });
}

rrauq_status rrauq_report_to_json(const rrauq_report* report, int include_timing, char** out) {
  RRAUQ_REQUIRE(report);
  RRAUQ_REQUIRE(out);
  return guard([&] {
    const auto j = include_timing ? rrauq::report_to_json(report->value)
                                  : rrauq::report_body(report->value);
    *out = copy_string(j.dump(2));
    return RRAUQ_OK;
  });
}

rrauq_status rrauq_report_to_csv(const rrauq_report* report, char** out) {
  RRAUQ_REQUIRE(report);
  RRAUQ_REQUIRE(out);
  return guard([&] {
    *out = copy_string(rrauq::report_to_csv(report->value));
    return RRAUQ_OK;
  });
}

rrauq_status rrauq_report_write(const rrauq_report* report, rrauq_format format, const char* path) {
  RRAUQ_REQUIRE(report);
  RRAUQ_REQUIRE(path);
  return guard([&] {
    rrauq::emit_report(report->value,
                       format == RRAUQ_FORMAT_CSV ? rrauq::ReportFormat::csv : rrauq::ReportFormat::json,
                       path);
    return RRAUQ_OK;
  });
}

rrauq_status rrauq_report_get(const rrauq_report* report, const char* key, double* out) {
  RRAUQ_REQUIRE(report);
  RRAUQ_REQUIRE(key);
  RRAUQ_REQUIRE(out);
  const auto& r = report->value;
  const std::string k = key;
  if (k == "accuracy") *out = r.clean.accuracy;
  else if (k == "ece") *out = r.clean.ece;
  else if (k == "mean_entropy") *out = r.clean.mean_entropy;
  else if (k == "parameter_count") *out = static_cast<double>(r.parameter_count);
  else if (k == "total_parameter_count") *out = static_cast<double>(r.total_parameter_count);
  else if (k == "size_multiplier") *out = r.size_multiplier;
  else if (k == "train_seconds") *out = r.train_seconds;
  else if (k == "inference_seconds") *out = r.inference_seconds;
  else if (k == "mean_jsd" || k == "max_jsd" || k == "mean_dis" || k == "max_dis") {
    if (!r.diversity) return fail(RRAUQ_ERR_CONTRACT, "report has no diversity section");
    const auto& d = *r.diversity;
    *out = k == "mean_jsd" ? d.mean_jsd : k == "max_jsd" ? d.max_jsd : k == "mean_dis" ? d.mean_dis : d.max_dis;
  } else {
    return fail(RRAUQ_ERR_PARAMETER, "unknown report key '" + k + "'");
  }
  return RRAUQ_OK;
}

int rrauq_report_diverged(const rrauq_report* report) {
  return report && report->value.status == "diverged";
}

void rrauq_report_free(rrauq_report* report) { delete report; }

rrauq_status rrauq_train(const rrauq_config* config, size_t threads, rrauq_models** out) {
  RRAUQ_REQUIRE(config);
  RRAUQ_REQUIRE(out);
  return guard([&] {
    const auto splits = rrauq::prepare_data(config->value);
    *out = new rrauq_models{config->value,
                            rrauq::train_models(config->value, splits.train, options(threads))};
    return RRAUQ_OK;
  });
}

size_t rrauq_models_count(const rrauq_models* models) {
  return models ? models->value.members.size() : 0;
}

size_t rrauq_models_parameter_count(const rrauq_models* models) {
  if (!models) return 0;
  std::size_t total = 0;
  for (const auto& m : models->value.members) total += m.parameter_count();
  return total;
}

rrauq_status rrauq_models_summary_json(const rrauq_models* models, char** out) {
  RRAUQ_REQUIRE(models);
  RRAUQ_REQUIRE(out);
  return guard([&] {
    rrauq::Json j;
    j["members"] = models->value.members.size();
    j["parameter_count"] = models->value.members.empty() ? 0 : models->value.members[0].parameter_count();
    j["total_parameter_count"] = rrauq_models_parameter_count(models);
    j["loss_curves"] = models->value.loss_curves;
    *out = copy_string(j.dump(2));
    return RRAUQ_OK;
  });
}

rrauq_status rrauq_models_save(const rrauq_models* models, const char* dir) {
  RRAUQ_REQUIRE(models);
  RRAUQ_REQUIRE(dir);
  return guard([&] {
    for (std::size_t m = 0; m < models->value.members.size(); ++m) {
      rrauq::save_checkpoint(models->value.members[m], member_path(dir, m));
    }
    return RRAUQ_OK;
  });
}

rrauq_status rrauq_models_load(const rrauq_config* config, const char* dir, rrauq_models** out) {
  RRAUQ_REQUIRE(config);
  RRAUQ_REQUIRE(dir);
  RRAUQ_REQUIRE(out);
  return guard([&] {
    const auto splits = rrauq::prepare_data(config->value);
    auto* models = new rrauq_models{config->value, {}};
    try {
      const std::size_t members = rrauq::member_count(config->value.method);
      for (std::size_t m = 0; m < members; ++m) {
        auto net = rrauq::build_network(config->value.architecture, splits.train.sample_shape(),
                                        splits.train.class_count, config->value.method,
                                        config->value.position);
        rrauq::load_checkpoint(net, member_path(dir, m));
        models->value.members.push_back(std::move(net));
      }
    } catch (...) {
      delete models;
      throw;
    }
    *out = models;
    return RRAUQ_OK;
  });
}

void rrauq_models_free(rrauq_models* models) { delete models; }

rrauq_status rrauq_predict(const rrauq_config* config, const rrauq_models* models,
                           const char* corruption, int severity, size_t threads,
                           rrauq_predictions** out) {
  RRAUQ_REQUIRE(config);
  RRAUQ_REQUIRE(models);
  RRAUQ_REQUIRE(out);
  return guard([&] {
    const auto splits = rrauq::prepare_data(config->value);
    const rrauq::Dataset* data = &splits.test;
    std::uint64_t split = 0;
    if (corruption) {
      const rrauq::CorruptionSpec wanted{rrauq::parse_corruption(corruption), severity};
      data = nullptr;
      for (std::size_t k = 0; k < splits.shifted.size(); ++k) {
        const auto& spec = splits.shifted[k].first;
        if (spec.kind == wanted.kind && spec.severity == wanted.severity) {
          data = &splits.shifted[k].second;
          split = k + 1;
        }
      }
      if (!data) {
        throw rrauq::ConfigError(std::string("corruption ") + corruption + " severity " +
                                 std::to_string(severity) + " is not in the config's shift list");
      }
    }
    auto ps = rrauq::predict_models(config->value, models->value, data->features, split,
                                    options(threads));
    *out = new rrauq_predictions{std::move(ps), data->labels};
    return RRAUQ_OK;
  });
}

rrauq_status rrauq_predictions_shape(const rrauq_predictions* ps, size_t* passes, size_t* samples,
                                     size_t* classes) {
  RRAUQ_REQUIRE(ps);
  if (passes) *passes = ps->value.passes();
  if (samples) *samples = ps->value.samples();
  if (classes) *classes = ps->value.classes();
  return RRAUQ_OK;
}

rrauq_status rrauq_predictions_get(const rrauq_predictions* ps, size_t pass, size_t sample,
                                   size_t cls, double* out) {
  RRAUQ_REQUIRE(ps);
  RRAUQ_REQUIRE(out);
  const auto& v = ps->value;
  if (pass >= v.passes() || sample >= v.samples() || cls >= v.classes()) {
    return fail(RRAUQ_ERR_DIMENSION, "prediction index out of range");
  }
  *out = v.probs.data()[(pass * v.samples() + sample) * v.classes() + cls];
  return RRAUQ_OK;
}

int rrauq_predictions_has_labels(const rrauq_predictions* ps) {
  return ps && !ps->labels.empty();
}

rrauq_status rrauq_predictions_set_labels(rrauq_predictions* ps, const int* labels, size_t count) {
  RRAUQ_REQUIRE(ps);
  if (count > 0) RRAUQ_REQUIRE(labels);
  if (count != ps->value.samples()) {
    return fail(RRAUQ_ERR_DIMENSION, "label count " + std::to_string(count) + " != samples " +
                                         std::to_string(ps->value.samples()));
  }
  ps->labels.assign(labels, labels + count);
  return RRAUQ_OK;
}

rrauq_status rrauq_predictions_save(const rrauq_predictions* ps, rrauq_format format,
                                    const char* path, const char* labels_path) {
  RRAUQ_REQUIRE(ps);
  RRAUQ_REQUIRE(path);
  return guard([&] {
    if (format == RRAUQ_FORMAT_CSV) {
      rrauq::write_text(path, rrauq::predictive_set_to_csv(ps->value));
    } else {
      rrauq::write_file_bytes(path, rrauq::encode_predictive_set(ps->value));
    }
    if (labels_path) rrauq::write_text(labels_path, labels_csv(ps->labels));
    return RRAUQ_OK;
  });
}

rrauq_status rrauq_predictions_load(const char* path, const char* labels_path,
                                    rrauq_predictions** out) {
  RRAUQ_REQUIRE(path);
  RRAUQ_REQUIRE(out);
  return guard([&] {
    const auto bytes = rrauq::read_file_bytes(path);
    static const char magic[] = "RRAUQPST";
    const bool binary = bytes.size() >= 8 && std::memcmp(bytes.data(), magic, 8) == 0;
    auto* ps = new rrauq_predictions{
        binary ? rrauq::decode_predictive_set(bytes)
               : rrauq::predictive_set_from_csv(std::string(bytes.begin(), bytes.end())),
        {}};
    if (labels_path) {
      try {
        ps->labels = parse_labels_csv(read_text(labels_path));
        if (ps->labels.size() != ps->value.samples()) {
          throw rrauq::DimensionError("labels file has " + std::to_string(ps->labels.size()) +
                                      " rows, predictions have " +
                                      std::to_string(ps->value.samples()) + " samples");
        }
      } catch (...) {
        delete ps;
        throw;
      }
    }
    *out = ps;
    return RRAUQ_OK;
  });
}

void rrauq_predictions_free(rrauq_predictions* ps) { delete ps; }

rrauq_status rrauq_metrics_json(const rrauq_predictions* ps, size_t bins, size_t diversity_members,
                                char** out) {
  RRAUQ_REQUIRE(ps);
  RRAUQ_REQUIRE(out);
  if (ps->labels.empty()) return fail(RRAUQ_ERR_CONTRACT, "metrics need labels");
  return guard([&] {
    ps->value.validate();
    const auto e = rrauq::evaluate(ps->value, ps->labels, bins);
    rrauq::Json j;
    j["passes"] = ps->value.passes();
    j["samples"] = ps->value.samples();
    j["accuracy"] = e.accuracy;
    j["ece"] = e.ece;
    j["mean_entropy"] = e.mean_entropy;
    rrauq::Json rel = rrauq::Json::array();
    for (const auto& b : e.bins) {
      rel.push_back({{"lo", b.lo}, {"hi", b.hi}, {"count", b.count}, {"accuracy", b.accuracy},
                     {"confidence", b.confidence}});
    }
    j["reliability"] = rel;
    const std::size_t members = std::min(diversity_members, ps->value.passes());
    if (members >= 2) {
      const auto d = rrauq::diversity_matrix(ps->value.head(members));
      j["diversity"] = {{"members", d.members}, {"mean_jsd", d.mean_jsd}, {"max_jsd", d.max_jsd},
                        {"mean_dis", d.mean_dis}, {"max_dis", d.max_dis}};
    } else {
      j["diversity"] = nullptr;
    }
    *out = copy_string(j.dump(2));
    return RRAUQ_OK;
  });
}

rrauq_status rrauq_metrics_csv(const rrauq_predictions* ps, size_t bins, char** out) {
  RRAUQ_REQUIRE(ps);
  RRAUQ_REQUIRE(out);
  if (ps->labels.empty()) return fail(RRAUQ_ERR_CONTRACT, "metrics need labels");
  return guard([&] {
    ps->value.validate();
    const auto summary = rrauq::aggregate(ps->value);
    std::vector<bool> correct(ps->labels.size());
    std::vector<double> confidence = summary.confidence;
    for (std::size_t i = 0; i < correct.size(); ++i) {
      correct[i] = summary.predicted_label[i] == ps->labels[i];
      confidence[i] = std::min(confidence[i], 1.0);
    }
    *out = copy_string(rrauq::reliability_csv(rrauq::ece(confidence, correct, bins)));
    return RRAUQ_OK;
  });
}

rrauq_status rrauq_variance_check(const char* options_json, uint64_t seed, size_t threads,
                                  char** json_out, char** csv_out) {
  return guard([&] {
    rrauq::Json j = nullptr;
    if (options_json && *options_json) {
      try {
        j = rrauq::Json::parse(options_json);
      } catch (const nlohmann::json::parse_error& e) {
        throw rrauq::ConfigError(std::string("variance-check config is not valid JSON: ") + e.what());
      }
    }
    auto o = rrauq::variance_options_from_json(j);
    if (!j.is_object() || !j.contains("seed")) o.seed = seed;
    o.threads = threads == 0 ? 1 : threads;
    const auto report = rrauq::run_variance_check(o);
    put(json_out, rrauq::variance_report_to_json(report).dump(2));
    put(csv_out, rrauq::variance_scan_csv(report));
    return RRAUQ_OK;
  });
}

rrauq_status rrauq_run_suite(const rrauq_config* const* configs, size_t count, size_t threads,
                             char** json_out, char** csv_out) {
  if (count > 0) RRAUQ_REQUIRE(configs);
  return guard([&] {
    std::vector<rrauq::ExperimentConfig> list;
    for (size_t i = 0; i < count; ++i) {
      if (!configs[i]) throw rrauq::ContractError("suite config " + std::to_string(i) + " is NULL");
      list.push_back(configs[i]->value);
    }
    const auto table = rrauq::run_suite(list, options(threads));
    put(json_out, rrauq::suite_to_json(table.rows, false).dump(2));
    put(csv_out, rrauq::suite_csv(table.rows));
    return RRAUQ_OK;
  });
}

rrauq_status rrauq_position_analysis(const rrauq_config* base, const char* positions,
                                     size_t threads, char** json_out, char** csv_out) {
  RRAUQ_REQUIRE(base);
  RRAUQ_REQUIRE(positions);
  return guard([&] {
    std::vector<rrauq::Position> list;
    std::istringstream in(positions);
    std::string item;
    while (std::getline(in, item, ',')) {
      if (!item.empty()) list.push_back(rrauq::parse_position(item));
    }
    const auto rows = rrauq::position_analysis(base->value, list, options(threads));
    put(json_out, rrauq::position_to_json(rows, false).dump(2));
    put(csv_out, rrauq::position_csv(rows));
    return RRAUQ_OK;
  });
}

rrauq_status rrauq_q_sweep(const rrauq_config* base, const double* qs, size_t count, size_t threads,
                           char** json_out, char** csv_out) {
  RRAUQ_REQUIRE(base);
  if (count > 0) RRAUQ_REQUIRE(qs);
  return guard([&] {
    const auto rows = rrauq::q_sweep(base->value, std::vector<double>(qs, qs + count), options(threads));
    put(json_out, rrauq::q_sweep_to_json(rows).dump(2));
    put(csv_out, rrauq::q_sweep_csv(rows));
    return RRAUQ_OK;
  });
}

}  // extern "C"

// rrauq command line harness. Talks to the library through the C API only.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rrauq/rrauq.h"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

enum Exit { ok = 0, internal = 1, config = 2, diverged = 3, io = 4 };

int exit_code(rrauq_status s) {
  switch (s) {
    case RRAUQ_OK: return ok;
    case RRAUQ_ERR_DIVERGED: return diverged;
    case RRAUQ_ERR_IO:
    case RRAUQ_ERR_FORMAT: return io;
    case RRAUQ_ERR_CONFIG:
    case RRAUQ_ERR_PARAMETER:
    case RRAUQ_ERR_CONTRACT:
    case RRAUQ_ERR_DIMENSION:
    case RRAUQ_ERR_UNSUPPORTED: return config;
    default: return internal;
  }
}

struct Failure {
  int code;
  std::string message;
};

void check(rrauq_status s, const std::string& what) {
  if (s != RRAUQ_OK) {
    throw Failure{exit_code(s), what + ": " + rrauq_status_name(s) + ": " + rrauq_last_error()};
  }
}

// Owns a string returned by the library.
struct Text {
  char* p = nullptr;
  ~Text() { rrauq_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::string format = "json";
  std::optional<std::size_t> threads;

  std::size_t thread_count() const {
    if (threads) return *threads;
    if (const char* env = std::getenv("RRA_UQ_THREADS"); env && *env) {
      try {
        std::size_t used = 0;
        const unsigned long v = std::stoul(env, &used);
        if (used == std::string(env).size() && v > 0) return v;
      } catch (const std::exception&) {
      }
      throw Failure{Exit::config, std::string("RRA_UQ_THREADS must be a positive integer, got '") + env + "'"};
    }
    return 1;
  }
  bool csv() const { return format == "csv"; }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{Exit::io, "cannot read " + path};
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Failure{Exit::io, "cannot write " + path.string()};
  std::cerr << "wrote " << path.string() << '\n';
}

fs::path out_dir(const Common& c) {
  std::error_code ec;
  fs::create_directories(c.out, ec);
  if (ec || !fs::is_directory(c.out)) throw Failure{Exit::io, "cannot create output directory " + c.out};
  return c.out;
}

Json read_json(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Failure{Exit::config, path + ": " + e.what()};
  }
}

// Pulls a harness-only key out of a config object before strict parsing.
std::optional<Json> take(Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) return std::nullopt;
  Json v = j[key];
  j.erase(key);
  return v;
}

struct Config {
  rrauq_config* p = nullptr;
  Config() = default;
  Config(const Config&) = delete;
  Config(Config&& o) noexcept : p(o.p) { o.p = nullptr; }
  ~Config() { rrauq_config_free(p); }
};

Config parse_config(const Json& j, const Common& c, const std::string& origin) {
  Config cfg;
  check(rrauq_config_parse(j.dump().c_str(), &cfg.p), origin);
  if (c.seed) check(rrauq_config_set_seed(cfg.p, *c.seed), origin);
  return cfg;
}

Json require_config(const Common& c) {
  if (c.config_path.empty()) throw Failure{Exit::config, "--config is required"};
  return read_json(c.config_path);
}

bool any_diverged(const Json& rows) {
  for (const auto& r : rows) {
    if (r.is_object() && r.value("status", "") == "diverged") return true;
  }
  return false;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int cmd_run(const Common& c) {
  Json j = require_config(c);
  Config cfg = parse_config(j, c, c.config_path);
  rrauq_report* report = nullptr;
  const rrauq_status s = rrauq_run_experiment(cfg.p, c.thread_count(), &report);
  if (!report) check(s, "run");
  const fs::path dir = out_dir(c);
  const fs::path path = dir / (c.csv() ? "report.csv" : "report.json");
  const rrauq_status w = rrauq_report_write(report, c.csv() ? RRAUQ_FORMAT_CSV : RRAUQ_FORMAT_JSON,
                                            path.string().c_str());
  rrauq_report_free(report);
  check(w, "write report");
  std::cerr << "wrote " << path.string() << '\n';
  check(s, "run");
  return ok;
}

int cmd_train(const Common& c) {
  Json j = require_config(c);
  Config cfg = parse_config(j, c, c.config_path);
  rrauq_models* models = nullptr;
  check(rrauq_train(cfg.p, c.thread_count(), &models), "train");
  const fs::path dir = out_dir(c);
  Text summary;
  rrauq_status s = rrauq_models_summary_json(models, &summary.p);
  if (s == RRAUQ_OK) s = rrauq_models_save(models, dir.string().c_str());
  rrauq_models_free(models);
  check(s, "save models");
  const Json sj = Json::parse(summary.str());
  if (c.csv()) {
    std::string csv = "member,epoch,loss\n";
    const auto& curves = sj["loss_curves"];
    for (std::size_t m = 0; m < curves.size(); ++m) {
      for (std::size_t e = 0; e < curves[m].size(); ++e) {
        csv += std::to_string(m) + "," + std::to_string(e) + "," + fmt(curves[m][e].get<double>()) + "\n";
      }
    }
    write_file(dir / "train.csv", csv);
  } else {
    write_file(dir / "train.json", summary.str() + "\n");
  }
  return ok;
}

int cmd_predict(const Common& c, const std::string& models_dir, const std::string& corruption,
                int severity) {
  Json j = require_config(c);
  Config cfg = parse_config(j, c, c.config_path);
  rrauq_models* models = nullptr;
  check(rrauq_models_load(cfg.p, models_dir.empty() ? c.out.c_str() : models_dir.c_str(), &models),
        "load models");
  rrauq_predictions* ps = nullptr;
  rrauq_status s = rrauq_predict(cfg.p, models, corruption.empty() ? nullptr : corruption.c_str(),
                                 severity, c.thread_count(), &ps);
  rrauq_models_free(models);
  check(s, "predict");
  const fs::path dir = out_dir(c);
  const fs::path path = dir / (c.csv() ? "predictions.csv" : "predictions.bin");
  const fs::path labels = dir / "labels.csv";
  s = rrauq_predictions_save(ps, c.csv() ? RRAUQ_FORMAT_CSV : RRAUQ_FORMAT_JSON, path.string().c_str(),
                             labels.string().c_str());
  rrauq_predictions_free(ps);
  check(s, "save predictions");
  std::cerr << "wrote " << path.string() << " and " << labels.string() << '\n';
  return ok;
}

int cmd_metrics(const Common& c, const std::string& predictions, const std::string& labels,
                std::size_t bins, std::size_t members) {
  rrauq_predictions* ps = nullptr;
  check(rrauq_predictions_load(predictions.c_str(), labels.c_str(), &ps), "load predictions");
  Text text;
  const rrauq_status s = c.csv() ? rrauq_metrics_csv(ps, bins, &text.p)
                                 : rrauq_metrics_json(ps, bins, members, &text.p);
  rrauq_predictions_free(ps);
  check(s, "metrics");
  write_file(out_dir(c) / (c.csv() ? "reliability.csv" : "metrics.json"), text.str() + (c.csv() ? "" : "\n"));
  return ok;
}

int cmd_variance(const Common& c) {
  std::string options;
  if (!c.config_path.empty()) options = read_json(c.config_path).dump();
  Text json, csv;
  check(rrauq_variance_check(options.empty() ? nullptr : options.c_str(), c.seed.value_or(0),
                             c.thread_count(), &json.p, &csv.p),
        "variance-check");
  const fs::path dir = out_dir(c);
  if (c.csv()) {
    write_file(dir / "dominance.csv", csv.str());
  } else {
    write_file(dir / "variance.json", json.str() + "\n");
  }
  const Json r = Json::parse(json.str());
  auto count = [&](const char* section, const char* flag) {
    std::size_t n = 0;
    for (const auto& e : r[section]) n += e[flag].get<bool>();
    return std::to_string(n) + "/" + std::to_string(r[section].size());
  };
  std::cout << "dropout within 3 SE: " << count("dropout_agreement", "within_3se") << '\n'
            << "droprelu (negative x) within 3 SE: " << count("droprelu_negative_agreement", "within_3se")
            << '\n'
            << "droprelu (mixed x) epsilon >= -3 SE: " << count("droprelu_mixed_epsilon", "nonnegative")
            << '\n';
  return ok;
}

int emit_table(const Common& c, const char* stem, const Text& json, const Text& csv) {
  const fs::path dir = out_dir(c);
  if (c.csv()) {
    write_file(dir / (std::string(stem) + ".csv"), csv.str());
  } else {
    write_file(dir / (std::string(stem) + ".json"), json.str() + "\n");
  }
  return any_diverged(Json::parse(json.str())) ? diverged : ok;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> values;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Failure{Exit::config, "not a number: '" + item + "'"};
    }
  }
  return values;
}

int cmd_sweep(const Common& c, const std::string& qs_flag) {
  Json j = require_config(c);
  std::vector<double> qs;
  if (auto v = take(j, "q_values")) {
    try {
      qs = v->get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw Failure{Exit::config, std::string("q_values: ") + e.what()};
    }
  }
  if (!qs_flag.empty()) qs = parse_list(qs_flag);
  if (qs.empty()) qs = {0.8, 0.85, 0.9, 0.95};
  Config cfg = parse_config(j, c, c.config_path);
  Text json, csv;
  check(rrauq_q_sweep(cfg.p, qs.data(), qs.size(), c.thread_count(), &json.p, &csv.p), "sweep");
  return emit_table(c, "sweep", json, csv);
}

int cmd_position(const Common& c, std::string positions) {
  Json j = require_config(c);
  if (auto v = take(j, "positions"); v && positions.empty()) {
    try {
      for (const auto& p : *v) positions += (positions.empty() ? "" : ",") + p.get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Failure{Exit::config, std::string("positions: ") + e.what()};
    }
  }
  if (positions.empty()) positions = "all,first,last";
  Config cfg = parse_config(j, c, c.config_path);
  Text json, csv;
  check(rrauq_position_analysis(cfg.p, positions.c_str(), c.thread_count(), &json.p, &csv.p),
        "position");
  return emit_table(c, "position", json, csv);
}

int cmd_suite(const Common& c) {
  Json j = require_config(c);
  Json list;
  if (j.is_array()) {
    list = j;
  } else if (auto v = take(j, "experiments")) {
    list = *v;
  } else {
    throw Failure{Exit::config, "suite config needs an 'experiments' array"};
  }
  if (!list.is_array()) throw Failure{Exit::config, "'experiments' must be an array"};
  std::vector<Config> configs;
  std::vector<const rrauq_config*> handles;
  for (std::size_t i = 0; i < list.size(); ++i) {
    configs.push_back(parse_config(list[i], c, c.config_path + " experiments[" + std::to_string(i) + "]"));
    handles.push_back(configs.back().p);
  }
  Text json, csv;
  check(rrauq_run_suite(handles.data(), handles.size(), c.thread_count(), &json.p, &csv.p), "suite");
  return emit_table(c, "suite", json, csv);
}

void add_common(CLI::App* app, Common& c, bool config_required) {
  auto* opt = app->add_option("--config", c.config_path, "JSON config file");
  if (config_required) opt->required();
  app->add_option("--seed", c.seed, "master seed (overrides the config)");
  app->add_option("--out", c.out, "output directory")->capture_default_str();
  app->add_option("--format", c.format, "output format")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  app->add_option("--threads", c.threads, "worker threads (default: $RRA_UQ_THREADS or 1)")
      ->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Randomized ReLU activation uncertainty harness"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(rrauq_version()));

  Common c;
  auto* run = app.add_subcommand("run", "train, predict and evaluate one experiment");
  add_common(run, c, true);

  auto* train = app.add_subcommand("train", "train and save checkpoints");
  add_common(train, c, true);

  std::string models_dir, corruption;
  int severity = 0;
  auto* predict = app.add_subcommand("predict", "predictions of saved models on the test split");
  add_common(predict, c, true);
  predict->add_option("--models", models_dir, "checkpoint directory (default: --out)");
  predict->add_option("--corruption", corruption, "corruption name, clean data if omitted");
  predict->add_option("--severity", severity, "corruption severity")->check(CLI::Range(1, 5));

  std::string predictions, labels;
  std::size_t bins = 30, members = 4;
  auto* metrics = app.add_subcommand("metrics", "accuracy, ECE, entropy and diversity");
  add_common(metrics, c, false);
  metrics->add_option("--predictions", predictions, "binary or CSV predictive set")->required();
  metrics->add_option("--labels", labels, "sample,label CSV")->required();
  metrics->add_option("--bins", bins, "ECE bins")->check(CLI::PositiveNumber)->capture_default_str();
  metrics->add_option("--members", members, "passes used for diversity")->capture_default_str();

  auto* variance = app.add_subcommand("variance-check", "empirical variance laws and dominance scan");
  add_common(variance, c, false);

  std::string qs;
  auto* sweep = app.add_subcommand("sweep", "accuracy and ECE across retention rates");
  add_common(sweep, c, true);
  sweep->add_option("--q", qs, "comma separated q values");

  std::string positions;
  auto* position = app.add_subcommand("position", "activation position analysis");
  add_common(position, c, true);
  position->add_option("--positions", positions, "comma separated subset of all,first,last");

  auto* suite = app.add_subcommand("suite", "comparison table over several methods");
  add_common(suite, c, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : Exit::config;
  }

  try {
    if (*run) return cmd_run(c);
    if (*train) return cmd_train(c);
    if (*predict) {
      if (!corruption.empty() && severity == 0) throw Failure{Exit::config, "--corruption needs --severity"};
      return cmd_predict(c, models_dir, corruption, severity);
    }
    if (*metrics) return cmd_metrics(c, predictions, labels, bins, members);
    if (*variance) return cmd_variance(c);
    if (*sweep) return cmd_sweep(c, qs);
    if (*position) return cmd_position(c, positions);
    if (*suite) return cmd_suite(c);
  } catch (const Failure& f) {
    std::cerr << "rrauq: " << f.message << '\n';
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "rrauq: " << e.what() << '\n';
    return Exit::internal;
  }
  return Exit::internal;
}

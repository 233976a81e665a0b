#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "rrauq/rrauq.h"

namespace {

const char* kConfig = R"({
  "method": {"kind": "mc_droprelu", "q": 0.9},
  "dataset": {"kind": "two_moons", "n_train": 150, "n_test": 60},
  "training": {"epochs": 3, "batch_size": 32},
  "passes": 5,
  "seed": 4,
  "shift": {"corruptions": ["gaussian_noise"], "severities": [2]}
})";

std::string take(char* s) {
  std::string out = s ? s : "";
  rrauq_string_free(s);
  return out;
}

}  // namespace

TEST_CASE("config errors carry a message") {
  rrauq_config* c = nullptr;
  CHECK(rrauq_config_parse("{\"method\": \"nope\"}", &c) == RRAUQ_ERR_CONFIG);
  CHECK(c == nullptr);
  CHECK(std::strlen(rrauq_last_error()) > 0);
  CHECK(rrauq_config_parse("{not json", &c) == RRAUQ_ERR_CONFIG);
  CHECK(rrauq_config_parse(nullptr, &c) == RRAUQ_ERR_NULL_ARGUMENT);
  CHECK(rrauq_config_load("/nonexistent.json", &c) == RRAUQ_ERR_IO);
  CHECK(std::string(rrauq_status_name(RRAUQ_ERR_DIVERGED)) == "training diverged");
}

TEST_CASE("run experiment through the C API") {
  rrauq_config* c = nullptr;
  REQUIRE(rrauq_config_parse(kConfig, &c) == RRAUQ_OK);
  CHECK(std::strlen(rrauq_last_error()) == 0);
  rrauq_report* r = nullptr;
  REQUIRE(rrauq_run_experiment(c, 2, &r) == RRAUQ_OK);
  double acc = 0.0, mult = 0.0, jsd = -1.0;
  CHECK(rrauq_report_get(r, "accuracy", &acc) == RRAUQ_OK);
  CHECK(rrauq_report_get(r, "size_multiplier", &mult) == RRAUQ_OK);
  CHECK(rrauq_report_get(r, "mean_jsd", &jsd) == RRAUQ_OK);
  CHECK(acc > 0.5);
  CHECK(mult == 1.0);
  CHECK(jsd >= 0.0);
  CHECK(rrauq_report_get(r, "bogus", &acc) == RRAUQ_ERR_PARAMETER);
  char* body = nullptr;
  REQUIRE(rrauq_report_to_json(r, 0, &body) == RRAUQ_OK);
  const auto j = nlohmann::json::parse(take(body));
  CHECK(!j.contains("timing"));
  CHECK(j["status"] == "ok");
  CHECK(rrauq_report_write(r, RRAUQ_FORMAT_JSON, "/nonexistent/dir/r.json") == RRAUQ_ERR_IO);
  rrauq_report_free(r);

  rrauq_report* r2 = nullptr;
  REQUIRE(rrauq_run_experiment(c, 1, &r2) == RRAUQ_OK);
  char* body2 = nullptr;
  REQUIRE(rrauq_report_to_json(r2, 0, &body2) == RRAUQ_OK);
  CHECK(nlohmann::json::parse(take(body2)) == j);
  rrauq_report_free(r2);
  rrauq_config_free(c);
}

TEST_CASE("divergence status") {
  rrauq_config* c = nullptr;
  REQUIRE(rrauq_config_parse(R"({"method": "single", "seed": 2,
      "dataset": {"n_train": 100, "n_test": 20},
      "training": {"epochs": 5, "batch_size": 10, "lr": 1e7, "schedule": []}})", &c) == RRAUQ_OK);
  rrauq_report* r = nullptr;
  CHECK(rrauq_run_experiment(c, 1, &r) == RRAUQ_ERR_DIVERGED);
  REQUIRE(r != nullptr);
  CHECK(rrauq_report_diverged(r));
  rrauq_report_free(r);
  rrauq_config_free(c);
}

TEST_CASE("train, checkpoint, predict and evaluate") {
  const auto dir = std::filesystem::temp_directory_path() / "rrauq_capi_test";
  std::filesystem::create_directories(dir);
  rrauq_config* c = nullptr;
  REQUIRE(rrauq_config_parse(kConfig, &c) == RRAUQ_OK);
  rrauq_models* m = nullptr;
  REQUIRE(rrauq_train(c, 1, &m) == RRAUQ_OK);
  CHECK(rrauq_models_count(m) == 1);
  CHECK(rrauq_models_parameter_count(m) > 0);
  REQUIRE(rrauq_models_save(m, dir.string().c_str()) == RRAUQ_OK);
  rrauq_models* loaded = nullptr;
  REQUIRE(rrauq_models_load(c, dir.string().c_str(), &loaded) == RRAUQ_OK);

  rrauq_predictions* a = nullptr;
  rrauq_predictions* b = nullptr;
  REQUIRE(rrauq_predict(c, m, nullptr, 0, 1, &a) == RRAUQ_OK);
  REQUIRE(rrauq_predict(c, loaded, nullptr, 0, 3, &b) == RRAUQ_OK);
  size_t passes = 0, samples = 0, classes = 0;
  rrauq_predictions_shape(a, &passes, &samples, &classes);
  CHECK(passes == 5);
  CHECK(samples == 60);
  CHECK(classes == 2);
  for (size_t s = 0; s < samples; ++s) {
    double x = 0.0, y = 0.0;
    rrauq_predictions_get(a, 2, s, 1, &x);
    rrauq_predictions_get(b, 2, s, 1, &y);
    CHECK(x == y);
  }
  double unused = 0.0;
  CHECK(rrauq_predictions_get(a, 5, 0, 0, &unused) == RRAUQ_ERR_DIMENSION);
  CHECK(rrauq_predict(c, m, "gaussian_noise", 5, 1, &b) == RRAUQ_ERR_CONFIG);
  CHECK(rrauq_predict(c, m, "fog", 2, 1, &b) == RRAUQ_ERR_CONFIG);

  const auto bin = (dir / "p.bin").string(), csv = (dir / "p.csv").string(), labels = (dir / "l.csv").string();
  REQUIRE(rrauq_predictions_save(a, RRAUQ_FORMAT_JSON, bin.c_str(), labels.c_str()) == RRAUQ_OK);
  REQUIRE(rrauq_predictions_save(a, RRAUQ_FORMAT_CSV, csv.c_str(), nullptr) == RRAUQ_OK);
  rrauq_predictions* from_bin = nullptr;
  rrauq_predictions* from_csv = nullptr;
  REQUIRE(rrauq_predictions_load(bin.c_str(), labels.c_str(), &from_bin) == RRAUQ_OK);
  REQUIRE(rrauq_predictions_load(csv.c_str(), labels.c_str(), &from_csv) == RRAUQ_OK);
  char* m1 = nullptr;
  char* m2 = nullptr;
  char* m3 = nullptr;
  REQUIRE(rrauq_metrics_json(a, 30, 4, &m1) == RRAUQ_OK);
  REQUIRE(rrauq_metrics_json(from_bin, 30, 4, &m2) == RRAUQ_OK);
  REQUIRE(rrauq_metrics_json(from_csv, 30, 4, &m3) == RRAUQ_OK);
  const std::string s1 = take(m1);
  CHECK(s1 == take(m2));
  CHECK(s1 == take(m3));
  const auto mj = nlohmann::json::parse(s1);
  CHECK(mj["diversity"]["members"] == 4);

  rrauq_predictions* unlabeled = nullptr;
  REQUIRE(rrauq_predictions_load(bin.c_str(), nullptr, &unlabeled) == RRAUQ_OK);
  char* none = nullptr;
  CHECK(rrauq_metrics_json(unlabeled, 30, 4, &none) == RRAUQ_ERR_CONTRACT);
  const int bad[2] = {0, 1};
  CHECK(rrauq_predictions_set_labels(unlabeled, bad, 2) == RRAUQ_ERR_DIMENSION);
  CHECK(rrauq_predictions_load((dir / "missing.bin").string().c_str(), nullptr, &unlabeled) == RRAUQ_ERR_IO);

  rrauq_predictions_free(a);
  rrauq_predictions_free(b);
  rrauq_predictions_free(from_bin);
  rrauq_predictions_free(from_csv);
  rrauq_predictions_free(unlabeled);
  rrauq_models_free(m);
  rrauq_models_free(loaded);
  rrauq_config_free(c);
  std::filesystem::remove_all(dir);
}

TEST_CASE("variance check and harness tables") {
  char* json = nullptr;
  char* csv = nullptr;
  REQUIRE(rrauq_variance_check(R"({"vectors": 1, "trials": 10000, "scan_vectors": 1,
      "scan_trials": 10000, "p_grid": [0.3], "q_grid": [0.7]})", 1, 2, &json, &csv) == RRAUQ_OK);
  const auto j = nlohmann::json::parse(take(json));
  CHECK(j["dropout_agreement"].size() == 2);
  CHECK(take(csv).rfind("vector,p,q", 0) == 0);
  CHECK(rrauq_variance_check(R"({"trials": 5})", 1, 1, &json, nullptr) == RRAUQ_ERR_CONFIG);

  rrauq_config* c = nullptr;
  REQUIRE(rrauq_config_parse(kConfig, &c) == RRAUQ_OK);
  const double qs[] = {0.8, 0.95};
  REQUIRE(rrauq_q_sweep(c, qs, 2, 1, &json, nullptr) == RRAUQ_OK);
  CHECK(nlohmann::json::parse(take(json)).size() == 2);
  CHECK(rrauq_q_sweep(c, qs, 1, 1, &json, nullptr) == RRAUQ_ERR_CONTRACT);
  REQUIRE(rrauq_position_analysis(c, "all,first", 1, nullptr, &csv) == RRAUQ_OK);
  CHECK(take(csv).find("all") != std::string::npos);
  CHECK(rrauq_position_analysis(c, "middle", 1, nullptr, &csv) == RRAUQ_ERR_CONFIG);
  const rrauq_config* suite[] = {c, c};
  REQUIRE(rrauq_run_suite(suite, 2, 2, &json, nullptr) == RRAUQ_OK);
  CHECK(nlohmann::json::parse(take(json)).size() == 2);
  rrauq_config_free(c);
}

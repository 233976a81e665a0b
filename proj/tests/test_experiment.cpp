#include <cmath>

#include "doctest.h"
#include "rrauq/errors.hpp"
#include "rrauq/experiment.hpp"

using namespace rrauq;

namespace {

ExperimentConfig small(Method kind) {
  ExperimentConfig c;
  c.method.kind = kind;
  c.dataset.n_train = 120;
  c.dataset.n_test = 80;
  c.training.epochs = 4;
  c.training.batch_size = 32;
  c.passes = 6;
  c.seed = 11;
  c.shift.corruptions = {CorruptionKind::rotation};
  c.shift.severities = {1, 4};
  return c;
}

// Element count over parameter tensors, walked from the layer list.
std::size_t walk_params(const NetworkGraph& net) {
  std::size_t total = 0;
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    const auto& kind = net.layers()[i].kind;
    if (const auto* d = std::get_if<DenseLayer>(&kind)) total += d->out * (d->in + 1);
    if (const auto* c = std::get_if<Conv2dLayer>(&kind))
      total += c->out_channels * (c->in_channels * c->kernel * c->kernel + 1);
  }
  return total;
}

}  // namespace

TEST_CASE("config defaults and strict parsing") {
  const auto c = config_from_json(Json::parse(R"({"method": "mc_droprelu"})"));
  CHECK(c.method.kind == Method::mc_droprelu);
  CHECK(c.training.momentum == 0.9);
  CHECK(c.training.weight_decay == 1e-4);
  CHECK(c.training.epochs == 100);
  CHECK(c.training.batch_size == 64);
  REQUIRE(c.training.schedule.size() == 3);
  CHECK(c.training.schedule[1].fraction == 0.675);
  CHECK(c.ece_bins == 30);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"mehtod": "single"})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"method": {"kind": "mc_droprelu", "q": 1.5}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"method": {"kind": "mc_dropout", "p": 1.0}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"method": "bogus"})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"passes": 0})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"training": {"epochs": "ten"}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"architecture": "mlp-0x8"})")), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), IoError);
}

TEST_CASE("config json round trip") {
  auto c = small(Method::mc_rrelu);
  c.method.lower = 0.2;
  c.method.upper = 0.3;
  c.position = Position::last;
  const auto back = config_from_json(config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));
  CHECK(back.method.lower == 0.2);
  CHECK(back.position == Position::last);
}

TEST_CASE("network presets place stochastic layers by position") {
  MethodSpec m;
  m.kind = Method::mc_droprelu;
  m.retention = 0.8;
  const auto all = build_network("mlp-3x8", {2}, 2, m, Position::all);
  const auto first = build_network("mlp-3x8", {2}, 2, m, Position::first);
  const auto last = build_network("mlp-3x8", {2}, 2, m, Position::last);
  auto stochastic_sites = [](const NetworkGraph& n) {
    std::vector<std::size_t> s;
    for (std::size_t i = 0; i < n.layers().size(); ++i)
      if (const auto* a = std::get_if<ActivationLayer>(&n.layers()[i].kind); a && a->kind.stochastic()) s.push_back(i);
    return s;
  };
  CHECK(stochastic_sites(all).size() == 3);
  CHECK(stochastic_sites(first) == std::vector<std::size_t>{1});
  CHECK(stochastic_sites(last) == std::vector<std::size_t>{5});
  MethodSpec d;
  d.kind = Method::mc_dropout;
  const auto drop = build_network("mlp-2x8", {2}, 2, d, Position::all);
  std::size_t dropouts = 0;
  for (const auto& l : drop.layers()) dropouts += std::holds_alternative<DropoutLayer>(l.kind);
  CHECK(dropouts == 2);
  CHECK(drop.parameter_count() == all.parameter_count() - (8 * 9));
  const auto cnn = build_network("cnn-small", {1, 28, 28}, 10, m, Position::all);
  CHECK(cnn.output_shape() == Shape{10});
  CHECK(walk_params(cnn) == cnn.parameter_count());
  CHECK_THROWS_AS(build_network("cnn-small", {2}, 2, m, Position::all), ConfigError);
  CHECK_THROWS_AS(build_network("resnet", {2}, 2, m, Position::all), ConfigError);
}

TEST_CASE("parameter counts and size multipliers") {
  const auto single = run_experiment(small(Method::single));
  auto ens_cfg = small(Method::deep_ensemble);
  ens_cfg.method.members = 4;
  const auto ens = run_experiment(ens_cfg);
  const auto mc = run_experiment(small(Method::mc_dropout));
  CHECK(single.size_multiplier == 1.0);
  CHECK(ens.total_parameter_count == 4 * single.parameter_count);
  CHECK(ens.size_multiplier == 4.0);
  CHECK(mc.size_multiplier == 1.0);
  const auto net = build_network("mlp-2x64", {2}, 2, MethodSpec{}, Position::all);
  CHECK(single.parameter_count == walk_params(net));
}

TEST_CASE("single reports an explicit null diversity section") {
  const auto r = run_experiment(small(Method::single));
  CHECK(!r.diversity);
  const auto j = report_body(r);
  REQUIRE(j.contains("diversity"));
  CHECK(j["diversity"].is_null());
}

TEST_CASE("ensemble of one equals single") {
  auto one = small(Method::deep_ensemble);
  one.method.members = 1;
  const auto a = run_experiment(one);
  const auto b = run_experiment(small(Method::single));
  CHECK(a.clean.accuracy == b.clean.accuracy);
  CHECK(a.clean.ece == b.clean.ece);
}

TEST_CASE("reports are deterministic across runs and threads") {
  const auto c = small(Method::mc_droprelu);
  const auto a = report_body(run_experiment(c, {1})).dump();
  const auto b = report_body(run_experiment(c, {3})).dump();
  CHECK(a == b);
  auto ens = small(Method::deep_ensemble);
  ens.method.members = 3;
  CHECK(report_body(run_experiment(ens, {1})).dump() == report_body(run_experiment(ens, {4})).dump());
}

TEST_CASE("changing the pass count leaves training untouched") {
  auto a = small(Method::mc_droprelu);
  auto b = a;
  b.passes = 11;
  CHECK(run_experiment(a).loss_curves == run_experiment(b).loss_curves);
}

TEST_CASE("report json round trip and csv parity") {
  const auto r = run_experiment(small(Method::mc_rrelu));
  const auto j = report_to_json(r);
  const auto back = report_from_json(Json::parse(j.dump()));
  CHECK(report_body(back) == report_body(r));
  const std::string csv = report_to_csv(r);
  CHECK(csv.rfind("path,value\n", 0) == 0);
  CHECK(csv.find("clean.accuracy," + format_double(r.clean.accuracy) + "\n") != std::string::npos);
  CHECK(csv.find("clean.ece," + format_double(r.clean.ece) + "\n") != std::string::npos);
  // Severity 0 is the clean split.
  CHECK(r.ece_sweep.front().severity == 0);
  CHECK(r.ece_sweep.front().median == r.clean.ece);
  CHECK(r.ece_sweep.size() == 3);
}

TEST_CASE("emit_report reports unwritable paths") {
  const auto r = run_experiment(small(Method::single));
  CHECK_THROWS_AS(emit_report(r, ReportFormat::json, "/nonexistent/dir/report.json"), IoError);
}

TEST_CASE("divergence is recorded in the report") {
  auto c = small(Method::single);
  c.training.learning_rate = 1e7;
  c.training.schedule.clear();
  const auto r = run_experiment(c);
  CHECK(r.status == "diverged");
  CHECK(!r.error.empty());
}

TEST_CASE("suite tables") {
  std::vector<ExperimentConfig> configs = {small(Method::single), small(Method::mc_dropout), small(Method::mc_droprelu)};
  configs[2].method.retention = 0.8;
  const auto t = run_suite(configs);
  REQUIRE(t.rows.size() == 3);
  CHECK(t.rows[0].size_multiplier == 1.0);
  CHECK(suite_to_json(t.rows, false) == suite_to_json(run_suite(configs, {2}).rows, false));
  configs[1].dataset.noise = 0.2;
  CHECK_THROWS_AS(run_suite(configs), ContractError);
  CHECK_THROWS_AS(run_suite({}), ContractError);
}

TEST_CASE("position analysis deduplicates identical networks") {
  auto c = small(Method::mc_droprelu);
  c.architecture = "mlp-1x16";
  const auto rows = position_analysis(c, {Position::all, Position::first, Position::last});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].positions.size() == 3);
  c.architecture = "mlp-2x16";
  const auto rows2 = position_analysis(c, {Position::all, Position::first, Position::last});
  CHECK(rows2.size() == 3);
  CHECK(position_analysis(c, {Position::all}).size() == 1);
  CHECK_THROWS_AS(position_analysis(small(Method::mc_dropout), {Position::all}), ContractError);
}

TEST_CASE("q sweep rows") {
  const auto c = small(Method::mc_droprelu);
  const auto rows = q_sweep(c, {0.8, 0.85, 0.9, 0.95});
  CHECK(rows.size() == 4);
  CHECK(q_sweep_csv(rows).rfind("q,accuracy,ece,status\n", 0) == 0);
  CHECK_THROWS_AS(q_sweep(c, {0.9}), ContractError);
  CHECK_THROWS_AS(q_sweep(c, {0.9, 1.2}), ParameterError);
}

TEST_CASE("prepared data uses training statistics for every split") {
  const auto s = prepare_data(small(Method::single));
  CHECK(s.train.size() == 120);
  CHECK(s.test.size() == 80);
  CHECK(s.shifted.size() == 2);
  CHECK(s.shifted[0].second.labels == s.test.labels);
}

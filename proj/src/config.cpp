#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "rrauq/errors.hpp"
#include "rrauq/experiment.hpp"

namespace rrauq {

namespace {

void check_architecture(const std::string& name) {
  static const std::regex mlp(R"(mlp-([1-9]\d{0,3})x([1-9]\d{0,4}))");
  if (name == "cnn-small" || std::regex_match(name, mlp)) return;
  throw ConfigError("config: unknown architecture '" + name + "' (expected mlp-<depth>x<width> or cnn-small)");
}

void reject_unknown(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
T get_or(const Json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

MethodSpec method_from_json(const Json& j) {
  MethodSpec m;
  std::string kind;
  if (j.is_string()) {
    kind = j.get<std::string>();
  } else {
    require(j.is_object() && j.contains("kind"), "method must be a string or an object with 'kind'");
    reject_unknown(j, {"kind", "p", "members", "q", "l", "u"}, "method");
    kind = j.at("kind").get<std::string>();
    m.dropout_rate = get_or(j, "p", m.dropout_rate, "method");
    m.members = get_or(j, "members", m.members, "method");
    m.retention = get_or(j, "q", m.retention, "method");
    m.lower = get_or(j, "l", m.lower, "method");
    m.upper = get_or(j, "u", m.upper, "method");
  }
  if (kind == "single") m.kind = Method::single;
  else if (kind == "mc_dropout") m.kind = Method::mc_dropout;
  else if (kind == "deep_ensemble") m.kind = Method::deep_ensemble;
  else if (kind == "mc_droprelu") m.kind = Method::mc_droprelu;
  else if (kind == "mc_rrelu") m.kind = Method::mc_rrelu;
  else throw ConfigError("unknown method '" + kind + "'");

  require(m.dropout_rate >= 0.0 && m.dropout_rate < 1.0, "method.p must lie in [0,1)");
  require(m.members >= 1, "method.members must be at least 1");
  require(m.retention >= 0.0 && m.retention <= 1.0, "method.q must lie in [0,1]");
  require(m.lower >= 0.0 && m.lower < m.upper && m.upper < 1.0,
          "method bounds must satisfy 0 <= l < u < 1");
  return m;
}

Json method_to_json(const MethodSpec& m) {
  Json j;
  switch (m.kind) {
    case Method::single: j["kind"] = "single"; break;
    case Method::mc_dropout:
      j["kind"] = "mc_dropout";
      j["p"] = m.dropout_rate;
      break;
    case Method::deep_ensemble:
      j["kind"] = "deep_ensemble";
      j["members"] = m.members;
      break;
    case Method::mc_droprelu:
      j["kind"] = "mc_droprelu";
      j["q"] = m.retention;
      break;
    case Method::mc_rrelu:
      j["kind"] = "mc_rrelu";
      j["l"] = m.lower;
      j["u"] = m.upper;
      break;
  }
  return j;
}

}  // namespace

std::string MethodSpec::label() const {
  std::ostringstream out;
  switch (kind) {
    case Method::single: out << "single"; break;
    case Method::mc_dropout: out << "mc_dropout(p=" << dropout_rate << ")"; break;
    case Method::deep_ensemble: out << "deep_ensemble(M=" << members << ")"; break;
    case Method::mc_droprelu: out << "mc_droprelu(q=" << retention << ")"; break;
    case Method::mc_rrelu: out << "mc_rrelu(l=" << lower << ",u=" << upper << ")"; break;
  }
  return out.str();
}

std::string position_name(Position p) {
  switch (p) {
    case Position::all: return "all";
    case Position::first: return "first";
    case Position::last: return "last";
  }
  return "all";
}

Position parse_position(const std::string& name) {
  if (name == "all") return Position::all;
  if (name == "first") return Position::first;
  if (name == "last") return Position::last;
  throw ConfigError("unknown activation position '" + name + "'");
}

ExperimentConfig config_from_json(const Json& j) {
  require(j.is_object(), "config must be a JSON object");
  reject_unknown(j,
                 {"name", "method", "architecture", "dataset", "training", "passes", "position",
                  "seed", "ece_bins", "diversity_members", "shift"},
                 "config");
  ExperimentConfig c;
  try {
    c.name = get_or(j, "name", c.name, "config");
    if (j.contains("method")) c.method = method_from_json(j.at("method"));
    c.architecture = get_or(j, "architecture", c.architecture, "config");
    check_architecture(c.architecture);
    c.passes = get_or(j, "passes", c.passes, "config");
    c.position = parse_position(get_or<std::string>(j, "position", "all", "config"));
    c.seed = get_or(j, "seed", c.seed, "config");
    c.ece_bins = get_or(j, "ece_bins", c.ece_bins, "config");
    c.diversity_members = get_or(j, "diversity_members", c.diversity_members, "config");

    if (j.contains("dataset")) {
      const Json& d = j.at("dataset");
      reject_unknown(d,
                     {"kind", "n_train", "n_test", "noise", "centers", "sigma", "train_images",
                      "train_labels", "test_images", "test_labels", "classes"},
                     "dataset");
      auto& ds = c.dataset;
      ds.kind = get_or(d, "kind", ds.kind, "dataset");
      ds.n_train = get_or(d, "n_train", ds.n_train, "dataset");
      ds.n_test = get_or(d, "n_test", ds.n_test, "dataset");
      ds.noise = get_or(d, "noise", ds.noise, "dataset");
      ds.centers = get_or(d, "centers", ds.centers, "dataset");
      ds.sigma = get_or(d, "sigma", ds.sigma, "dataset");
      ds.train_images = get_or(d, "train_images", ds.train_images, "dataset");
      ds.train_labels = get_or(d, "train_labels", ds.train_labels, "dataset");
      ds.test_images = get_or(d, "test_images", ds.test_images, "dataset");
      ds.test_labels = get_or(d, "test_labels", ds.test_labels, "dataset");
      ds.classes = get_or(d, "classes", ds.classes, "dataset");
    }
    if (j.contains("training")) {
      const Json& t = j.at("training");
      reject_unknown(t, {"epochs", "batch_size", "lr", "momentum", "weight_decay", "schedule"},
                     "training");
      auto& tr = c.training;
      tr.epochs = get_or(t, "epochs", tr.epochs, "training");
      tr.batch_size = get_or(t, "batch_size", tr.batch_size, "training");
      tr.learning_rate = get_or(t, "lr", tr.learning_rate, "training");
      tr.momentum = get_or(t, "momentum", tr.momentum, "training");
      tr.weight_decay = get_or(t, "weight_decay", tr.weight_decay, "training");
      if (t.contains("schedule")) {
        tr.schedule.clear();
        for (const auto& step : t.at("schedule")) {
          require(step.is_array() && step.size() == 2,
                  "training.schedule entries must be [fraction, divisor]");
          tr.schedule.push_back({step[0].get<double>(), step[1].get<double>()});
        }
      }
    }
    if (j.contains("shift")) {
      const Json& s = j.at("shift");
      reject_unknown(s, {"corruptions", "severities"}, "shift");
      c.shift.corruptions.clear();
      for (const auto& name : get_or<std::vector<std::string>>(s, "corruptions", {}, "shift"))
        c.shift.corruptions.push_back(parse_corruption(name));
      c.shift.severities = get_or(s, "severities", c.shift.severities, "shift");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  const auto& ds = c.dataset;
  require(ds.kind == "two_moons" || ds.kind == "blobs" || ds.kind == "idx",
          "dataset.kind must be two_moons, blobs or idx");
  if (ds.kind != "idx") require(ds.n_train >= 2 && ds.n_test >= 2, "dataset sizes must be >= 2");
  require(ds.noise >= 0.0 && ds.sigma >= 0.0, "dataset noise must be non-negative");
  if (ds.kind == "blobs") require(ds.centers.size() >= 2, "blobs need at least two centers");
  if (ds.kind == "idx") {
    require(!ds.train_images.empty() && !ds.train_labels.empty() && !ds.test_images.empty() &&
                !ds.test_labels.empty(),
            "idx datasets need train/test image and label paths");
    require(ds.classes >= 2, "dataset.classes must be >= 2");
  }
  const auto& tr = c.training;
  require(tr.batch_size >= 1, "training.batch_size must be >= 1");
  require(tr.learning_rate > 0.0, "training.lr must be positive");
  require(tr.momentum >= 0.0 && tr.momentum < 1.0, "training.momentum must lie in [0,1)");
  require(tr.weight_decay >= 0.0, "training.weight_decay must be non-negative");
  for (const auto& step : tr.schedule)
    require(step.fraction >= 0.0 && step.fraction <= 1.0 && step.divisor >= 1.0,
            "schedule fractions must lie in [0,1] and divisors be >= 1");
  require(c.passes >= 1, "passes must be >= 1");
  require(c.ece_bins >= 1, "ece_bins must be >= 1");
  require(c.diversity_members >= 2, "diversity_members must be >= 2");
  for (int s : c.shift.severities) require(s >= 1 && s <= 5, "severities must lie in 1..5");
  return c;
}

Json config_to_json(const ExperimentConfig& c) {
  Json j;
  j["name"] = c.name;
  j["method"] = method_to_json(c.method);
  j["architecture"] = c.architecture;
  Json d;
  d["kind"] = c.dataset.kind;
  d["n_train"] = c.dataset.n_train;
  d["n_test"] = c.dataset.n_test;
  if (c.dataset.kind == "two_moons") d["noise"] = c.dataset.noise;
  if (c.dataset.kind == "blobs") {
    d["centers"] = c.dataset.centers;
    d["sigma"] = c.dataset.sigma;
  }
  if (c.dataset.kind == "idx") {
    d["train_images"] = c.dataset.train_images;
    d["train_labels"] = c.dataset.train_labels;
    d["test_images"] = c.dataset.test_images;
    d["test_labels"] = c.dataset.test_labels;
    d["classes"] = c.dataset.classes;
  }
  j["dataset"] = d;
  Json t;
  t["epochs"] = c.training.epochs;
  t["batch_size"] = c.training.batch_size;
  t["lr"] = c.training.learning_rate;
  t["momentum"] = c.training.momentum;
  t["weight_decay"] = c.training.weight_decay;
  t["schedule"] = Json::array();
  for (const auto& step : c.training.schedule) t["schedule"].push_back({step.fraction, step.divisor});
  j["training"] = t;
  j["passes"] = c.passes;
  j["position"] = position_name(c.position);
  j["seed"] = c.seed;
  j["ece_bins"] = c.ece_bins;
  j["diversity_members"] = c.diversity_members;
  Json s;
  s["corruptions"] = Json::array();
  for (auto k : c.shift.corruptions) s["corruptions"].push_back(corruption_name(k));
  s["severities"] = c.shift.severities;
  j["shift"] = s;
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

}  // namespace rrauq

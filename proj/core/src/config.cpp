#include "falcon/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "falcon/error.hpp"

namespace falcon {

using nlohmann::json;

std::string_view to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::falcon: return "falcon";
    case TrainMode::falcon_ls_only: return "falcon-ls-only";
    case TrainMode::falcon_ladv_only: return "falcon-ladv-only";
    case TrainMode::l2_baseline: return "l2-baseline";
    case TrainMode::deep_ensemble: return "deep-ensemble";
  }
  return "unknown";
}

TrainMode parse_train_mode(std::string_view name) {
  for (auto mode : {TrainMode::falcon, TrainMode::falcon_ls_only, TrainMode::falcon_ladv_only, TrainMode::l2_baseline,
                    TrainMode::deep_ensemble}) {
    if (to_string(mode) == name) return mode;
  }
  throw ConfigError("unknown training mode '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("train." + what); };
  if (!(lambda_s >= 0.0) || !std::isfinite(lambda_s)) fail("lambda_s must be finite and >= 0");
  if (!(lambda_adv >= 0.0) || !std::isfinite(lambda_adv)) fail("lambda_adv must be finite and >= 0");
  if (!(entropy_scale > 0.0) || !std::isfinite(entropy_scale)) fail("entropy_scale must be finite and > 0");
  if (num_bins < 1) fail("num_bins must be >= 1");
  if (batch_size < 2) fail("batch_size must be >= 2");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (ensemble_size < 1) fail("ensemble_size must be >= 1");
  if (!(ensemble_epsilon >= 0.0)) fail("ensemble_epsilon must be >= 0");
  try {
    AdversarialConfig{epsilon_set, 0.0, 1.0}.validate();
    optimizer.validate();
  } catch (const ContractError& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
}

const std::vector<double>& lambda_s_grid() {
  static const std::vector<double> grid = {0.5, 1, 5, 10, 15, 30, 50, 100};
  return grid;
}

const std::vector<double>& lambda_adv_grid() {
  static const std::vector<double> grid = {0.25, 1e-1, 1e-2, 1e-3, 1e-4, 1e-6};
  return grid;
}

const std::vector<double>& learning_rate_grid() {
  static const std::vector<double> grid = {1e-5, 5e-5, 1e-4, 5e-4, 1e-3, 5e-3};
  return grid;
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  const std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown config key '" + where + "." + key + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + where + "." + key + "': " + e.what());
  }
}

}  // namespace

json to_json(const TrainConfig& c) {
  return {{"mode", to_string(c.mode)},
          {"model", c.model},
          {"lambda_s", c.lambda_s},
          {"lambda_adv", c.lambda_adv},
          {"entropy_scale", c.entropy_scale},
          {"epsilon_set", c.epsilon_set},
          {"num_bins", c.num_bins},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"max_steps", c.max_steps},
          {"dropout", c.dropout},
          {"optimizer",
           {{"kind", to_string(c.optimizer.kind)},
            {"learning_rate", c.optimizer.learning_rate},
            {"momentum", c.optimizer.momentum},
            {"rho", c.optimizer.rho},
            {"epsilon", c.optimizer.epsilon},
            {"l2", c.optimizer.l2}}},
          {"seed", c.seed},
          {"patience", c.patience},
          {"ensemble_size", c.ensemble_size},
          {"ensemble_epsilon", c.ensemble_epsilon}};
}

TrainConfig train_config_from_json(const json& j) {
  const std::string w = "train";
  reject_unknown(j,
                 {"mode", "model", "lambda_s", "lambda_adv", "entropy_scale", "epsilon_set", "num_bins", "batch_size",
                  "epochs", "max_steps", "dropout", "optimizer", "seed", "patience", "ensemble_size", "ensemble_epsilon"},
                 w);
  TrainConfig c;
  std::string mode(to_string(c.mode));
  read(j, "mode", mode, w);
  c.mode = parse_train_mode(mode);
  read(j, "model", c.model, w);
  read(j, "lambda_s", c.lambda_s, w);
  read(j, "lambda_adv", c.lambda_adv, w);
  read(j, "entropy_scale", c.entropy_scale, w);
  read(j, "epsilon_set", c.epsilon_set, w);
  read(j, "num_bins", c.num_bins, w);
  read(j, "batch_size", c.batch_size, w);
  read(j, "epochs", c.epochs, w);
  read(j, "max_steps", c.max_steps, w);
  read(j, "dropout", c.dropout, w);
  read(j, "seed", c.seed, w);
  read(j, "patience", c.patience, w);
  read(j, "ensemble_size", c.ensemble_size, w);
  read(j, "ensemble_epsilon", c.ensemble_epsilon, w);
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    const std::string ow = "train.optimizer";
    reject_unknown(o, {"kind", "learning_rate", "momentum", "rho", "epsilon", "l2"}, ow);
    std::string kind(to_string(c.optimizer.kind));
    read(o, "kind", kind, ow);
    try {
      c.optimizer.kind = parse_optimizer_kind(kind);
    } catch (const RegistryError& e) {
      throw ConfigError(e.what());
    }
    read(o, "learning_rate", c.optimizer.learning_rate, ow);
    read(o, "momentum", c.optimizer.momentum, ow);
    read(o, "rho", c.optimizer.rho, ow);
    read(o, "epsilon", c.optimizer.epsilon, ow);
    read(o, "l2", c.optimizer.l2, ow);
  }
  c.validate();
  return c;
}

json to_json(const ExperimentConfig& c) {
  const auto& d = c.data;
  const auto& e = c.eval;
  return {{"schema_version", kConfigSchemaVersion},
          {"name", c.name},
          {"data",
           {{"dataset", d.dataset},
            {"mnist_dir", d.mnist_dir},
            {"validation_size", d.validation_size},
            {"train_limit", d.train_limit},
            {"test_limit", d.test_limit},
            {"synthetic_n", d.synthetic_n},
            {"synthetic_shift", d.synthetic_shift},
            {"synthetic_seed", d.synthetic_seed}}},
          {"train", to_json(c.train)},
          {"eval",
           {{"perturbations", e.perturbations},
            {"levels", e.levels},
            {"num_bins", e.num_bins},
            {"noise_seed", e.noise_seed},
            {"ranges", e.ranges.to_json().at("ranges")},
            {"temperature_scaling", e.temperature_scaling}}}};
}

ExperimentConfig experiment_config_from_json(const json& j) {
  reject_unknown(j, {"schema_version", "name", "data", "train", "eval"}, "config");
  if (j.contains("schema_version") && j.at("schema_version") != kConfigSchemaVersion) {
    throw ConfigError("unsupported config schema_version " + j.at("schema_version").dump());
  }
  ExperimentConfig c;
  read(j, "name", c.name, "config");
  if (j.contains("data")) {
    const auto& d = j.at("data");
    const std::string w = "data";
    reject_unknown(d,
                   {"dataset", "mnist_dir", "validation_size", "train_limit", "test_limit", "synthetic_n",
                    "synthetic_shift", "synthetic_seed"},
                   w);
    read(d, "dataset", c.data.dataset, w);
    read(d, "mnist_dir", c.data.mnist_dir, w);
    read(d, "validation_size", c.data.validation_size, w);
    read(d, "train_limit", c.data.train_limit, w);
    read(d, "test_limit", c.data.test_limit, w);
    read(d, "synthetic_n", c.data.synthetic_n, w);
    read(d, "synthetic_shift", c.data.synthetic_shift, w);
    read(d, "synthetic_seed", c.data.synthetic_seed, w);
  }
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    const std::string w = "eval";
    reject_unknown(e, {"perturbations", "levels", "num_bins", "noise_seed", "ranges", "temperature_scaling"}, w);
    read(e, "perturbations", c.eval.perturbations, w);
    read(e, "levels", c.eval.levels, w);
    read(e, "num_bins", c.eval.num_bins, w);
    read(e, "noise_seed", c.eval.noise_seed, w);
    read(e, "temperature_scaling", c.eval.temperature_scaling, w);
    if (e.contains("ranges")) {
      try {
        c.eval.ranges = PerturbationConfig::from_json({{"ranges", e.at("ranges")}});
      } catch (const Error& err) {
        throw ConfigError(std::string("eval.ranges: ") + err.what());
      }
    }
  }
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  if (data.dataset != "mnist" && data.dataset != "synthetic") {
    throw ConfigError("data.dataset must be 'mnist' or 'synthetic', got '" + data.dataset + "'");
  }
  train.validate();
  if (eval.num_bins < 1) throw ConfigError("eval.num_bins must be >= 1");
  for (const auto& name : eval.perturbations) {
    try {
      parse_perturbation_kind(name);
    } catch (const RegistryError& e) {
      throw ConfigError(std::string("eval.perturbations: ") + e.what());
    }
  }
  for (int level : eval.levels) {
    if (level < 0 || level > 90 || level % 10 != 0) throw ConfigError("eval.levels must be drawn from 0,10,...,90");
  }
  if (data.dataset == "synthetic" && !eval.perturbations.empty()) {
    throw ConfigError("image perturbations do not apply to the synthetic dataset; set eval.perturbations to []");
  }
}

json to_json(const Architecture& arch) {
  json layers = json::array();
  for (const auto& l : arch.layers) {
    json entry{{"kind", to_string(l.kind)}};
    switch (l.kind) {
      case LayerKind::dense: entry["units"] = l.units; break;
      case LayerKind::conv2d:
        entry["filters"] = l.filters;
        entry["kernel"] = l.kernel;
        entry["stride"] = l.stride;
        break;
      case LayerKind::maxpool2d:
        entry["kernel"] = l.kernel;
        entry["stride"] = l.stride;
        break;
      case LayerKind::dropout: entry["rate"] = l.rate; break;
      default: break;
    }
    layers.push_back(entry);
  }
  return {{"name", arch.name}, {"input_shape", arch.input_shape}, {"classes", arch.classes}, {"layers", layers}};
}

Architecture architecture_from_json(const json& j) {
  Architecture arch;
  try {
    arch.name = j.at("name").get<std::string>();
    arch.input_shape = j.at("input_shape").get<Shape>();
    arch.classes = j.at("classes").get<std::size_t>();
    for (const auto& entry : j.at("layers")) {
      LayerSpec l;
      l.kind = parse_layer_kind(entry.at("kind").get<std::string>());
      l.units = entry.value("units", std::size_t{0});
      l.filters = entry.value("filters", std::size_t{0});
      l.kernel = entry.value("kernel", std::size_t{0});
      l.stride = entry.value("stride", std::size_t{1});
      l.rate = entry.value("rate", 0.0);
      arch.layers.push_back(l);
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed architecture: ") + e.what());
  }
  return arch;
}

void apply_override(json& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json* node = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) throw ConfigError("override key '" + key + "' does not exist");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  *node = value;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  json raw = json::parse(in, nullptr, false);
  if (raw.is_discarded()) throw ConfigError("config file " + path.string() + " is not valid JSON");
  json expanded = to_json(experiment_config_from_json(raw));
  for (const auto& o : overrides) apply_override(expanded, o);
  return experiment_config_from_json(expanded);
}

}  // namespace falcon

#include <cmath>

#include "dpbayes/errors.hpp"
#include "dpbayes/harness.hpp"
#include "json.hpp"

namespace dpb {

using nlohmann::json;

std::string to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::Synth: return "synth";
    case DatasetKind::Mnist: return "mnist";
    case DatasetKind::Csv: return "csv";
  }
  return "synth";
}

std::string to_string(Procedure p) {
  return p == Procedure::OneStage ? "one-stage" : "two-stage";
}

Procedure procedure_from_string(const std::string& s) {
  if (s == "one-stage") return Procedure::OneStage;
  if (s == "two-stage") return Procedure::TwoStage;
  throw ConfigError("unknown procedure '" + s + "' (expected one-stage|two-stage)");
}

namespace {

DatasetKind kind_from_string(const std::string& s) {
  if (s == "synth") return DatasetKind::Synth;
  if (s == "mnist") return DatasetKind::Mnist;
  if (s == "csv") return DatasetKind::Csv;
  throw ConfigError("unknown dataset kind '" + s + "' (expected synth|mnist|csv)");
}

HyperplaneSampling hyperplane_from_string(const std::string& s) {
  if (s == "direction-abs-normal") return HyperplaneSampling::DirectionTimesAbsNormal;
  if (s == "isotropic-normal") return HyperplaneSampling::IsotropicNormal;
  throw ConfigError("unknown hyperplane sampling '" + s + "'");
}

std::string to_string(HyperplaneSampling h) {
  return h == HyperplaneSampling::DirectionTimesAbsNormal ? "direction-abs-normal"
                                                          : "isotropic-normal";
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  sgld.validate();
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
  if (!(l_max > 0.0) || !std::isfinite(l_max)) throw ConfigError("l_max must be positive");
  if (seeds.empty()) throw ConfigError("seed list must be nonempty");
  if (window == 0) throw ConfigError("window must be positive");
  for (std::size_t h : hidden) {
    if (h == 0) throw ConfigError("hidden layer sizes must be positive");
  }
  const auto check_grid = [](const std::vector<double>& g, const char* name) {
    if (g.empty()) throw ConfigError(std::string(name) + " grid must be nonempty");
    for (double t : g) {
      if (!(t >= 0.0) || !std::isfinite(t)) {
        throw ConfigError(std::string(name) + " values must be finite and >= 0");
      }
    }
  };
  if (procedure == Procedure::OneStage) {
    check_grid(taus, "tau");
  } else {
    check_grid(tau2s, "tau2");
    TwoStageConfig{tau1, tau2s.front(), gamma, T1, T2}.validate();
    if (n_logz == 0) throw ConfigError("n_logz must be positive");
  }
  if (dataset.kind == DatasetKind::Csv &&
      (dataset.train_csv.empty() || dataset.heldout_csv.empty())) {
    throw ConfigError("csv datasets need train_csv and heldout_csv");
  }
  if (dataset.kind == DatasetKind::Mnist &&
      (dataset.mnist.train_images.empty() || dataset.mnist.train_labels.empty() ||
       dataset.mnist.heldout_images.empty() || dataset.mnist.heldout_labels.empty())) {
    throw ConfigError("mnist datasets need train/heldout image and label paths");
  }
}

ExperimentConfig ExperimentConfig::defaults_for(DatasetKind kind) {
  ExperimentConfig c;
  c.dataset.kind = kind;
  if (kind == DatasetKind::Mnist) {
    c.dataset.num_classes = 10;
    c.hidden = {600, 600, 600};
    c.sgld.a0 = 1e-5;
    c.sgld.batch_size = 128;
    c.T1 = 500;
    c.T2 = 1000;
    c.gamma = 5.0;
    c.tau1 = 1e3;
    c.tau2s = {3e3, 3e4, 1e5, 3e5};
    c.taus = {1e2, 1e3, 1e4, 1e5, 1e6};
  }
  return c;
}

namespace {

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid JSON config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");

  DatasetKind kind = DatasetKind::Synth;
  const json ds = j.value("dataset", json::object());
  if (ds.contains("kind")) kind = kind_from_string(ds.at("kind").get<std::string>());
  ExperimentConfig c = ExperimentConfig::defaults_for(kind);

  if (ds.contains("label_mode")) {
    c.dataset.label_mode = label_mode_from_string(ds.at("label_mode").get<std::string>());
  }
  read_opt(ds, "n_train", c.dataset.synth.n_train);
  read_opt(ds, "n_heldout", c.dataset.synth.n_heldout);
  read_opt(ds, "d", c.dataset.synth.d);
  if (ds.contains("seed") && !ds.at("seed").is_null()) {
    c.dataset.synth_seed = ds.at("seed").get<std::uint64_t>();
  }
  if (ds.contains("hyperplane")) {
    c.dataset.synth.hyperplane = hyperplane_from_string(ds.at("hyperplane").get<std::string>());
  }
  if (ds.contains("limit") && !ds.at("limit").is_null()) {
    c.dataset.limit = ds.at("limit").get<std::size_t>();
  }
  if (ds.contains("train_images")) c.dataset.mnist.train_images = ds.at("train_images").get<std::string>();
  if (ds.contains("train_labels")) c.dataset.mnist.train_labels = ds.at("train_labels").get<std::string>();
  if (ds.contains("heldout_images")) c.dataset.mnist.heldout_images = ds.at("heldout_images").get<std::string>();
  if (ds.contains("heldout_labels")) c.dataset.mnist.heldout_labels = ds.at("heldout_labels").get<std::string>();
  if (ds.contains("train_csv")) c.dataset.train_csv = ds.at("train_csv").get<std::string>();
  if (ds.contains("heldout_csv")) c.dataset.heldout_csv = ds.at("heldout_csv").get<std::string>();
  read_opt(ds, "num_classes", c.dataset.num_classes);

  if (j.contains("procedure")) c.procedure = procedure_from_string(j.at("procedure").get<std::string>());
  read_opt(j, "taus", c.taus);
  read_opt(j, "tau1", c.tau1);
  read_opt(j, "tau2s", c.tau2s);
  read_opt(j, "gamma", c.gamma);
  read_opt(j, "T1", c.T1);
  read_opt(j, "T2", c.T2);
  const json sg = j.value("sgld", json::object());
  read_opt(sg, "a0", c.sgld.a0);
  read_opt(sg, "b", c.sgld.b);
  read_opt(sg, "batch_size", c.sgld.batch_size);
  read_opt(sg, "epochs", c.sgld.epochs);
  read_opt(j, "hidden", c.hidden);
  read_opt(j, "l_max", c.l_max);
  read_opt(j, "delta", c.delta);
  if (j.contains("beta")) {
    const auto b = j.at("beta").get<std::string>();
    if (b == "half") {
      c.optimize_beta = false;
    } else if (b == "optimize") {
      c.optimize_beta = true;
    } else {
      throw ConfigError("beta must be 'half' or 'optimize'");
    }
  }
  read_opt(j, "n_logz", c.n_logz);
  read_opt(j, "window", c.window);
  read_opt(j, "seeds", c.seeds);
  read_opt(j, "checkpoint_every", c.checkpoint_every);
  if (j.contains("lever_variant")) {
    const auto v = j.at("lever_variant").get<std::string>();
    if (v == "conventional") {
      c.lever_variant = LeverVariant::Conventional;
    } else if (v == "as-displayed") {
      c.lever_variant = LeverVariant::AsDisplayed;
    } else {
      throw ConfigError("lever_variant must be 'conventional' or 'as-displayed'");
    }
  }
  read_opt(j, "threads", c.threads);
  read_opt(j, "strict", c.strict);
  if (j.contains("checkpoint_dir") && !j.at("checkpoint_dir").is_null()) {
    c.checkpoint_dir = j.at("checkpoint_dir").get<std::string>();
  }
  c.validate();
  return c;
}

}  // namespace

ExperimentConfig config_from_json(const std::string& json_text) {
  try {
    return parse_config(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

std::string config_to_json(const ExperimentConfig& c) {
  json ds = {
      {"kind", to_string(c.dataset.kind)},
      {"label_mode", to_string(c.dataset.label_mode)},
  };
  if (c.dataset.kind == DatasetKind::Synth) {
    ds["n_train"] = c.dataset.synth.n_train;
    ds["n_heldout"] = c.dataset.synth.n_heldout;
    ds["d"] = c.dataset.synth.d;
    ds["hyperplane"] = to_string(c.dataset.synth.hyperplane);
    ds["seed"] = c.dataset.synth_seed ? json(*c.dataset.synth_seed) : json(nullptr);
  } else if (c.dataset.kind == DatasetKind::Mnist) {
    ds["train_images"] = c.dataset.mnist.train_images.string();
    ds["train_labels"] = c.dataset.mnist.train_labels.string();
    ds["heldout_images"] = c.dataset.mnist.heldout_images.string();
    ds["heldout_labels"] = c.dataset.mnist.heldout_labels.string();
  } else {
    ds["train_csv"] = c.dataset.train_csv.string();
    ds["heldout_csv"] = c.dataset.heldout_csv.string();
    ds["num_classes"] = c.dataset.num_classes;
  }
  ds["limit"] = c.dataset.limit ? json(*c.dataset.limit) : json(nullptr);

  json j = {
      {"dataset", ds},
      {"procedure", to_string(c.procedure)},
      {"taus", c.taus},
      {"tau1", c.tau1},
      {"tau2s", c.tau2s},
      {"gamma", c.gamma},
      {"T1", c.T1},
      {"T2", c.T2},
      {"sgld",
       {{"a0", c.sgld.a0},
        {"b", c.sgld.b},
        {"batch_size", c.sgld.batch_size},
        {"epochs", c.sgld.epochs}}},
      {"hidden", c.hidden},
      {"l_max", c.l_max},
      {"delta", c.delta},
      {"beta", c.optimize_beta ? "optimize" : "half"},
      {"n_logz", c.n_logz},
      {"window", c.window},
      {"seeds", c.seeds},
      {"checkpoint_every", c.checkpoint_every},
      {"lever_variant",
       c.lever_variant == LeverVariant::Conventional ? "conventional" : "as-displayed"},
      {"threads", c.threads},
      {"strict", c.strict},
      {"checkpoint_dir", c.checkpoint_dir ? json(c.checkpoint_dir->string()) : json(nullptr)},
  };
  return j.dump(2);
}

std::string synth_sidecar_json(const SynthConfig& cfg, const SynthData& data, LabelMode mode) {
  json j = {
      {"generator", "synth"},
      {"n_train", cfg.n_train},
      {"n_heldout", cfg.n_heldout},
      {"d", cfg.d},
      {"seed", cfg.seed},
      {"hyperplane_sampling", to_string(cfg.hyperplane)},
      {"hyperplane", data.hyperplane},
      {"label_mode", to_string(mode)},
      {"label_rule", "1 if <w*, x> >= 0 else 2"},
  };
  return j.dump(2);
}

}  // namespace dpb

// dpbayes command-line front end. Talks to the library only through dpbayes.h.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dpbayes/dpbayes.h"
#include "json.hpp"

using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitDivergence = 4;

int exit_code(dpb_status s) {
  switch (s) {
    case DPB_OK: return 0;
    case DPB_ERR_DOMAIN:
    case DPB_ERR_CONFIG: return kExitConfig;
    case DPB_ERR_DATA:
    case DPB_ERR_IO: return kExitData;
    case DPB_ERR_DIVERGENCE: return kExitDivergence;
    default: return 1;
  }
}

struct CliError {
  int code;
  std::string message;
};

void check(dpb_status s, const std::string& what) {
  if (s != DPB_OK) throw CliError{exit_code(s), what + ": " + dpb_last_error()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError{kExitConfig, "cannot read config " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw CliError{kExitData, "cannot write " + path.string()};
}

// Flags that override the experiment config; unset options leave the file's values alone.
struct Overrides {
  std::string config_path;
  std::optional<std::string> dataset, label_mode, beta, lever_variant, checkpoint_dir, hyperplane;
  std::optional<std::string> train_images, train_labels, heldout_images, heldout_labels;
  std::optional<std::string> train_csv, heldout_csv;
  std::optional<std::vector<double>> taus, tau2s;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<std::vector<std::size_t>> hidden;
  std::optional<double> tau1, gamma, a0, b, l_max, delta;
  std::optional<std::size_t> T1, T2, batch_size, epochs, n_logz, window, checkpoint_every, threads;
  std::optional<std::size_t> n_train, n_heldout, d, limit;
  std::optional<std::uint64_t> data_seed;
  std::optional<int> num_classes;
  bool strict = false;
  std::string out = "results.csv";
  std::string plot_dir;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config_path, "JSON experiment config");
    app->add_option("--dataset", dataset, "synth | mnist | csv");
    app->add_option("--label-mode", label_mode, "true | random");
    app->add_option("--n-train", n_train, "SYNTH training-set size");
    app->add_option("--n-heldout", n_heldout, "SYNTH heldout-set size");
    app->add_option("--d", d, "SYNTH input dimension");
    app->add_option("--data-seed", data_seed, "fixed SYNTH dataset seed");
    app->add_option("--hyperplane", hyperplane, "direction-abs-normal | isotropic-normal");
    app->add_option("--limit", limit, "keep the first N examples of each MNIST split");
    app->add_option("--train-images", train_images);
    app->add_option("--train-labels", train_labels);
    app->add_option("--heldout-images", heldout_images);
    app->add_option("--heldout-labels", heldout_labels);
    app->add_option("--train-csv", train_csv);
    app->add_option("--heldout-csv", heldout_csv);
    app->add_option("--num-classes", num_classes, "number of classes for CSV datasets");
    app->add_option("--taus", taus, "one-stage tau grid")->delimiter(',');
    app->add_option("--tau1", tau1, "stage-one inverse temperature");
    app->add_option("--tau2s", tau2s, "two-stage tau2 grid")->delimiter(',');
    app->add_option("--gamma", gamma, "prior precision");
    app->add_option("--T1", T1, "stage-one epochs");
    app->add_option("--T2", T2, "stage-two epochs");
    app->add_option("--a0", a0, "learning-rate scale");
    app->add_option("--b", b, "learning-rate decay exponent");
    app->add_option("--batch-size", batch_size);
    app->add_option("--epochs", epochs, "one-stage epochs T");
    app->add_option("--hidden", hidden, "hidden layer widths")->delimiter(',');
    app->add_option("--l-max", l_max, "bounded cross-entropy ceiling");
    app->add_option("--delta", delta, "confidence parameter");
    app->add_option("--beta", beta, "half | optimize");
    app->add_option("--n-logz", n_logz, "prior samples for the log-partition estimate");
    app->add_option("--window", window, "trailing iterates averaged for the posterior risk");
    app->add_option("--seeds", seeds, "run seeds")->delimiter(',');
    app->add_option("--checkpoint-every", checkpoint_every, "emit rows every N epochs (0: final only)");
    app->add_option("--checkpoint-dir", checkpoint_dir, "persist window iterates here");
    app->add_option("--lever-variant", lever_variant, "conventional | as-displayed");
    app->add_option("--threads", threads, "worker threads (0: all cores)");
    app->add_flag("--strict", strict, "abort with exit code 4 when a run diverges");
    app->add_option("-o,--out", out, "output CSV");
    app->add_option("--plot-dir", plot_dir, "also write SVG figures here");
  }

  json merged(const char* procedure) const {
    json j = config_path.empty() ? json::object() : json::parse(slurp(config_path));
    if (!j.is_object()) throw CliError{kExitConfig, "config must be a JSON object"};
    if (procedure) j["procedure"] = procedure;
    json& ds = j["dataset"];
    if (ds.is_null()) ds = json::object();
    const auto set = [](json& node, const char* key, const auto& opt) {
      if (opt) node[key] = *opt;
    };
    set(ds, "kind", dataset);
    set(ds, "label_mode", label_mode);
    set(ds, "n_train", n_train);
    set(ds, "n_heldout", n_heldout);
    set(ds, "d", d);
    set(ds, "seed", data_seed);
    set(ds, "hyperplane", hyperplane);
    set(ds, "limit", limit);
    set(ds, "train_images", train_images);
    set(ds, "train_labels", train_labels);
    set(ds, "heldout_images", heldout_images);
    set(ds, "heldout_labels", heldout_labels);
    set(ds, "train_csv", train_csv);
    set(ds, "heldout_csv", heldout_csv);
    set(ds, "num_classes", num_classes);
    set(j, "taus", taus);
    set(j, "tau1", tau1);
    set(j, "tau2s", tau2s);
    set(j, "gamma", gamma);
    set(j, "T1", T1);
    set(j, "T2", T2);
    json& sg = j["sgld"];
    if (sg.is_null()) sg = json::object();
    set(sg, "a0", a0);
    set(sg, "b", b);
    set(sg, "batch_size", batch_size);
    set(sg, "epochs", epochs);
    set(j, "hidden", hidden);
    set(j, "l_max", l_max);
    set(j, "delta", delta);
    set(j, "beta", beta);
    set(j, "n_logz", n_logz);
    set(j, "window", window);
    set(j, "seeds", seeds);
    set(j, "checkpoint_every", checkpoint_every);
    set(j, "checkpoint_dir", checkpoint_dir);
    set(j, "lever_variant", lever_variant);
    set(j, "threads", threads);
    if (strict) j["strict"] = true;
    return j;
  }
};

struct Reports {
  dpb_reports* p = nullptr;
  ~Reports() { dpb_reports_free(p); }
};

struct Datasets {
  dpb_dataset* train = nullptr;
  dpb_dataset* heldout = nullptr;
  ~Datasets() {
    dpb_dataset_free(train);
    dpb_dataset_free(heldout);
  }
};

dpb_lever_variant parse_variant(const std::string& s) {
  if (s == "conventional") return DPB_LEVER_CONVENTIONAL;
  if (s == "as-displayed") return DPB_LEVER_AS_DISPLAYED;
  throw CliError{kExitConfig, "lever variant must be conventional or as-displayed"};
}

void run_experiment(const Overrides& o, const char* procedure) {
  json j;
  try {
    j = o.merged(procedure);
  } catch (const json::exception& e) {
    throw CliError{kExitConfig, std::string("config: ") + e.what()};
  }
  const std::string text = j.dump();
  char* normalized = nullptr;
  check(dpb_config_normalize(text.c_str(), &normalized), "config");
  const std::string norm = normalized;
  dpb_string_free(normalized);

  Reports r;
  check(dpb_experiment_run(text.c_str(), &r.p), "run");
  check(dpb_reports_write_csv(r.p, o.out.c_str()), "write");
  spit(o.out + ".config.json", norm + "\n");
  if (!o.plot_dir.empty()) {
    const double delta = json::parse(norm).at("delta").get<double>();
    check(dpb_reports_plot(r.p, o.plot_dir.c_str(), delta), "plot");
  }
  const auto failures = dpb_reports_failures(r.p);
  std::cerr << "wrote " << dpb_reports_count(r.p) << " rows to " << o.out;
  if (failures > 0) std::cerr << " (" << failures << " failed runs)";
  std::cerr << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certified PAC-Bayes bounds for Langevin-trained classifiers"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(dpb_version()));

  // synth-gen
  auto* gen = app.add_subcommand("synth-gen", "generate a SYNTH dataset as CSV plus a JSON sidecar");
  std::size_t g_n_train = 50, g_n_heldout = 100, g_d = 4;
  std::uint64_t g_seed = 0;
  std::string g_mode = "true", g_hyper = "direction-abs-normal", g_dir = ".";
  gen->add_option("--n-train", g_n_train);
  gen->add_option("--n-heldout", g_n_heldout);
  gen->add_option("--d", g_d);
  gen->add_option("--seed", g_seed);
  gen->add_option("--label-mode", g_mode, "true | random");
  gen->add_option("--hyperplane", g_hyper, "direction-abs-normal | isotropic-normal");
  gen->add_option("-o,--out-dir", g_dir, "writes train.csv, heldout.csv, synth.json");

  Overrides train_o, train2_o, sweep_o;
  auto* train = app.add_subcommand("train", "one-stage SGLD sweep over the tau grid");
  train_o.attach(train);
  auto* train2 = app.add_subcommand("train2", "two-stage private-prior sweep over the tau2 grid");
  train2_o.attach(train2);
  auto* sweep = app.add_subcommand("sweep", "run the procedure named in the config");
  sweep_o.attach(sweep);

  auto* bound = app.add_subcommand("bound", "recompute bound columns of an existing report CSV");
  std::string b_in, b_out, b_beta = "half", b_variant = "conventional";
  std::int64_t b_m = 0;
  double b_delta = 0.05;
  bound->add_option("-i,--in", b_in)->required();
  bound->add_option("-o,--out", b_out, "default: overwrite the input");
  bound->add_option("--m", b_m, "training-set size")->required();
  bound->add_option("--delta", b_delta);
  bound->add_option("--beta", b_beta, "half | optimize");
  bound->add_option("--lever-variant", b_variant);

  auto* plot = app.add_subcommand("plot", "render SVG figures from a report CSV");
  std::string p_in, p_dir = ".";
  double p_delta = 0.05;
  plot->add_option("-i,--in", p_in)->required();
  plot->add_option("-o,--out-dir", p_dir);
  plot->add_option("--delta", p_delta, "confidence level shown in the legend");

  auto* fetch = app.add_subcommand("mnist-fetch", "download MNIST and verify checksums");
  std::string f_dir = "mnist", f_url;
  fetch->add_option("-o,--out-dir", f_dir);
  fetch->add_option("--url", f_url, "mirror base URL");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) {
      if (g_mode != "true" && g_mode != "random") {
        throw CliError{kExitConfig, "label mode must be true or random"};
      }
      const json cfg = {{"n_train", g_n_train}, {"n_heldout", g_n_heldout}, {"d", g_d},
                        {"seed", g_seed},       {"label_mode", g_mode},     {"hyperplane", g_hyper}};
      Datasets ds;
      char* sidecar = nullptr;
      check(dpb_synth_generate(cfg.dump().c_str(), &ds.train, &ds.heldout, &sidecar), "synth-gen");
      const std::string side = sidecar;
      dpb_string_free(sidecar);
      const std::filesystem::path dir = g_dir;
      std::filesystem::create_directories(dir);
      check(dpb_dataset_save_csv(ds.train, (dir / "train.csv").string().c_str()), "write");
      check(dpb_dataset_save_csv(ds.heldout, (dir / "heldout.csv").string().c_str()), "write");
      spit(dir / "synth.json", side + "\n");
    } else if (*train) {
      run_experiment(train_o, "one-stage");
    } else if (*train2) {
      run_experiment(train2_o, "two-stage");
    } else if (*sweep) {
      run_experiment(sweep_o, nullptr);
    } else if (*bound) {
      if (b_beta != "half" && b_beta != "optimize") {
        throw CliError{kExitConfig, "beta must be half or optimize"};
      }
      Reports r;
      check(dpb_reports_read_csv(b_in.c_str(), &r.p), "read");
      check(dpb_reports_recompute(r.p, b_m, b_delta, b_beta == "optimize", parse_variant(b_variant)),
            "bound");
      const std::string out = b_out.empty() ? b_in : b_out;
      check(dpb_reports_write_csv(r.p, out.c_str()), "write");
    } else if (*plot) {
      Reports r;
      check(dpb_reports_read_csv(p_in.c_str(), &r.p), "read");
      check(dpb_reports_plot(r.p, p_dir.c_str(), p_delta), "plot");
    } else if (*fetch) {
      check(dpb_mnist_fetch(f_dir.c_str(), f_url.empty() ? nullptr : f_url.c_str()), "mnist-fetch");
    }
  } catch (const CliError& e) {
    std::cerr << "error: " << e.message << "\n";
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#pragma once

// Experiment orchestration: configs, tau sweeps for the one- and two-stage
// procedures, bound assembly, CSV persistence and SVG figures.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dpbayes/bounds.hpp"
#include "dpbayes/data.hpp"
#include "dpbayes/model.hpp"
#include "dpbayes/priors_gibbs.hpp"
#include "dpbayes/sgld.hpp"

namespace dpb {

enum class DatasetKind { Synth, Mnist, Csv };
enum class Procedure { OneStage, TwoStage };

std::string to_string(DatasetKind k);
std::string to_string(Procedure p);
Procedure procedure_from_string(const std::string& s);

struct DatasetSpec {
  DatasetKind kind = DatasetKind::Synth;
  LabelMode label_mode = LabelMode::True;
  SynthConfig synth{};
  // Fixed SYNTH seed. When absent every run seed draws its own dataset.
  std::optional<std::uint64_t> synth_seed;
  MnistPaths mnist{};
  std::optional<std::size_t> limit;
  std::filesystem::path train_csv;
  std::filesystem::path heldout_csv;
  int num_classes = 2;  // CSV datasets only
};

struct ExperimentConfig {
  DatasetSpec dataset{};
  Procedure procedure = Procedure::OneStage;
  std::vector<double> taus{1.0, 10.0, 100.0};  // one-stage grid
  double tau1 = 1.0;
  std::vector<double> tau2s{10.0, 100.0};      // two-stage grid
  double gamma = 2.0;
  std::size_t T1 = 100;
  std::size_t T2 = 1000;
  SgldConfig sgld{};                           // seed field unused; see `seeds`
  std::vector<std::size_t> hidden{100};
  double l_max = 4.0;
  double delta = 0.05;
  bool optimize_beta = false;
  std::size_t n_logz = 100000;
  std::size_t window = 20;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::size_t checkpoint_every = 0;  // 0: final rows only
  LeverVariant lever_variant = LeverVariant::Conventional;
  std::size_t threads = 0;           // 0: hardware concurrency
  bool strict = false;
  std::optional<std::filesystem::path> checkpoint_dir;

  void validate() const;
  // Full-size defaults for the dataset kind (SYNTH or MNIST).
  static ExperimentConfig defaults_for(DatasetKind kind);
};

/// Parses a JSON document; keys absent from it keep the defaults for its dataset kind.
ExperimentConfig config_from_json(const std::string& json_text);
std::string config_to_json(const ExperimentConfig& cfg);

struct BoundReport {
  std::uint64_t seed = 0;
  std::string dataset;
  LabelMode label_mode = LabelMode::True;
  Procedure procedure = Procedure::OneStage;
  double tau1 = 0.0;
  double tau2 = 0.0;
  double gamma = 0.0;
  std::size_t epoch = 0;
  double train_err01 = 0.0;
  double test_err01 = 0.0;
  double train_xent = 0.0;
  double kl_upper_raw = 0.0;
  double kl_upper = 0.0;
  double epsilon = 0.0;
  double rhs_dp = 0.0;
  double rhs_lever = 0.0;
  double risk_bound_dp = 0.0;
  double risk_bound_lever = 0.0;
  double runtime_s = 0.0;

  // Not-applicable fields and every metric of a failed run hold NaN.
  bool failed() const;
  bool has_dp() const;
};

// Unprocessed outputs of one run, before bounds are applied.
struct RawRun {
  std::uint64_t seed = 0;
  std::string dataset;
  LabelMode label_mode = LabelMode::True;
  Procedure procedure = Procedure::OneStage;
  double tau1 = 0.0;
  double tau2 = 0.0;  // the tau of the certified Gibbs posterior
  double gamma = 0.0;
  std::size_t epoch = 0;
  std::int64_t m = 0;  // training-set size the run used
  double train_err01 = 0.0;
  double test_err01 = 0.0;
  double train_xent = 0.0;
  std::optional<KlEstimate> kl;
  std::optional<PrivacyBudget> privacy;
  double runtime_s = 0.0;
};

struct AssemblyParams {
  std::int64_t m = 0;
  double delta = 0.05;
  bool optimize_beta = false;
  LeverVariant lever_variant = LeverVariant::Conventional;
};

/// Applies the Lever bound (always) and the private-prior bound (when a KL
/// estimate and privacy budget are present), then inverts both against the
/// clamped empirical error. Throws ConfigError when raw.m != params.m.
BoundReport assemble_report(const RawRun& raw, const AssemblyParams& params);

/// Recomputes rhs and risk-bound columns of existing rows (e.g. for another delta).
void recompute_bounds(std::vector<BoundReport>& reports, const AssemblyParams& params);

/// A report row marking a run that did not complete.
BoundReport failed_report(const RawRun& ids);

inline constexpr const char* kReportCsvHeader =
    "seed,dataset,label_mode,procedure,tau1,tau2,gamma,epoch,train_err01,test_err01,"
    "train_xent,kl_upper_raw,kl_upper,epsilon,rhs_dp,rhs_lever,risk_bound_dp,"
    "risk_bound_lever,runtime_s";

std::string reports_to_csv(const std::vector<BoundReport>& reports);
std::vector<BoundReport> reports_from_csv(const std::string& text);
void write_reports_csv(const std::vector<BoundReport>& reports, const std::filesystem::path& path);
std::vector<BoundReport> read_reports_csv(const std::filesystem::path& path);

struct SweepResult {
  std::vector<BoundReport> reports;  // ordered by (tau, seed, epoch)
  std::size_t failures = 0;
  std::vector<std::string> diagnostics;
};

// One training/heldout pair for a run seed.
struct RunData {
  Dataset train;
  Dataset heldout;
  std::vector<double> hyperplane;  // SYNTH only
};

RunData load_run_data(const DatasetSpec& spec, std::uint64_t run_seed);
MlpArchitecture architecture_for(const ExperimentConfig& cfg, const Dataset& train);

SweepResult run_one_stage_sweep(const ExperimentConfig& cfg);
SweepResult run_two_stage_sweep(const ExperimentConfig& cfg);
SweepResult run_experiment(const ExperimentConfig& cfg);

/// JSON sidecar describing a generated SYNTH dataset.
std::string synth_sidecar_json(const SynthConfig& cfg, const SynthData& data, LabelMode mode);

struct PlotSpec {
  double delta = 0.05;
  int width = 640;
  int height = 420;
};

/// Deterministic SVG for one group of rows (averaged over seeds, final rows only).
std::string render_svg(const std::vector<BoundReport>& reports, const std::string& title,
                       const PlotSpec& spec);

/// Writes one SVG per figure group (one-stage per label mode, two-stage).
/// Throws DomainError on empty input.
std::vector<std::filesystem::path> emit_plots(const std::vector<BoundReport>& reports,
                                              const std::filesystem::path& out_dir,
                                              const PlotSpec& spec = {});

}  // namespace dpb

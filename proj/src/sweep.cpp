#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <memory>
#include <cstdio>
#include <mutex>
#include <thread>

#include "dpbayes/errors.hpp"
#include "dpbayes/harness.hpp"

namespace dpb {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Runs f(0..n-1) on up to `threads` workers. The first exception is rethrown
// after all workers finish.
template <typename F>
void parallel_for(std::size_t n, std::size_t threads, F&& f) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          f(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::vector<double> sorted_grid(std::vector<double> g) {
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

RunData load_base(const DatasetSpec& spec, std::uint64_t run_seed) {
  switch (spec.kind) {
    case DatasetKind::Synth: {
      SynthConfig c = spec.synth;
      c.seed = spec.synth_seed.value_or(derive_seed(run_seed, "data"));
      auto s = synth_generate(c);
      return {std::move(s.train), std::move(s.heldout), std::move(s.hyperplane)};
    }
    case DatasetKind::Mnist: {
      auto m = mnist_load(spec.mnist, spec.limit);
      return {std::move(m.train), std::move(m.heldout), {}};
    }
    case DatasetKind::Csv: {
      auto train = read_dataset_csv(spec.train_csv, spec.num_classes, Split::Train, LabelMode::True);
      auto held =
          read_dataset_csv(spec.heldout_csv, spec.num_classes, Split::Heldout, LabelMode::True);
      if (spec.limit) {
        train = train.head(*spec.limit);
        held = held.head(*spec.limit);
      }
      return {std::move(train), std::move(held), {}};
    }
  }
  throw ConfigError("unknown dataset kind");
}

RunData apply_label_mode(RunData base, const DatasetSpec& spec, std::uint64_t run_seed) {
  if (spec.label_mode == LabelMode::Random) {
    const std::uint64_t s =
        spec.kind == DatasetKind::Synth && spec.synth_seed ? *spec.synth_seed : run_seed;
    const int K = base.train.num_classes();
    base.train = randomize_labels(base.train, K, derive_seed(s, "random-train"));
    base.heldout = randomize_labels(base.heldout, K, derive_seed(s, "random-heldout"));
  }
  return base;
}

// Loads non-SYNTH data once; SYNTH draws a dataset per run seed.
class DataSource {
public:
  explicit DataSource(const DatasetSpec& spec) : spec_(spec) {
    if (spec_.kind != DatasetKind::Synth) fixed_ = load_base(spec_, 0);
  }

  RunData get(std::uint64_t run_seed) const {
    RunData base = fixed_ ? *fixed_ : load_base(spec_, run_seed);
    return apply_label_mode(std::move(base), spec_, run_seed);
  }

private:
  const DatasetSpec& spec_;
  std::optional<RunData> fixed_;
};

AssemblyParams assembly_params(const ExperimentConfig& cfg, const Dataset& train) {
  return {static_cast<std::int64_t>(train.size()), cfg.delta, cfg.optimize_beta,
          cfg.lever_variant};
}

RawRun base_ids(const ExperimentConfig& cfg, std::uint64_t seed, double tau1, double tau2,
                std::size_t epoch) {
  RawRun r;
  r.seed = seed;
  r.dataset = to_string(cfg.dataset.kind);
  r.label_mode = cfg.dataset.label_mode;
  r.procedure = cfg.procedure;
  r.tau1 = tau1;
  r.tau2 = tau2;
  r.gamma = cfg.procedure == Procedure::TwoStage ? cfg.gamma
                                                 : std::numeric_limits<double>::quiet_NaN();
  r.epoch = epoch;
  return r;
}

struct Cell {
  std::vector<BoundReport> rows;
  std::string diagnostic;
  bool failed = false;
};

TrainOptions train_options(const ExperimentConfig& cfg, std::uint64_t seed, double tau) {
  TrainOptions opts;
  opts.window = cfg.window;
  opts.loss = BoundedXentConfig{cfg.l_max};
  if (cfg.checkpoint_dir) {
    char name[64];
    std::snprintf(name, sizeof name, "seed%llu_tau%.6g", static_cast<unsigned long long>(seed),
                  tau);
    opts.persist_dir = *cfg.checkpoint_dir / name;
  }
  return opts;
}

// Observer that emits a single-iterate row every `every` epochs before the end.
EpochObserver checkpoint_observer(const ExperimentConfig& cfg, const RunData& data,
                                  const MlpArchitecture& arch, std::size_t last_epoch,
                                  RawRun ids, std::optional<KlEstimate> kl,
                                  std::optional<PrivacyBudget> privacy,
                                  std::vector<BoundReport>& rows, Clock::time_point t0) {
  if (cfg.checkpoint_every == 0) return {};
  auto eval = std::make_shared<MlpEvaluator>(arch, BoundedXentConfig{cfg.l_max});
  return [&cfg, &data, &rows, eval, last_epoch, ids, kl, privacy, t0](std::size_t epoch,
                                                                    std::span<const double> w) {
    if (epoch % cfg.checkpoint_every != 0 || epoch >= last_epoch) return;
    RawRun r = ids;
    r.epoch = epoch;
    const auto tr = eval->empirical_risks(w, data.train);
    r.train_err01 = tr.err01;
    r.train_xent = tr.xent;
    r.test_err01 = eval->empirical_risks(w, data.heldout).err01;
    r.kl = kl;
    r.privacy = privacy;
    r.runtime_s = seconds_since(t0);
    rows.push_back(assemble_report(r, assembly_params(cfg, data.train)));
  };
}

void fill_posterior_risks(RawRun& r, std::span<const WeightVector> samples,
                          const MlpArchitecture& arch, const ExperimentConfig& cfg,
                          const RunData& data) {
  MlpEvaluator eval(arch, BoundedXentConfig{cfg.l_max});
  const auto tr = posterior_risk_mc(samples, eval, data.train);
  const auto te = posterior_risk_mc(samples, eval, data.heldout);
  r.train_err01 = tr.err01;
  r.train_xent = tr.xent;
  r.test_err01 = te.err01;
}

SweepResult merge(std::vector<Cell>& cells, const ExperimentConfig& cfg) {
  SweepResult out;
  for (auto& c : cells) {
    if (c.failed) {
      ++out.failures;
      out.diagnostics.push_back(c.diagnostic);
    }
    for (auto& r : c.rows) out.reports.push_back(std::move(r));
  }
  if (cfg.strict && out.failures > 0) {
    throw DivergenceError(std::to_string(out.failures) + " run(s) diverged; first: " +
                          out.diagnostics.front());
  }
  return out;
}

}  // namespace

RunData load_run_data(const DatasetSpec& spec, std::uint64_t run_seed) {
  return apply_label_mode(load_base(spec, run_seed), spec, run_seed);
}

MlpArchitecture architecture_for(const ExperimentConfig& cfg, const Dataset& train) {
  MlpArchitecture arch;
  arch.layer_sizes.push_back(train.dim());
  for (std::size_t h : cfg.hidden) arch.layer_sizes.push_back(h);
  arch.layer_sizes.push_back(static_cast<std::size_t>(train.num_classes()));
  arch.validate();
  return arch;
}

SweepResult run_one_stage_sweep(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  cfg.procedure = Procedure::OneStage;
  cfg.validate();
  const auto taus = sorted_grid(cfg.taus);
  const DataSource source(cfg.dataset);
  const std::size_t n_seeds = cfg.seeds.size();
  std::vector<Cell> cells(taus.size() * n_seeds);

  parallel_for(cells.size(), cfg.threads, [&](std::size_t idx) {
    const double tau = taus[idx / n_seeds];
    const std::uint64_t seed = cfg.seeds[idx % n_seeds];
    const auto t0 = Clock::now();
    const RunData data = source.get(seed);
    const MlpArchitecture arch = architecture_for(cfg, data.train);
    RawRun ids = base_ids(cfg, seed, tau, tau, cfg.sgld.epochs);
    ids.m = static_cast<std::int64_t>(data.train.size());
    Cell& cell = cells[idx];

    SgldConfig sg = cfg.sgld;
    sg.seed = seed;
    TrainOptions opts = train_options(cfg, seed, tau);
    opts.observer = checkpoint_observer(cfg, data, arch, sg.epochs, ids, std::nullopt,
                                        std::nullopt, cell.rows, t0);
    try {
      const TrainResult res = one_stage_train(arch, data.train, tau, sg, opts);
      RawRun r = ids;
      fill_posterior_risks(r, res.sink.samples(), arch, cfg, data);
      r.runtime_s = seconds_since(t0);
      cell.rows.push_back(assemble_report(r, assembly_params(cfg, data.train)));
    } catch (const DivergenceError& e) {
      cell.failed = true;
      cell.diagnostic = "seed " + std::to_string(seed) + " tau " + std::to_string(tau) + ": " +
                        e.what();
      RawRun r = ids;
      r.runtime_s = seconds_since(t0);
      cell.rows.push_back(failed_report(r));
    }
  });
  return merge(cells, cfg);
}

SweepResult run_two_stage_sweep(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  cfg.procedure = Procedure::TwoStage;
  cfg.validate();
  const auto tau2s = sorted_grid(cfg.tau2s);
  const DataSource source(cfg.dataset);
  const std::size_t n_seeds = cfg.seeds.size();

  // Stage one and the prior-risk samples depend only on the seed and are
  // shared by every tau2 in the grid.
  struct SeedState {
    RunData data;
    std::optional<MlpArchitecture> arch;
    WeightVector w0;
    std::vector<double> prior_risks;
    double stage_one_seconds = 0.0;
    std::string diagnostic;
  };
  std::vector<SeedState> states(n_seeds);
  parallel_for(n_seeds, cfg.threads, [&](std::size_t si) {
    const auto t0 = Clock::now();
    const std::uint64_t seed = cfg.seeds[si];
    SeedState& st = states[si];
    st.data = source.get(seed);
    st.arch = architecture_for(cfg, st.data.train);
    SgldConfig sg = cfg.sgld;
    sg.seed = seed;
    const TwoStageConfig two{cfg.tau1, tau2s.front(), cfg.gamma, cfg.T1, cfg.T2};
    try {
      st.w0 = two_stage_prior_mean(*st.arch, st.data.train, two, sg,
                                   train_options(cfg, seed, cfg.tau1));
      MlpEvaluator eval(*st.arch, BoundedXentConfig{cfg.l_max});
      const RiskFn risk = [&](std::span<const double> w) {
        return eval.surrogate_risk(w, st.data.train);
      };
      Rng rng(derive_seed(seed, "logz"));
      st.prior_risks = prior_risk_samples(GaussianPrior{st.w0, cfg.gamma}, risk, cfg.n_logz, rng);
    } catch (const DivergenceError& e) {
      st.diagnostic = std::string("stage one: ") + e.what();
    }
    st.stage_one_seconds = seconds_since(t0);
  });

  std::vector<Cell> cells(tau2s.size() * n_seeds);
  parallel_for(cells.size(), cfg.threads, [&](std::size_t idx) {
    const double tau2 = tau2s[idx / n_seeds];
    const std::size_t si = idx % n_seeds;
    const std::uint64_t seed = cfg.seeds[si];
    const SeedState& st = states[si];
    const auto t0 = Clock::now();
    Cell& cell = cells[idx];
    RawRun ids = base_ids(cfg, seed, cfg.tau1, tau2, cfg.T1 + cfg.T2);
    ids.m = static_cast<std::int64_t>(st.data.train.size());

    const auto fail = [&](const std::string& why) {
      cell.failed = true;
      cell.diagnostic = "seed " + std::to_string(seed) + " tau2 " + std::to_string(tau2) + ": " + why;
      RawRun r = ids;
      r.runtime_s = st.stage_one_seconds + seconds_since(t0);
      cell.rows.push_back(failed_report(r));
    };
    if (!st.diagnostic.empty()) {
      fail(st.diagnostic);
      return;
    }

    const KlEstimate kl = kl_estimate_from_risks(tau2, st.prior_risks);
    const PrivacyBudget privacy = gibbs_sample_privacy(cfg.tau1, cfg.l_max, ids.m);
    SgldConfig sg = cfg.sgld;
    sg.seed = seed;
    const TwoStageConfig two{cfg.tau1, tau2, cfg.gamma, cfg.T1, cfg.T2};
    TrainOptions opts = train_options(cfg, seed, tau2);
    opts.observer = checkpoint_observer(cfg, st.data, *st.arch, cfg.T1 + cfg.T2, ids, kl,
                                        privacy, cell.rows, t0);
    try {
      const TrainResult post = two_stage_posterior(*st.arch, st.data.train, st.w0, two, sg, opts);
      RawRun r = ids;
      fill_posterior_risks(r, post.sink.samples(), *st.arch, cfg, st.data);
      r.kl = kl;
      r.privacy = privacy;
      r.runtime_s = st.stage_one_seconds + seconds_since(t0);
      cell.rows.push_back(assemble_report(r, assembly_params(cfg, st.data.train)));
    } catch (const DivergenceError& e) {
      fail(e.what());
    }
  });
  return merge(cells, cfg);
}

SweepResult run_experiment(const ExperimentConfig& cfg) {
  return cfg.procedure == Procedure::OneStage ? run_one_stage_sweep(cfg) : run_two_stage_sweep(cfg);
}

}  // namespace dpb

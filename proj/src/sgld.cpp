#include "dpbayes/sgld.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>

#include "dpbayes/errors.hpp"

namespace dpb {

void SgldConfig::validate() const {
  if (!(a0 > 0.0) || !std::isfinite(a0)) throw ConfigError("a0 must be positive");
  if (!(b >= 0.0) || !std::isfinite(b)) throw ConfigError("b must be >= 0");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (epochs == 0) throw ConfigError("epochs must be positive");
}

double SgldConfig::learning_rate(std::size_t epoch) const {
  if (epoch == 0) throw DomainError("epochs are numbered from 1");
  return a0 * std::pow(static_cast<double>(epoch), -b);
}

double anneal_tau(const AnnealSchedule& s, std::size_t t) {
  if (s.T1 == 0) throw DomainError("T1 must be positive");
  if (t < s.T1 || t > 2 * s.T1) throw DomainError("annealing epoch outside [T1, 2 T1]");
  if (t == s.T1) return s.tau1;
  if (t == 2 * s.T1) return s.tau2;
  const double T1 = static_cast<double>(s.T1);
  const double td = static_cast<double>(t);
  return ((td - T1) * s.tau2 + (2.0 * T1 - td) * s.tau1) / T1;
}

void langevin_step(std::span<double> w, std::span<const double> grad_u, double eta, Rng& rng,
                   NoiseMode noise) {
  if (!(eta > 0.0)) throw DomainError("step size must be positive");
  const double half = 0.5 * eta;
  if (noise == NoiseMode::Off) {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= half * grad_u[i];
    return;
  }
  const double sd = std::sqrt(eta);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] += -half * grad_u[i] + sd * rng.normal();
}

void sgld_step(std::span<double> w, const EnergySpec& energy, const RiskGradientFn& risk_grad,
               double eta, Rng& rng, std::span<double> scratch, NoiseMode noise) {
  if (scratch.size() != w.size()) throw DomainError("scratch buffer has the wrong length");
  if (energy.tau != 0.0) {
    risk_grad(w, scratch);
    for (double& g : scratch) g *= energy.tau;
  } else {
    std::fill(scratch.begin(), scratch.end(), 0.0);
  }
  if (energy.anchor) {
    const auto& a = *energy.anchor;
    for (std::size_t i = 0; i < w.size(); ++i) scratch[i] += a.gamma * (w[i] - a.w0[i]);
  }
  for (double g : scratch) {
    if (!std::isfinite(g)) throw DivergenceError("non-finite SGLD gradient");
  }
  langevin_step(w, scratch, eta, rng, noise);
  for (double v : w) {
    if (!std::isfinite(v)) throw DivergenceError("non-finite SGLD iterate");
  }
}

// --- checkpoints -------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'D', 'P', 'B', 'W'};

template <typename T>
void put_le(std::ostream& out, T v) {
  unsigned char b[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), sizeof b);
}

template <typename T>
T get_le(std::istream& in, const std::string& path) {
  unsigned char b[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof b)) {
    throw DataError(DataErrorKind::Truncated, "truncated checkpoint " + path);
  }
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, std::span<const double> w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(DataErrorKind::Io, "cannot open " + path.string());
  out.write(kMagic, 4);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, w.size());
  for (double v : w) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  if (!out) throw DataError(DataErrorKind::Io, "write failed: " + path.string());
}

WeightVector read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataErrorKind::Io, "cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4)) throw DataError(DataErrorKind::Truncated, "truncated checkpoint");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError(DataErrorKind::BadMagic, "not a weight checkpoint: " + path.string());
  }
  const auto version = get_le<std::uint32_t>(in, path.string());
  if (version != kCheckpointVersion) {
    throw DataError(DataErrorKind::Format, "unsupported checkpoint version");
  }
  const auto n = get_le<std::uint64_t>(in, path.string());
  WeightVector w(n);
  for (auto& v : w) v = std::bit_cast<double>(get_le<std::uint64_t>(in, path.string()));
  return w;
}

IterateSink::IterateSink(std::size_t capacity, std::optional<std::filesystem::path> persist_dir)
    : capacity_(capacity), persist_dir_(std::move(persist_dir)) {
  if (capacity_ == 0) throw ConfigError("iterate window must be positive");
  if (persist_dir_) std::filesystem::create_directories(*persist_dir_);
}

void IterateSink::push(std::size_t epoch, std::span<const double> w) {
  iterates_.emplace_back(w.begin(), w.end());
  epochs_.push_back(epoch);
  if (iterates_.size() > capacity_) {
    iterates_.pop_front();
    epochs_.pop_front();
  }
  if (persist_dir_) {
    char name[32];
    std::snprintf(name, sizeof name, "epoch_%06zu.w64", epoch);
    write_checkpoint(*persist_dir_ / name, w);
  }
}

// --- training procedures -----------------------------------------------------

namespace {

// Runs epochs [first, last] of a chain; `energy_at(epoch)` gives the energy and
// `rate_at(epoch)` the step size for that epoch.
class Chain {
public:
  Chain(const MlpArchitecture& arch, const Dataset& train, const SgldConfig& cfg,
        const TrainOptions& opts, WeightVector init, std::uint64_t stream_seed)
      : eval_(arch, opts.loss),
        train_(train),
        cfg_(cfg),
        opts_(opts),
        w_(std::move(init)),
        scratch_(w_.size()),
        rng_(stream_seed) {
    if (train_.dim() != arch.input_dim()) {
      throw ConfigError("dataset dimension does not match the network input");
    }
    if (static_cast<std::size_t>(train_.num_classes()) != arch.num_classes()) {
      throw ConfigError("dataset class count does not match the network output");
    }
    if (cfg_.batch_size > train_.size()) throw ConfigError("batch_size exceeds dataset size");
  }

  template <typename EnergyAt, typename RateAt>
  void run(std::size_t first, std::size_t last, EnergyAt energy_at, RateAt rate_at,
           IterateSink* sink) {
    for (std::size_t epoch = first; epoch <= last; ++epoch) {
      const EnergySpec energy = energy_at(epoch);
      const double eta = rate_at(epoch);
      const auto batches = minibatch_stream(train_.size(), cfg_.batch_size, rng_.engine()());
      for (const auto& batch : batches) {
        const RiskGradientFn grad = [&](std::span<const double> w, std::span<double> out) {
          eval_.gradient(w, train_, batch, out);
        };
        try {
          sgld_step(w_, energy, grad, eta, rng_, scratch_, opts_.noise);
        } catch (const DivergenceError& e) {
          throw DivergenceError(std::string(e.what()) + " at epoch " + std::to_string(epoch));
        }
      }
      if (sink) sink->push(epoch, w_);
      if (opts_.observer) opts_.observer(epoch, w_);
    }
  }

  const WeightVector& weights() const { return w_; }

private:
  MlpEvaluator eval_;
  const Dataset& train_;
  const SgldConfig& cfg_;
  const TrainOptions& opts_;
  WeightVector w_;
  WeightVector scratch_;
  Rng rng_;
};

WeightVector initial_weights(const MlpArchitecture& arch, const SgldConfig& cfg,
                             const TrainOptions& opts) {
  if (opts.init) {
    if (opts.init->size() != arch.param_count()) {
      throw ConfigError("initial weight vector has the wrong length");
    }
    return *opts.init;
  }
  Rng rng(derive_seed(cfg.seed, "init"));
  return init_params(arch, rng);
}

}  // namespace

TrainResult one_stage_train(const MlpArchitecture& arch, const Dataset& train, double tau,
                            const SgldConfig& cfg, const TrainOptions& opts) {
  cfg.validate();
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw ConfigError("tau must be finite and >= 0");
  Chain chain(arch, train, cfg, opts, initial_weights(arch, cfg, opts),
              derive_seed(cfg.seed, "chain"));
  IterateSink sink(opts.window, opts.persist_dir);
  chain.run(
      1, cfg.epochs, [&](std::size_t) { return EnergySpec{tau, std::nullopt}; },
      [&](std::size_t t) { return cfg.learning_rate(t); }, &sink);
  return {chain.weights(), std::move(sink)};
}

void TwoStageConfig::validate() const {
  if (!(tau1 >= 0.0) || !std::isfinite(tau1)) throw ConfigError("tau1 must be finite and >= 0");
  if (!(tau2 >= 0.0) || !std::isfinite(tau2)) throw ConfigError("tau2 must be finite and >= 0");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be positive");
  if (T1 < 1 || T2 <= T1) throw ConfigError("two-stage schedule needs T2 > T1 >= 1");
}

WeightVector two_stage_prior_mean(const MlpArchitecture& arch, const Dataset& train,
                                  const TwoStageConfig& two, const SgldConfig& cfg,
                                  const TrainOptions& opts) {
  cfg.validate();
  two.validate();
  Chain chain(arch, train, cfg, opts, initial_weights(arch, cfg, opts),
              derive_seed(cfg.seed, "stage1"));
  chain.run(
      1, two.T1, [&](std::size_t) { return EnergySpec{two.tau1, std::nullopt}; },
      [&](std::size_t t) { return cfg.learning_rate(t); }, nullptr);
  return chain.weights();
}

TrainResult two_stage_posterior(const MlpArchitecture& arch, const Dataset& train,
                                std::span<const double> w0, const TwoStageConfig& two,
                                const SgldConfig& cfg, const TrainOptions& opts) {
  cfg.validate();
  two.validate();
  if (w0.size() != arch.param_count()) throw ConfigError("prior mean has the wrong length");
  const WeightVector anchor_mean(w0.begin(), w0.end());
  const Anchor anchor{anchor_mean, two.gamma};
  const AnnealSchedule schedule{two.tau1, two.tau2, two.T1};
  const std::size_t T1 = two.T1;

  Chain chain(arch, train, cfg, opts, anchor_mean, derive_seed(cfg.seed, "stage2"));
  IterateSink sink(opts.window, opts.persist_dir);
  // Global epochs T1+1 .. T1+T2; the learning-rate schedule restarts at T1.
  chain.run(
      T1 + 1, T1 + two.T2,
      [&](std::size_t epoch) {
        const double tau = epoch <= 2 * T1 ? anneal_tau(schedule, epoch) : two.tau2;
        return EnergySpec{tau, anchor};
      },
      [&](std::size_t epoch) { return cfg.learning_rate(epoch - T1); }, &sink);
  return {chain.weights(), std::move(sink)};
}

TwoStageResult two_stage_train(const MlpArchitecture& arch, const Dataset& train,
                               const TwoStageConfig& two, const SgldConfig& cfg,
                               const TrainOptions& opts) {
  WeightVector w0 = two_stage_prior_mean(arch, train, two, cfg, opts);
  TrainResult post = two_stage_posterior(arch, train, w0, two, cfg, opts);
  const auto privacy = gibbs_sample_privacy(two.tau1, opts.loss.range(),
                                            static_cast<std::int64_t>(train.size()));
  return {std::move(w0), std::move(post), privacy};
}

}  // namespace dpb

#pragma once

// Stochastic gradient Langevin dynamics targeting exp(-U) with
//   U(w) = tau * R(w)                              (unanchored)
//   U(w) = tau * R(w) + gamma/2 * |w - w0|^2       (anchored)
// where R is the mean bounded cross entropy over the training set.
//
// Update: w <- w - (eta/2) g(w) + sqrt(eta) xi, xi ~ N(0, I), with g the
// minibatch estimate of grad U. The step size eta at epoch t is a0 t^{-b}.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "dpbayes/bounds.hpp"
#include "dpbayes/data.hpp"
#include "dpbayes/model.hpp"
#include "dpbayes/rng.hpp"

namespace dpb {

struct SgldConfig {
  double a0 = 1e-3;
  double b = 0.5;
  std::size_t batch_size = 10;
  std::size_t epochs = 1000;
  std::uint64_t seed = 0;

  void validate() const;
  // a0 * t^{-b}, t >= 1
  double learning_rate(std::size_t epoch) const;
};

struct Anchor {
  std::span<const double> w0;
  double gamma = 1.0;
};

struct EnergySpec {
  double tau = 0.0;
  std::optional<Anchor> anchor;
};

struct AnnealSchedule {
  double tau1 = 0.0;
  double tau2 = 0.0;
  std::size_t T1 = 1;
};

/// ((t - T1) tau2 + (2 T1 - t) tau1) / T1 for T1 <= t <= 2 T1.
double anneal_tau(const AnnealSchedule& schedule, std::size_t t);

// Test hook: NoiseMode::Off turns the chain into plain gradient descent on U.
enum class NoiseMode { On, Off };

// Writes the minibatch mean surrogate-risk gradient at w into out.
using RiskGradientFn = std::function<void(std::span<const double> w, std::span<double> out)>;

/// In-place Langevin update given a precomputed estimate of grad U.
void langevin_step(std::span<double> w, std::span<const double> grad_u, double eta, Rng& rng,
                   NoiseMode noise = NoiseMode::On);

/// One SGLD update of w. `scratch` must have the length of w. Throws
/// DivergenceError when the gradient or the new iterate is not finite.
void sgld_step(std::span<double> w, const EnergySpec& energy, const RiskGradientFn& risk_grad,
               double eta, Rng& rng, std::span<double> scratch, NoiseMode noise = NoiseMode::On);

// --- checkpoints -------------------------------------------------------------

// 16-byte header: magic "DPBW", u32 version, u64 length; then little-endian f64 values.
inline constexpr std::uint32_t kCheckpointVersion = 1;
void write_checkpoint(const std::filesystem::path& path, std::span<const double> w);
WeightVector read_checkpoint(const std::filesystem::path& path);

// Keeps the last `capacity` epoch-end iterates as approximate posterior draws.
class IterateSink {
public:
  explicit IterateSink(std::size_t capacity = 20,
                       std::optional<std::filesystem::path> persist_dir = std::nullopt);

  void push(std::size_t epoch, std::span<const double> w);

  std::size_t capacity() const noexcept { return capacity_; }
  const std::deque<WeightVector>& iterates() const noexcept { return iterates_; }
  const std::deque<std::size_t>& epochs() const noexcept { return epochs_; }
  std::vector<WeightVector> samples() const { return {iterates_.begin(), iterates_.end()}; }

private:
  std::size_t capacity_;
  std::optional<std::filesystem::path> persist_dir_;
  std::deque<WeightVector> iterates_;
  std::deque<std::size_t> epochs_;
};

using EpochObserver = std::function<void(std::size_t epoch, std::span<const double> w)>;

struct TrainOptions {
  std::size_t window = 20;
  NoiseMode noise = NoiseMode::On;
  BoundedXentConfig loss{};
  EpochObserver observer;  // called after every epoch with the global epoch number
  std::optional<std::filesystem::path> persist_dir;
  std::optional<WeightVector> init;  // default: init_params from the run seed
};

struct TrainResult {
  WeightVector final_params;
  IterateSink sink;
};

/// T = cfg.epochs epochs of minibatched SGLD at fixed tau, unanchored.
TrainResult one_stage_train(const MlpArchitecture& arch, const Dataset& train, double tau,
                            const SgldConfig& cfg, const TrainOptions& opts = {});

struct TwoStageConfig {
  double tau1 = 1.0;
  double tau2 = 1.0;
  double gamma = 2.0;
  std::size_t T1 = 100;
  std::size_t T2 = 1000;

  void validate() const;
};

struct TwoStageResult {
  WeightVector w0;
  TrainResult posterior;
  PrivacyBudget privacy;
};

/// Stage one only: T1 epochs at tau1, unanchored. Returns the prior mean w0.
WeightVector two_stage_prior_mean(const MlpArchitecture& arch, const Dataset& train,
                                  const TwoStageConfig& two, const SgldConfig& cfg,
                                  const TrainOptions& opts = {});

/// Transition and stage two starting from w0: the learning-rate schedule
/// restarts, T1 epochs anneal tau1 -> tau2, then T2 - T1 epochs at tau2, all
/// anchored at w0 with precision gamma.
TrainResult two_stage_posterior(const MlpArchitecture& arch, const Dataset& train,
                                std::span<const double> w0, const TwoStageConfig& two,
                                const SgldConfig& cfg, const TrainOptions& opts = {});

TwoStageResult two_stage_train(const MlpArchitecture& arch, const Dataset& train,
                               const TwoStageConfig& two, const SgldConfig& cfg,
                               const TrainOptions& opts = {});

}  // namespace dpb

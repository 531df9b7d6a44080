#pragma once

// Gaussian priors N(w0, (1/gamma) I), Gibbs-posterior bookkeeping and the
// Monte Carlo upper estimate of KL(Q_tau || P):
//
//   KL(Q_tau || P) = -tau Q_tau[R] - ln Z_tau,   Z_tau = P[exp(-tau R)].
//
// The first term is <= 0 and is dropped; -ln Z_tau is estimated by
// -ln((1/n) sum_i exp(-tau R(V_i))) with V_i ~ P, which by Jensen's
// inequality overestimates -ln Z_tau in expectation.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "dpbayes/data.hpp"
#include "dpbayes/model.hpp"
#include "dpbayes/rng.hpp"

namespace dpb {

struct GaussianPrior {
  WeightVector mean;
  double gamma = 1.0;  // precision; covariance (1/gamma) I

  void validate() const;
  std::size_t dim() const { return mean.size(); }
  double sigma_min() const { return 1.0 / gamma; }
  double log_density(std::span<const double> w) const;
};

struct GibbsConfig {
  double tau = 0.0;
  double surrogate_range = 4.0;
  // nullopt: improper uniform reference (stage one); Z_tau is undefined there.
  std::optional<GaussianPrior> base;
};

struct KlEstimate {
  double logz_upper = 0.0;
  double risk_term = 0.0;
  std::size_t n_samples = 0;
  double kl_upper_raw = 0.0;  // risk_term + logz_upper
  double kl_upper = 0.0;      // max(0, kl_upper_raw)
};

using RiskFn = std::function<double(std::span<const double> w)>;

WeightVector prior_sample(const GaussianPrior& prior, Rng& rng);

/// (gamma/2) |w_q - w_p|^2 for equal-precision isotropic Gaussians.
double gaussian_kl(const GaussianPrior& q, const GaussianPrior& p);

/// -ln((1/n) sum exp(-tau r_i)) via a max-shifted log-sum-exp.
double logz_upper_from_risks(double tau, std::span<const double> risks);

/// Surrogate risk of n fresh prior draws, in draw order.
std::vector<double> prior_risk_samples(const GaussianPrior& prior, const RiskFn& risk_fn,
                                       std::size_t n, Rng& rng);

KlEstimate logz_upper_mc(const GibbsConfig& gibbs, const RiskFn& risk_fn, std::size_t n, Rng& rng);

/// Builds the estimate from precomputed prior risks (shared across taus).
KlEstimate kl_estimate_from_risks(double tau, std::span<const double> risks);

struct PosteriorRisk {
  double err01 = 0.0;
  double xent = 0.0;
  std::vector<double> per_sample_err01;
  std::vector<double> per_sample_xent;
};

PosteriorRisk posterior_risk_mc(std::span<const WeightVector> samples, MlpEvaluator& eval,
                                const Dataset& data);
PosteriorRisk posterior_risk_mc(std::span<const WeightVector> samples,
                                const MlpArchitecture& arch, const Dataset& data,
                                const BoundedXentConfig& cfg = {});

// ln dP'/dP (v) for equal-precision Gaussians P = N(w), P' = N(w').
double gaussian_log_ratio(std::span<const double> v, const GaussianPrior& p,
                          const GaussianPrior& pprime);

struct McMean {
  double mean = 0.0;
  double std_error = 0.0;
};

McMean mc_mean(std::span<const double> values);

/// Monte Carlo Q[ln dP'/dP] from samples of Q.
McMean lemma2_residual(std::span<const WeightVector> q_samples, const GaussianPrior& p,
                       const GaussianPrior& pprime);

/// Q[ln dP'/dP] in closed form when Q is Gaussian with mean q_mean (any
/// isotropic covariance): (gamma/2)(|q_mean - w|^2 - |q_mean - w'|^2).
double lemma2_closed_form(std::span<const double> q_mean, const GaussianPrior& p,
                          const GaussianPrior& pprime);

struct Lemma3Check {
  double lhs = 0.0;       // Monte Carlo Q[ln dN(w')/dN(w)]
  double lhs_se = 0.0;
  double rhs = 0.0;       // gamma/2 |w-w'|^2 + sqrt(gamma)|w-w'| * mean sqrt(gamma)|v-w'|
};

Lemma3Check lemma3_check(std::span<const double> w, std::span<const double> wprime,
                         double gamma, std::span<const WeightVector> q_samples);

struct Lemma4Check {
  double estimate = 0.0;  // mean sqrt(gamma) |v - w|
  double estimate_se = 0.0;
  double bound = 0.0;     // sqrt(2 tau range) + sqrt(2/pi)
};

Lemma4Check lemma4_check(const GibbsConfig& gibbs, std::span<const WeightVector> q_samples);

}  // namespace dpb

#include "dpbayes/bounds.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "dpbayes/errors.hpp"

namespace dpb {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const char* what) {
  if (!ok) throw DomainError(what);
}

void require_probability(double x, const char* name) {
  if (!std::isfinite(x) || x < 0.0 || x > 1.0) {
    throw DomainError(std::string(name) + " must be a finite value in [0,1]");
  }
}

void require_sample_size(std::int64_t m) { require(m >= 1, "m must be >= 1"); }

void require_confidence(double delta) {
  require(std::isfinite(delta) && delta > 0.0 && delta < 1.0, "delta must lie in (0,1)");
}

void require_nonnegative(double x, const char* what) {
  require(std::isfinite(x) && x >= 0.0, what);
}

// q ln(q/p), with the 0 ln 0 = 0 convention.
double xlogx_ratio(double q, double p) {
  if (q == 0.0) return 0.0;
  if (p == 0.0) return kInf;
  return q * std::log(q / p);
}

double log_term(std::int64_t m, double delta) {
  return std::log(2.0 * std::sqrt(static_cast<double>(m)) / delta);
}

}  // namespace

void BoundParams::validate() const {
  require_sample_size(m);
  require_confidence(delta);
  require(std::isfinite(beta) && beta > 0.0 && beta < delta, "beta must lie in (0, delta)");
  require_nonnegative(epsilon, "epsilon must be finite and >= 0");
}

BoundParams BoundParams::with_half_beta(std::int64_t m, double delta, double epsilon) {
  BoundParams p{m, delta, delta / 2.0, epsilon};
  p.validate();
  return p;
}

double kl_bin(double q, double p) {
  require_probability(q, "q");
  require_probability(p, "p");
  if (q == p) return 0.0;
  const double v = xlogx_ratio(q, p) + xlogx_ratio(1.0 - q, 1.0 - p);
  // Rounding can push tiny divergences a hair below zero.
  return v < 0.0 ? 0.0 : v;
}

double kl_inverse(double q, double c) {
  require_probability(q, "q");
  require(!std::isnan(c) && c >= 0.0, "c must be >= 0");
  if (q == 1.0 || c == kInf) return 1.0;
  if (c == 0.0) return q;

  // kl_bin(q, .) is increasing on [q, 1) and diverges at 1, so the root is
  // bracketed by [q, 1]. Invariant: kl(q, lo) <= c < kl(q, hi).
  double lo = q;
  double hi = 1.0;
  for (int it = 0; it < 2000; ++it) {
    const double mid = lo + (hi - lo) / 2.0;
    if (mid <= lo || mid >= hi) break;
    if (kl_bin(q, mid) <= c) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

double maurer_bound(double kl_qp, std::int64_t m, double delta) {
  require_nonnegative(kl_qp, "kl_qp must be finite and >= 0");
  require_sample_size(m);
  require_confidence(delta);
  return (kl_qp + log_term(m, delta)) / static_cast<double>(m);
}

double lever_bound(double tau, std::int64_t m, double delta, LeverVariant variant) {
  require(std::isfinite(tau) && tau >= 0.0, "tau must be finite and >= 0");
  require_sample_size(m);
  require_confidence(delta);
  const double md = static_cast<double>(m);
  const double L = log_term(m, delta);
  const double quad = tau * tau / (2.0 * md);
  switch (variant) {
    case LeverVariant::AsDisplayed:
      return tau * std::sqrt(2.0 / md * L + quad + L) / md;
    case LeverVariant::Conventional:
    default:
      return (tau * std::sqrt(2.0 / md * L) + quad + L) / md;
  }
}

double max_info_pure(double epsilon, std::int64_t m) {
  require_nonnegative(epsilon, "epsilon must be finite and >= 0");
  require_sample_size(m);
  return epsilon * static_cast<double>(m);
}

double max_info_approx(double epsilon, std::int64_t m, double beta) {
  require_nonnegative(epsilon, "epsilon must be finite and >= 0");
  require_sample_size(m);
  require(std::isfinite(beta) && beta > 0.0 && beta < 1.0, "beta must lie in (0,1)");
  const double md = static_cast<double>(m);
  return epsilon * epsilon * md / 2.0 + epsilon * std::sqrt(md * std::log(2.0 / beta) / 2.0);
}

double dp_pacbayes_rhs(double kl_qp, const BoundParams& params) {
  params.validate();
  require_nonnegative(kl_qp, "kl_qp must be finite and >= 0");
  const double md = static_cast<double>(params.m);
  const double log_part =
      std::log(2.0 * std::sqrt(md) / (params.delta - params.beta));
  return (kl_qp + log_part) / md + max_info_approx(params.epsilon, params.m, params.beta) / md;
}

BetaOptimum optimize_beta(double kl_qp, std::int64_t m, double delta, double epsilon) {
  require_nonnegative(kl_qp, "kl_qp must be finite and >= 0");
  require_sample_size(m);
  require_confidence(delta);
  require_nonnegative(epsilon, "epsilon must be finite and >= 0");

  const auto f = [&](double beta) {
    return dp_pacbayes_rhs(kl_qp, BoundParams{m, delta, beta, epsilon});
  };

  double a = 1e-12 * delta;
  double b = (1.0 - 1e-12) * delta;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = f(x1);
  double f2 = f(x2);
  while ((b - a) > 1e-8 * delta) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    }
  }

  BetaOptimum best{x1, f1};
  if (f2 < best.bound) best = {x2, f2};
  // Guard the contract against a non-unimodal objective.
  for (double cand : {1e-12 * delta, delta / 2.0, (1.0 - 1e-12) * delta}) {
    const double v = f(cand);
    if (v < best.bound) best = {cand, v};
  }
  return best;
}

PrivacyBudget gibbs_sample_privacy(double tau, double surrogate_range, std::int64_t m) {
  require_nonnegative(tau, "tau must be finite and >= 0");
  require(std::isfinite(surrogate_range) && surrogate_range > 0.0, "surrogate range must be > 0");
  require_sample_size(m);
  return {2.0 * tau * surrogate_range / static_cast<double>(m), 0.0};
}

PrivacyBudget exp_mechanism_privacy(const ExponentialMechanismSpec& spec) {
  require_nonnegative(spec.beta_temp, "mechanism temperature must be finite and >= 0");
  require_nonnegative(spec.sensitivity, "sensitivity must be finite and >= 0");
  return {2.0 * spec.beta_temp * spec.sensitivity, 0.0};
}

double wasserstein_kl_penalty(const WassersteinPenaltyInput& in) {
  require_nonnegative(in.C, "C must be finite and >= 0");
  require(std::isfinite(in.sigma_min) && in.sigma_min > 0.0, "sigma_min must be > 0");
  require_nonnegative(in.expected_norm, "expected norm must be finite and >= 0");
  require(in.delta_prime > 0.0 && in.delta_prime < 1.0, "delta_prime must lie in (0,1)");
  const double ratio = in.C / in.sigma_min;
  return 0.5 * ratio + std::sqrt(ratio) * in.expected_norm;
}

double gibbs_expected_norm_bound(double tau, double surrogate_range) {
  require_nonnegative(tau, "tau must be finite and >= 0");
  require_nonnegative(surrogate_range, "surrogate range must be finite and >= 0");
  return std::sqrt(2.0 * tau * surrogate_range) + std::sqrt(2.0 / std::numbers::pi);
}

}  // namespace dpb

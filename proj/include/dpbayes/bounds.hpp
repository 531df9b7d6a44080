#pragma once

// Certificate formulas: binary KL and its inversion, the Maurer, Lever and
// private-prior PAC-Bayes right-hand sides, max-information, privacy
// accounting for Gibbs samples and the Gaussian mean-displacement penalty.
//
// Every function here is pure. Divergences are in nats. +infinity is the
// IEEE infinity; no function returns NaN.

#include <cstdint>

namespace dpb {

struct BoundParams {
  std::int64_t m = 1;
  double delta = 0.05;
  double beta = 0.025;
  double epsilon = 0.0;

  // Throws DomainError unless m >= 1, 0 < delta < 1, 0 < beta < delta, epsilon >= 0.
  void validate() const;

  // beta defaults to delta / 2.
  static BoundParams with_half_beta(std::int64_t m, double delta, double epsilon);
};

struct PrivacyBudget {
  double epsilon = 0.0;
  double delta_dp = 0.0;  // always 0: only pure DP mechanisms are produced
};

struct ExponentialMechanismSpec {
  double beta_temp = 0.0;
  double sensitivity = 0.0;
};

struct WassersteinPenaltyInput {
  double C = 0.0;
  double sigma_min = 1.0;
  double expected_norm = 0.0;
  double delta_prime = 0.05;
};

enum class LeverVariant {
  Conventional,  // (tau*sqrt(2/m*L) + tau^2/(2m) + L) / m
  AsDisplayed,   // tau*sqrt(2/m*L + tau^2/(2m) + L) / m
};

struct BetaOptimum {
  double beta = 0.0;
  double bound = 0.0;
};

/// KL(Bernoulli(q) || Bernoulli(p)) with 0 ln 0 = 0. Returns +inf when p is
/// 0 or 1 and q differs from it.
double kl_bin(double q, double p);

/// Largest p in [q, 1] with kl_bin(q, p) <= c. Bisection to full double
/// precision; the returned value is the upper end of the final bracket, so
/// kl_bin(q, result) >= c unless the result is 1.
double kl_inverse(double q, double c);

/// (kl_qp + ln(2 sqrt(m) / delta)) / m
double maurer_bound(double kl_qp, std::int64_t m, double delta);

double lever_bound(double tau, std::int64_t m, double delta,
                   LeverVariant variant = LeverVariant::Conventional);

/// epsilon * m, the max-information of an epsilon-DP mechanism.
double max_info_pure(double epsilon, std::int64_t m);

/// epsilon^2 m / 2 + epsilon sqrt(m ln(2/beta) / 2), the beta-approximate
/// max-information of an epsilon-DP mechanism.
double max_info_approx(double epsilon, std::int64_t m, double beta);

/// Right side of the private-prior PAC-Bayes bound for general beta in (0, delta):
/// (kl + ln(2 sqrt(m)/(delta - beta))) / m + max_info_approx(epsilon, m, beta) / m.
double dp_pacbayes_rhs(double kl_qp, const BoundParams& params);

/// Golden-section minimisation of dp_pacbayes_rhs over beta in
/// (1e-12 delta, (1 - 1e-12) delta). Never worse than beta = delta / 2.
BetaOptimum optimize_beta(double kl_qp, std::int64_t m, double delta, double epsilon);

/// One draw from exp(-tau * risk) over a probability base measure, where the
/// risk takes values in an interval of length surrogate_range, is
/// (2 tau range / m)-DP.
PrivacyBudget gibbs_sample_privacy(double tau, double surrogate_range, std::int64_t m);

/// The exponential mechanism at temperature beta with score sensitivity dq is 2 beta dq-DP.
PrivacyBudget exp_mechanism_privacy(const ExponentialMechanismSpec& spec);

/// C / (2 sigma_min) + sqrt(C / sigma_min) * expected_norm
double wasserstein_kl_penalty(const WassersteinPenaltyInput& input);

/// sqrt(2 tau range) + sqrt(2 / pi)
double gibbs_expected_norm_bound(double tau, double surrogate_range);

}  // namespace dpb

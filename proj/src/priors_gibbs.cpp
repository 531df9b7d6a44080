#include "dpbayes/priors_gibbs.hpp"

#include <cmath>
#include <numbers>

#include "dpbayes/bounds.hpp"
#include "dpbayes/errors.hpp"
#include "dpbayes/numeric.hpp"

namespace dpb {

void GaussianPrior::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw DomainError("prior precision must be > 0");
  if (mean.empty()) throw DomainError("prior mean must be nonempty");
}

double GaussianPrior::log_density(std::span<const double> w) const {
  const double p = static_cast<double>(mean.size());
  return 0.5 * p * std::log(gamma / (2.0 * std::numbers::pi)) -
         0.5 * gamma * squared_distance(w, mean);
}

WeightVector prior_sample(const GaussianPrior& prior, Rng& rng) {
  prior.validate();
  const double sd = 1.0 / std::sqrt(prior.gamma);
  WeightVector w(prior.mean.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = prior.mean[i] + sd * rng.normal();
  return w;
}

double gaussian_kl(const GaussianPrior& q, const GaussianPrior& p) {
  q.validate();
  p.validate();
  if (q.dim() != p.dim()) throw DomainError("Gaussian dimensions differ");
  if (q.gamma != p.gamma) throw DomainError("closed form requires equal precision");
  return 0.5 * q.gamma * squared_distance(q.mean, p.mean);
}

double logz_upper_from_risks(double tau, std::span<const double> risks) {
  if (risks.empty()) throw DomainError("need at least one prior sample");
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw DomainError("tau must be finite and >= 0");
  std::vector<double> logw(risks.size());
  for (std::size_t i = 0; i < risks.size(); ++i) {
    if (!std::isfinite(risks[i])) throw DomainError("non-finite risk value");
    logw[i] = -tau * risks[i];
  }
  // -ln mean exp(logw)
  return std::log(static_cast<double>(risks.size())) - log_sum_exp(logw);
}

std::vector<double> prior_risk_samples(const GaussianPrior& prior, const RiskFn& risk_fn,
                                       std::size_t n, Rng& rng) {
  prior.validate();
  std::vector<double> risks(n);
  WeightVector v(prior.dim());
  const double sd = 1.0 / std::sqrt(prior.gamma);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = prior.mean[j] + sd * rng.normal();
    risks[i] = risk_fn(v);
    if (!std::isfinite(risks[i])) throw DomainError("non-finite risk value");
  }
  return risks;
}

KlEstimate kl_estimate_from_risks(double tau, std::span<const double> risks) {
  KlEstimate e;
  e.logz_upper = logz_upper_from_risks(tau, risks);
  e.risk_term = 0.0;
  e.n_samples = risks.size();
  e.kl_upper_raw = e.risk_term + e.logz_upper;
  e.kl_upper = std::max(0.0, e.kl_upper_raw);
  return e;
}

KlEstimate logz_upper_mc(const GibbsConfig& gibbs, const RiskFn& risk_fn, std::size_t n,
                         Rng& rng) {
  if (n == 0) throw DomainError("n must be positive");
  if (!gibbs.base) throw DomainError("Z_tau needs a proper (Gaussian) base measure");
  const auto risks = prior_risk_samples(*gibbs.base, risk_fn, n, rng);
  return kl_estimate_from_risks(gibbs.tau, risks);
}

PosteriorRisk posterior_risk_mc(std::span<const WeightVector> samples, MlpEvaluator& eval,
                                const Dataset& data) {
  if (samples.empty()) throw DomainError("need at least one posterior sample");
  PosteriorRisk r;
  r.per_sample_err01.reserve(samples.size());
  r.per_sample_xent.reserve(samples.size());
  for (const auto& w : samples) {
    const auto er = eval.empirical_risks(w, data);
    r.per_sample_err01.push_back(er.err01);
    r.per_sample_xent.push_back(er.xent);
  }
  r.err01 = mean(r.per_sample_err01);
  r.xent = mean(r.per_sample_xent);
  return r;
}

PosteriorRisk posterior_risk_mc(std::span<const WeightVector> samples,
                                const MlpArchitecture& arch, const Dataset& data,
                                const BoundedXentConfig& cfg) {
  MlpEvaluator eval(arch, cfg);
  return posterior_risk_mc(samples, eval, data);
}

double gaussian_log_ratio(std::span<const double> v, const GaussianPrior& p,
                          const GaussianPrior& pprime) {
  if (p.gamma != pprime.gamma) throw DomainError("closed form requires equal precision");
  if (v.size() != p.dim() || v.size() != pprime.dim()) throw DomainError("dimension mismatch");
  return 0.5 * p.gamma * (squared_distance(v, p.mean) - squared_distance(v, pprime.mean));
}

McMean mc_mean(std::span<const double> values) {
  if (values.empty()) throw DomainError("need at least one value");
  McMean out;
  out.mean = mean(values);
  if (values.size() > 1) {
    std::vector<double> sq(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double d = values[i] - out.mean;
      sq[i] = d * d;
    }
    const double var = pairwise_sum(sq) / static_cast<double>(values.size() - 1);
    out.std_error = std::sqrt(var / static_cast<double>(values.size()));
  }
  return out;
}

McMean lemma2_residual(std::span<const WeightVector> q_samples, const GaussianPrior& p,
                       const GaussianPrior& pprime) {
  if (p.dim() != pprime.dim()) throw DomainError("dimension mismatch");
  if (p.mean == pprime.mean && p.gamma == pprime.gamma) {
    return {0.0, 0.0};
  }
  std::vector<double> vals(q_samples.size());
  for (std::size_t i = 0; i < q_samples.size(); ++i) {
    vals[i] = gaussian_log_ratio(q_samples[i], p, pprime);
  }
  return mc_mean(vals);
}

double lemma2_closed_form(std::span<const double> q_mean, const GaussianPrior& p,
                          const GaussianPrior& pprime) {
  return gaussian_log_ratio(q_mean, p, pprime);
}

Lemma3Check lemma3_check(std::span<const double> w, std::span<const double> wprime,
                         double gamma, std::span<const WeightVector> q_samples) {
  if (w.size() != wprime.size()) throw DomainError("dimension mismatch");
  if (!(gamma > 0.0)) throw DomainError("gamma must be positive");
  const GaussianPrior pw{WeightVector(w.begin(), w.end()), gamma};
  const GaussianPrior pwp{WeightVector(wprime.begin(), wprime.end()), gamma};
  const McMean lhs = lemma2_residual(q_samples, pw, pwp);

  std::vector<double> norms(q_samples.size());
  for (std::size_t i = 0; i < q_samples.size(); ++i) {
    norms[i] = std::sqrt(gamma * squared_distance(q_samples[i], wprime));
  }
  const double disp = std::sqrt(squared_distance(w, wprime));
  const double rhs = 0.5 * gamma * disp * disp + std::sqrt(gamma) * disp * mc_mean(norms).mean;
  return {lhs.mean, lhs.std_error, rhs};
}

Lemma4Check lemma4_check(const GibbsConfig& gibbs, std::span<const WeightVector> q_samples) {
  if (!gibbs.base) throw DomainError("Gibbs posterior needs a Gaussian base measure");
  const auto& base = *gibbs.base;
  std::vector<double> norms(q_samples.size());
  for (std::size_t i = 0; i < q_samples.size(); ++i) {
    norms[i] = std::sqrt(base.gamma * squared_distance(q_samples[i], base.mean));
  }
  const McMean est = mc_mean(norms);
  return {est.mean, est.std_error, gibbs_expected_norm_bound(gibbs.tau, gibbs.surrogate_range)};
}

}  // namespace dpb

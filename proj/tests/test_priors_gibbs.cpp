#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "dpbayes/bounds.hpp"
#include "dpbayes/errors.hpp"
#include "dpbayes/priors_gibbs.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace dpb;
using doctest::Approx;

TEST_CASE("prior samples") {
  const std::vector<double> mu{0.5, -2.0, 3.0};
  {
    const GaussianPrior tight{mu, 1e12};
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
      const auto v = prior_sample(tight, rng);
      for (std::size_t k = 0; k < mu.size(); ++k) CHECK(std::abs(v[k] - mu[k]) < 1e-5);
    }
  }
  const GaussianPrior p{mu, 4.0};
  Rng rng(2);
  const std::size_t n = 100000;
  std::vector<long double> s(3, 0), s2(3, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = prior_sample(p, rng);
    for (std::size_t k = 0; k < 3; ++k) {
      s[k] += v[k];
      s2[k] += static_cast<long double>(v[k]) * v[k];
    }
  }
  const double sigma = 0.5;
  for (std::size_t k = 0; k < 3; ++k) {
    const double m = static_cast<double>(s[k] / n);
    const double var = static_cast<double>(s2[k] / n) - m * m;
    CHECK(std::abs(m - mu[k]) < 4 * sigma / std::sqrt(double(n)));
    CHECK(std::abs(var / 0.25 - 1.0) < 0.05);
  }
  CHECK_THROWS_AS(prior_sample(GaussianPrior{mu, 0.0}, rng), DomainError);
  CHECK(p.log_density(mu) == Approx(1.5 * std::log(4.0 / (2 * std::numbers::pi))).epsilon(1e-15));
}

TEST_CASE("gaussian_kl closed form") {
  const GaussianPrior a{{1.0, 2.0}, 2.0};
  const GaussianPrior b{{1.0, 2.0}, 2.0};
  CHECK(gaussian_kl(a, b) == 0.0);
  const GaussianPrior c{{1.0 + 3.0, 2.0}, 2.0};
  CHECK(gaussian_kl(a, c) == Approx(9.0).epsilon(1e-15));
  CHECK(gaussian_kl(c, a) == gaussian_kl(a, c));
  CHECK(gaussian_kl(a, c) ==
        Approx(testutil::gaussian_kl_general(a.mean, 0.5, c.mean, 0.5)).epsilon(1e-14));
  CHECK_THROWS_AS(gaussian_kl(a, GaussianPrior{{1.0, 2.0}, 3.0}), DomainError);
}

TEST_CASE("log-partition estimator: degenerate cases") {
  const GibbsConfig g{3.5, 4.0, GaussianPrior{{0.0, 0.0}, 1.0}};
  Rng rng(4);
  for (std::size_t n : {1u, 7u, 1000u}) {
    const auto e = logz_upper_mc(g, [](std::span<const double>) { return 0.8; }, n, rng);
    CHECK(e.logz_upper == Approx(3.5 * 0.8).epsilon(1e-14));
    CHECK(e.risk_term == 0.0);
    CHECK(e.n_samples == n);
  }
  const GibbsConfig zero{0.0, 4.0, GaussianPrior{{0.0}, 1.0}};
  const auto e0 = logz_upper_mc(zero, [](std::span<const double> w) { return w[0] * w[0]; }, 500, rng);
  CHECK(e0.logz_upper == 0.0);
  CHECK(e0.kl_upper == 0.0);
  CHECK_THROWS_AS(logz_upper_mc(GibbsConfig{1.0, 4.0, std::nullopt},
                                [](std::span<const double>) { return 0.0; }, 10, rng),
                  DomainError);
}

TEST_CASE("log-partition estimator survives large tau") {
  // naive exponentiation would underflow to zero here
  std::vector<double> risks{2.0, 3.0, 4.0};
  const double tau = 1000.0;
  const double v = logz_upper_from_risks(tau, risks);
  CHECK(std::isfinite(v));
  CHECK(v == Approx(tau * 2.0 + std::log(3.0) - std::log1p(std::exp(-1000.0) + std::exp(-2000.0)))
                 .epsilon(1e-14));
  const auto e = kl_estimate_from_risks(1.0, std::vector<double>{-5.0, -5.0});
  CHECK(e.kl_upper_raw == Approx(-5.0));
  CHECK(e.kl_upper == 0.0);
}

TEST_CASE("log-partition estimator: 1-d Gaussian integral oracle") {
  // prior N(mu, 1/gamma), risk a (w - b)^2:  Z = exp(-tau a (mu-b)^2 / c) / sqrt(c), c = 1 + 2 tau a / gamma
  const double mu = 1.0, gamma = 1.0, a = 0.5, b = 0.0, tau = 10.0;
  const double c = 1 + 2 * tau * a / gamma;
  const double neg_log_z = 0.5 * std::log(c) + tau * a * (mu - b) * (mu - b) / c;
  const GibbsConfig g{tau, 4.0, GaussianPrior{{mu}, gamma}};
  const RiskFn risk = [&](std::span<const double> w) { return a * (w[0] - b) * (w[0] - b); };
  Rng rng(31);
  const std::size_t n = 100000;
  const auto risks = prior_risk_samples(*g.base, risk, n, rng);
  const double est = kl_estimate_from_risks(tau, risks).logz_upper;
  // delta-method standard error of -ln(mean exp(-tau R))
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = std::exp(-tau * risks[i]);
  const auto m = mc_mean(z);
  const double se = m.std_error / m.mean;
  CHECK(std::abs(est - neg_log_z) < 3 * se);
}

TEST_CASE("log-partition estimator is an upper bound in probability") {
  const double mu = 1.0, gamma = 1.0, a = 0.5, tau = 10.0;
  const double c = 1 + 2 * tau * a / gamma;
  const double neg_log_z = 0.5 * std::log(c) + tau * a * mu * mu / c;
  const GibbsConfig g{tau, 4.0, GaussianPrior{{mu}, gamma}};
  const RiskFn risk = [&](std::span<const double> w) { return a * w[0] * w[0]; };
  Rng rng(32);
  int far_below = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const auto e = logz_upper_mc(g, risk, 1000, rng);
    if (e.logz_upper < neg_log_z - 0.5) ++far_below;
  }
  CHECK(far_below <= 50);
}

TEST_CASE("posterior risk over samples") {
  MlpArchitecture arch{{3, 6, 2}};
  const auto data = testutil::random_dataset(25, 3, 2, 8);
  std::vector<WeightVector> samples;
  for (int i = 0; i < 5; ++i) samples.push_back(testutil::random_vector(arch.param_count(), 1.0, 50 + i));
  const auto r = posterior_risk_mc(samples, arch, data);
  long double err = 0, xent = 0;
  for (const auto& w : samples) {
    for (std::size_t i = 0; i < data.size(); ++i) {
      const std::vector<double> xi(data.input(i).begin(), data.input(i).end());
      const auto p = oracle::mlp_probs(arch.layer_sizes, w, xi);
      const int pred = p[0] >= p[1] ? 1 : 2;
      err += pred == data.label(i) ? 0 : 1;
      xent += oracle::bounded_xent_ref(p[data.label(i) - 1]);
    }
  }
  const double denom = static_cast<double>(samples.size() * data.size());
  CHECK(std::abs(r.err01 - static_cast<double>(err) / denom) <= 1e-12);
  CHECK(std::abs(r.xent - static_cast<double>(xent) / denom) <= 1e-12);

  const auto single = posterior_risk_mc(std::span(samples).first(1), arch, data);
  const auto direct = empirical_risks(arch, samples[0], data);
  CHECK(single.err01 == direct.err01);
  CHECK(single.xent == direct.xent);

  auto doubled = samples;
  doubled.insert(doubled.end(), samples.begin(), samples.end());
  const auto rd = posterior_risk_mc(doubled, arch, data);
  CHECK(rd.err01 == Approx(r.err01).epsilon(1e-14));
  CHECK(rd.xent == Approx(r.xent).epsilon(1e-14));
}

TEST_CASE("KL difference identity under a change of Gaussian prior") {
  const GaussianPrior p{{0.0, 1.0, -1.0}, 2.0};
  CHECK(lemma2_residual(testutil::gaussian_samples({0, 0, 0}, 1.0, 10, 1), p, p).mean == 0.0);

  const WeightVector v{0.3, 0.2, 0.1};
  const GaussianPrior pp{{1.0, 0.0, 0.5}, 2.0};
  const std::vector<WeightVector> point{v};
  // log-density difference evaluated directly
  CHECK(lemma2_residual(point, p, pp).mean ==
        Approx(pp.log_density(v) - p.log_density(v)).epsilon(1e-12));

  std::mt19937_64 gen(12);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.2, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> mq(4), w(4), wp(4);
    for (auto* vec : {&mq, &w, &wp}) {
      for (auto& e : *vec) e = 2 * z(gen);
    }
    const double gamma = u(gen), sq2 = u(gen);
    const GaussianPrior P{w, gamma}, Pp{wp, gamma};
    const double lhs = testutil::gaussian_kl_general(mq, sq2, w, 1 / gamma) -
                       testutil::gaussian_kl_general(mq, sq2, wp, 1 / gamma);
    CHECK(std::abs(lhs - lemma2_closed_form(mq, P, Pp)) <= 1e-9);
  }

  // Monte Carlo version at n = 1e5
  const std::vector<double> mq{0.5, 0.5, 0.5};
  const auto q = testutil::gaussian_samples(mq, 0.7, 100000, 44);
  const auto mc = lemma2_residual(q, p, pp);
  CHECK(std::abs(mc.mean - lemma2_closed_form(mq, p, pp)) < 3 * mc.std_error);
}

TEST_CASE("displacement inequality for shifted Gaussian priors") {
  const std::vector<double> w{1.0, 2.0};
  const auto q0 = testutil::gaussian_samples({0.0, 0.0}, 1.0, 1000, 3);
  const auto same = lemma3_check(w, w, 2.0, q0);
  CHECK(same.lhs == 0.0);
  CHECK(same.rhs == 0.0);

  std::mt19937_64 gen(13);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.2, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> mq(5), wv(5), wp(5);
    for (auto* vec : {&mq, &wv, &wp}) {
      for (auto& e : *vec) e = z(gen);
    }
    const double gamma = u(gen);
    const auto q = testutil::gaussian_samples(mq, u(gen), trial == 0 ? 100000 : 4000, 1000 + trial);
    const auto chk = lemma3_check(wv, wp, gamma, q);
    CHECK(chk.lhs <= chk.rhs + 3 * chk.lhs_se);
  }
}

TEST_CASE("expected prior-scaled norm under a Gibbs posterior (p = 1)") {
  const auto& draw = testutil::gibbs_rejection_draws;
  {
    const GibbsConfig g{0.0, 4.0, GaussianPrior{{0.3}, 2.0}};
    const auto chk = lemma4_check(g, draw(0.3, 2.0, 0.0, 4.0, 1.0, 100000, 5));
    CHECK(chk.bound == Approx(std::sqrt(2 / std::numbers::pi)).epsilon(1e-15));
    CHECK(std::abs(chk.estimate - chk.bound) < 3 * chk.estimate_se);
  }
  {
    const GibbsConfig g{1.0, 4.0, GaussianPrior{{0.0}, 1.0}};
    const auto chk = lemma4_check(g, draw(0.0, 1.0, 1.0, 4.0, 2.0, 20000, 6));
    CHECK(std::abs(chk.bound - 3.62633) < 2e-5);
    CHECK(chk.estimate < chk.bound);
  }
  std::mt19937_64 gen(14);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double w0 = 2 * u(gen) - 1, gamma = 0.2 + 3 * u(gen), tau = 3 * u(gen);
    const double range = 0.5 + 4 * u(gen), centre = 4 * u(gen) - 2;
    const GibbsConfig g{tau, range, GaussianPrior{{w0}, gamma}};
    const auto chk = lemma4_check(g, draw(w0, gamma, tau, range, centre, 2000, 2000 + trial));
    CHECK(chk.estimate <= chk.bound + 3 * chk.estimate_se);
  }
  CHECK(gibbs_expected_norm_bound(2.0, 4.0) > gibbs_expected_norm_bound(1.0, 4.0));
}

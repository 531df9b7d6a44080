// Acceptance run: one PASS/FAIL line per primary criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "dpbayes/bounds.hpp"
#include "dpbayes/harness.hpp"
#include "dpbayes/model.hpp"
#include "dpbayes/priors_gibbs.hpp"
#include "dpbayes/sgld.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace dpb;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel_err(double got, double want) {
  if (got == want) return 0.0;
  return std::abs(got - want) / std::max(std::abs(want), 1e-9);
}

// ---------------------------------------------------------------------------

Outcome formula_oracles() {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::map<std::string, double> worst;
  const auto track = [&](const char* name, double e) { worst[name] = std::max(worst[name], e); };

  for (int i = 0; i < 2000; ++i) {
    const double q = u(gen), p = 1e-6 + (1 - 2e-6) * u(gen);
    track("kl_bin", rel_err(kl_bin(q, p), oracle::kl50(q, p)));
  }
  for (double q : {0.0, 1.0}) {
    for (double p : {0.1, 0.5, 0.9}) track("kl_bin", rel_err(kl_bin(q, p), oracle::kl50(q, p)));
  }

  // Grid scan at step 1e-6: the exact inverse lies in [g, g + 1e-6].
  double inv_err = 0;
  for (int i = 0; i < 200; ++i) {
    const double q = i < 20 ? 0.0 : 0.95 * u(gen);
    const double c = std::exp(std::log(1e-4) + u(gen) * std::log(2.0 / 1e-4));
    const double got = kl_inverse(q, c);
    const double g = oracle::kl_inverse_grid(q, c, 1e-6);
    const double e = got < g - 1e-12 ? 1.0 : std::max(0.0, got - g - 1e-6);
    inv_err = std::max(inv_err, e);
  }
  track("kl_inverse", inv_err);

  for (int i = 0; i < 500; ++i) {
    const std::int64_t m = 1 + static_cast<std::int64_t>(u(gen) * 100000);
    const double delta = 1e-4 + 0.5 * u(gen);
    const double beta = delta * (0.01 + 0.98 * u(gen));
    const double kl = 50 * u(gen);
    const double eps = 2 * u(gen);
    const double tau = 1e4 * u(gen);
    track("maurer_bound", rel_err(maurer_bound(kl, m, delta), oracle::maurer50(kl, m, delta)));
    track("lever_bound", rel_err(lever_bound(tau, m, delta, LeverVariant::Conventional),
                                 oracle::lever50(tau, m, delta, false)));
    track("lever_bound", rel_err(lever_bound(tau, m, delta, LeverVariant::AsDisplayed),
                                 oracle::lever50(tau, m, delta, true)));
    track("dp_pacbayes_rhs", rel_err(dp_pacbayes_rhs(kl, BoundParams{m, delta, beta, eps}),
                                     oracle::dp_rhs50(kl, m, delta, beta, eps)));
    track("max_info_approx",
          rel_err(max_info_approx(eps, m, beta), oracle::max_info_approx50(eps, m, beta)));
    const oracle::Hp want = oracle::Hp(2) * oracle::Hp(tau) * oracle::Hp(4.0) / oracle::Hp(m);
    track("gibbs_sample_privacy",
          rel_err(gibbs_sample_privacy(tau, 4.0, m).epsilon, static_cast<double>(want)));
  }

  bool ok = true;
  std::string d;
  for (const auto& [k, v] : worst) {
    ok = ok && v <= 1e-6;
    d += fmt("%s=%.1e ", k.c_str(), v);
  }
  return {ok, "max rel err (tol 1e-6): " + d};
}

Outcome worked_numbers() {
  const double rhs = dp_pacbayes_rhs(0.0, BoundParams{50, 0.05, 0.025, 0.16});
  const double eps = gibbs_sample_privacy(1e3, 4.0, 50000).epsilon;
  const double half_sq = eps * eps / 2;
  const double per_sample = max_info_approx(eps, 50000, 0.025) / 50000;
  const bool ok = std::abs(rhs - 0.173048) <= 1e-5 && std::abs(eps - 0.16) <= 1e-12 &&
                  std::abs(half_sq - 0.0128) <= 1e-12;
  return {ok, fmt("rhs=%.7f (0.173048 +- 1e-5), eps=%.6g, eps^2/2=%.6g, "
                  "max-info/m=%.5f",
                  rhs, eps, half_sq, per_sample)};
}

Outcome gradient_check() {
  double worst = 0;
  int k = 0;
  for (std::size_t hidden : {8u, 100u}) {
    MlpArchitecture a{{4, hidden, 2}};
    for (int rep = 0; rep < 3; ++rep, ++k) {
      const auto data = testutil::random_dataset(5, 4, 2, 700 + k);
      Rng rng(800 + k);
      worst = std::max(worst, testutil::fd_relative_error(a, data, init_params(a, rng)));
    }
  }
  return {worst < 1e-5, fmt("4-8-2 and 4-100-2, 3 inits each: max rel err %.2e (tol 1e-5)", worst)};
}

Outcome sgld_stationarity() {
  bool ok = true;
  std::string d;
  for (const auto [tau, eta] : {std::pair{1.0, 0.1}, std::pair{4.0, 0.125}}) {
    const double want = oracle::quadratic_chain_variance(tau, eta);
    const double got = testutil::quadratic_chain_empirical_variance(tau, eta, 1000000, 1234);
    const double r = got / want - 1;
    ok = ok && std::abs(r) < 0.05;
    d += fmt("quad(tau=%g,eta=%g) var dev %+.2f%%; ", tau, eta, 100 * r);
  }
  {
    // small-step regime, reported only: 1e6 steps hold ~500 effective samples here
    const double want = oracle::quadratic_chain_variance(1.0, 1e-3);
    const double got = testutil::quadratic_chain_empirical_variance(1.0, 1e-3, 1000000, 1235);
    d += fmt("[info eta*tau=1e-3: %+.1f%%] ", 100 * (got / want - 1));
  }
  const std::vector<double> w0{0.5, -1.0, 2.0};
  const double gamma = 2.0, eta = 0.05;
  std::vector<double> w(w0.size(), 0.0), scratch(w0.size());
  Rng rng(23);
  const RiskGradientFn zero = [](std::span<const double>, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
  };
  const EnergySpec energy{0.0, Anchor{w0, gamma}};
  for (int i = 0; i < 5000; ++i) sgld_step(w, energy, zero, eta, rng, scratch);
  const std::size_t n = 100000;
  std::vector<std::vector<double>> trace(w0.size(), std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    sgld_step(w, energy, zero, eta, rng, scratch);
    for (std::size_t k = 0; k < w0.size(); ++k) trace[k][i] = w[k];
  }
  const double var_want = oracle::quadratic_chain_variance(gamma, eta);
  double worst_z = 0, worst_v = 0;
  for (std::size_t k = 0; k < w0.size(); ++k) {
    const auto st = testutil::series_stats(trace[k]);
    worst_z = std::max(worst_z, std::abs(st.mean - w0[k]) / st.mean_se);
    worst_v = std::max(worst_v, std::abs(st.var / var_want - 1));
  }
  ok = ok && worst_z < 3 && worst_v < 0.10;
  d += fmt("anchored: max |mean-w0|/SE %.2f (<3), max var dev %.1f%% (<10%%)", worst_z, 100 * worst_v);
  return {ok, d};
}

Outcome logz_estimator() {
  // prior N(1, 1), R(w) = 0.5 w^2, tau = 10; -ln Z = 0.5 ln c + tau a mu^2 / c, c = 1 + 2 tau a / gamma
  const double mu = 1.0, gamma = 1.0, a = 0.5, tau = 10.0;
  const double c = 1 + 2 * tau * a / gamma;
  const double truth = 0.5 * std::log(c) + tau * a * mu * mu / c;
  const GibbsConfig g{tau, 4.0, GaussianPrior{{mu}, gamma}};
  const RiskFn risk = [&](std::span<const double> w) { return a * w[0] * w[0]; };
  Rng rng(77);
  const int reps = 1000;
  const std::size_t n = 1000;
  int above = 0, not_far_below = 0, in_band = 0;
  for (int r = 0; r < reps; ++r) {
    Rng replay = rng;
    const auto est = logz_upper_mc(g, risk, n, rng);
    const auto risks = prior_risk_samples(*g.base, risk, n, replay);
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = std::exp(-tau * risks[i]);
    const auto m = mc_mean(z);
    const double se = m.std_error / m.mean;
    above += est.logz_upper >= truth;
    not_far_below += est.logz_upper >= truth - 0.5;
    in_band += std::abs(est.logz_upper - truth) <= 3 * se;
  }
  const double f_slack = double(not_far_below) / reps, f_band = double(in_band) / reps;
  const bool ok = f_slack >= 0.95 && f_band >= 0.95;
  return {ok, fmt("1e3 reps, n=1e3: not below truth-0.5 in %.1f%% (>=95%%), within 3 SE in %.1f%% "
                  "(>=95%%); [info strictly above truth %.1f%%]",
                  100 * f_slack, 100 * f_band, 100.0 * above / reps)};
}

Outcome lemma_suite() {
  std::mt19937_64 gen(31);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.0, 1.0);

  double l2_err = 0;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> mq(4), w(4), wp(4);
    for (auto* v : {&mq, &w, &wp}) {
      for (auto& e : *v) e = 2 * z(gen);
    }
    const double gam = 0.2 + 3 * u(gen), sq2 = 0.2 + 3 * u(gen);
    const double lhs = testutil::gaussian_kl_general(mq, sq2, w, 1 / gam) -
                       testutil::gaussian_kl_general(mq, sq2, wp, 1 / gam);
    l2_err = std::max(l2_err, std::abs(lhs - lemma2_closed_form(mq, GaussianPrior{w, gam},
                                                                GaussianPrior{wp, gam})));
  }

  int l3_fail = 0;
  double l3_min_gap = INFINITY;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> mq(5), w(5), wp(5);
    for (auto* v : {&mq, &w, &wp}) {
      for (auto& e : *v) e = z(gen);
    }
    const double gam = 0.2 + 3 * u(gen);
    const auto q = testutil::gaussian_samples(mq, 0.2 + 3 * u(gen), 10000, 5000 + t);
    const auto chk = lemma3_check(w, wp, gam, q);
    l3_fail += chk.lhs > chk.rhs + 3 * chk.lhs_se;
    l3_min_gap = std::min(l3_min_gap, chk.rhs - chk.lhs);
  }

  int l4_fail = 0;
  double l4_worst = -INFINITY;
  for (int t = 0; t < 100; ++t) {
    const double w0 = 2 * u(gen) - 1, gam = 0.2 + 3 * u(gen), tau = 3 * u(gen);
    const double range = 0.5 + 4 * u(gen), centre = 4 * u(gen) - 2;
    const GibbsConfig gc{tau, range, GaussianPrior{{w0}, gam}};
    const auto chk = lemma4_check(
        gc, testutil::gibbs_rejection_draws(w0, gam, tau, range, centre, 5000, 9000 + t));
    l4_fail += chk.estimate > chk.bound + 3 * chk.estimate_se;
    l4_worst = std::max(l4_worst, chk.estimate / chk.bound);
  }
  const bool ok = l2_err <= 1e-9 && l3_fail == 0 && l4_fail == 0;
  return {ok, fmt("lemma2 closed-form max err %.1e (tol 1e-9); lemma3 violations %d/100 "
                  "(min rhs-lhs %.3f); lemma4 violations %d/100 (max est/bound %.3f)",
                  l2_err, l3_fail, l3_min_gap, l4_fail, l4_worst)};
}

// ---------------------------------------------------------------------------

std::vector<double> log_grid(double lo_exp, double hi_exp, int per_decade) {
  std::vector<double> g;
  const int n = static_cast<int>(std::lround((hi_exp - lo_exp) * per_decade));
  for (int i = 0; i <= n; ++i) g.push_back(std::pow(10.0, lo_exp + double(i) / per_decade));
  return g;
}

std::vector<std::uint64_t> seed_list(int n) {
  std::vector<std::uint64_t> s;
  for (int i = 1; i <= n; ++i) s.push_back(i);
  return s;
}

struct Means {
  double train = 0, test = 0, lever = 0, dp = 0;
  int n = 0;
};

std::map<double, Means> seed_means(const std::vector<BoundReport>& rows) {
  std::map<double, Means> out;
  for (const auto& r : rows) {
    if (r.failed()) continue;
    auto& m = out[r.tau2];
    m.train += r.train_err01;
    m.test += r.test_err01;
    m.lever += r.risk_bound_lever;
    m.dp += r.has_dp() ? r.risk_bound_dp : 0.0;
    ++m.n;
  }
  for (auto& [t, m] : out) {
    m.train /= m.n;
    m.test /= m.n;
    m.lever /= m.n;
    m.dp /= m.n;
  }
  return out;
}

constexpr int kSeeds = 10;

struct OneStageRuns {
  std::vector<BoundReport> true_rows, random_rows;
  std::size_t failures = 0;
};

OneStageRuns one_stage_sweeps() {
  OneStageRuns out;
  for (auto mode : {LabelMode::True, LabelMode::Random}) {
    auto c = ExperimentConfig::defaults_for(DatasetKind::Synth);
    c.procedure = Procedure::OneStage;
    c.dataset.label_mode = mode;
    c.taus = log_grid(0, 4, 2);
    c.seeds = seed_list(kSeeds);
    const auto res = run_experiment(c);
    out.failures += res.failures;
    (mode == LabelMode::True ? out.true_rows : out.random_rows) = res.reports;
  }
  return out;
}

Outcome bound_validity(const OneStageRuns& runs) {
  int violations = 0, rows = 0;
  for (const auto* set : {&runs.true_rows, &runs.random_rows}) {
    for (const auto& r : *set) {
      if (r.failed()) continue;
      ++rows;
      violations += r.test_err01 > r.risk_bound_lever;
    }
  }
  const bool ok = violations == 0 && runs.failures == 0 && rows > 0;
  return {ok, fmt("one-stage SYNTH, tau in 10^0..10^4 (half-decade), true+random labels, %d seeds, "
                  "T=1000, m=50: %d rows, %d violations, %zu failed runs",
                  kSeeds, rows, violations, runs.failures)};
}

Outcome phase_transition(const OneStageRuns& runs) {
  const double m = 50;
  bool ok = true;
  std::string d = "random-label seed-mean gap:";
  for (const auto& [tau, mm] : seed_means(runs.random_rows)) {
    const double gap = mm.test - mm.train;
    d += fmt(" %g:%.3f", tau, gap);
    if (tau >= 10 * m && !(gap > 0.3)) ok = false;
    if (tau <= m / 10 && !(gap < 0.1)) ok = false;
  }
  return {ok, d + " (need >0.3 for tau>=500, <0.1 for tau<=5)"};
}

Outcome dp_vs_lever() {
  auto c = ExperimentConfig::defaults_for(DatasetKind::Synth);
  c.procedure = Procedure::TwoStage;
  c.tau1 = 1;
  c.gamma = 2;
  c.T1 = 100;
  c.T2 = 1000;
  c.tau2s = log_grid(1, 4, 4);
  c.seeds = seed_list(kSeeds);
  const auto res = run_experiment(c);
  std::map<double, int> violations;
  for (const auto& r : res.reports) {
    if (!r.failed()) violations[r.tau2] += r.test_err01 > r.risk_bound_dp;
  }
  std::string d = "two-stage tau1=1 gamma=2 T1=100 T2=1000, seed means (lever/dp):";
  std::vector<double> hits;
  int total_viol = 0;
  for (const auto& [tau, mm] : seed_means(res.reports)) {
    d += fmt(" %g:%.3f/%.3f", tau, mm.lever, mm.dp);
    total_viol += violations[tau];
    if (mm.lever >= 0.999 && mm.dp < 0.9 && violations[tau] == 0) hits.push_back(tau);
  }
  std::string h;
  for (double t : hits) h += fmt("%g ", t);
  d += fmt("; separating tau2: %s; dp violations %d; failed runs %zu", hits.empty() ? "none" : h.c_str(),
           total_viol, res.failures);
  return {!hits.empty() && res.failures == 0, d};
}

}  // namespace

int main() {
  int failed = 0;
  const auto run = [&](const char* name, const std::function<Outcome()>& f) {
    const auto t0 = std::chrono::steady_clock::now();
    const Outcome o = f();
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s  %-26s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), s);
    std::fflush(stdout);
    failed += !o.pass;
  };

  run("formula-oracles", formula_oracles);
  run("worked-numbers", worked_numbers);
  run("gradient-fd", gradient_check);
  run("sgld-stationarity", sgld_stationarity);
  run("logz-estimator", logz_estimator);
  run("lemma-suite", lemma_suite);

  OneStageRuns runs;
  run("synth-bound-validity", [&] {
    runs = one_stage_sweeps();
    return bound_validity(runs);
  });
  run("phase-transition", [&] { return phase_transition(runs); });
  run("dp-vs-lever-separation", dp_vs_lever);

  std::printf("%d of 9 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}

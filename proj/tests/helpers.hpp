#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "dpbayes/data.hpp"
#include "dpbayes/model.hpp"
#include "dpbayes/sgld.hpp"
#include "oracles.hpp"

namespace testutil {

// n examples in dimension d with N(0,1) inputs and uniform labels in {1..K}.
inline dpb::Dataset random_dataset(std::size_t n, std::size_t d, int K, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z;
  std::uniform_int_distribution<int> lab(1, K);
  std::vector<double> x(n * d);
  for (auto& v : x) v = z(gen);
  std::vector<int> y(n);
  for (auto& v : y) v = lab(gen);
  return dpb::Dataset(std::move(x), std::move(y), d, K);
}

inline std::vector<double> random_vector(std::size_t n, double scale, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(0.0, scale);
  std::vector<double> v(n);
  for (auto& e : v) e = z(gen);
  return v;
}

// Max over components of |g - fd| / max(|g|, |fd|, 1e-6), with fd the central
// difference of an independent long-double loss.
inline double fd_relative_error(const dpb::MlpArchitecture& arch, const dpb::Dataset& data,
                                std::vector<double> params) {
  std::vector<std::size_t> batch(data.size());
  std::iota(batch.begin(), batch.end(), 0);
  dpb::MlpEvaluator ev(arch);
  std::vector<double> g(params.size());
  ev.gradient(params, data, batch, g);
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const long double up = oracle::mean_bounded_xent_ld(arch.layer_sizes, params, data);
    params[i] = keep - h;
    const long double dn = oracle::mean_bounded_xent_ld(arch.layer_sizes, params, data);
    params[i] = keep;
    const double fd = static_cast<double>((up - dn) / (2 * h));
    const double denom = std::max({std::abs(g[i]), std::abs(fd), 1e-6});
    worst = std::max(worst, std::abs(g[i] - fd) / denom);
  }
  return worst;
}

// Variance of a stationary scalar series and the standard error of its mean
// from non-overlapping batch means.
struct SeriesStats {
  double mean = 0, var = 0, mean_se = 0;
};

inline SeriesStats series_stats(const std::vector<double>& xs, std::size_t batches = 100) {
  SeriesStats s;
  const std::size_t n = xs.size();
  long double m = 0;
  for (double x : xs) m += x;
  m /= n;
  long double v = 0;
  for (double x : xs) v += (x - m) * (x - m);
  s.mean = static_cast<double>(m);
  s.var = static_cast<double>(v / (n - 1));
  const std::size_t len = n / batches;
  long double bv = 0;
  for (std::size_t b = 0; b < batches; ++b) {
    long double bm = 0;
    for (std::size_t i = b * len; i < (b + 1) * len; ++i) bm += xs[i];
    bm /= len;
    bv += (bm - m) * (bm - m);
  }
  s.mean_se = static_cast<double>(std::sqrt(bv / (batches - 1) / batches));
  return s;
}

// Stationary variance of the scalar chain for U = k w^2 / 2 after `steps` steps.
inline double quadratic_chain_empirical_variance(double k, double eta, std::size_t steps,
                                                 std::uint64_t seed) {
  std::vector<double> w{0.0}, scratch(1);
  dpb::Rng rng(seed);
  const dpb::RiskGradientFn grad = [](std::span<const double> x, std::span<double> out) {
    out[0] = x[0];
  };
  const dpb::EnergySpec energy{k, std::nullopt};
  const std::size_t burn = 10000;
  for (std::size_t i = 0; i < burn; ++i) dpb::sgld_step(w, energy, grad, eta, rng, scratch);
  long double s = 0, s2 = 0;
  for (std::size_t i = 0; i < steps; ++i) {
    dpb::sgld_step(w, energy, grad, eta, rng, scratch);
    s += w[0];
    s2 += static_cast<long double>(w[0]) * w[0];
  }
  const long double mean = s / steps;
  return static_cast<double>(s2 / steps - mean * mean);
}

// KL(N(mq, sq2 I) || N(mp, sp2 I)) in dimension p.
inline double gaussian_kl_general(const std::vector<double>& mq, double sq2,
                                  const std::vector<double>& mp, double sp2) {
  const double p = static_cast<double>(mq.size());
  double d2 = 0;
  for (std::size_t i = 0; i < mq.size(); ++i) d2 += (mq[i] - mp[i]) * (mq[i] - mp[i]);
  return 0.5 * (p * sq2 / sp2 + d2 / sp2 - p + p * std::log(sp2 / sq2));
}

inline std::vector<std::vector<double>> gaussian_samples(const std::vector<double>& mean, double sd,
                                                         std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z;
  std::vector<std::vector<double>> out(n, std::vector<double>(mean.size()));
  for (auto& v : out) {
    for (std::size_t i = 0; i < mean.size(); ++i) v[i] = mean[i] + sd * z(gen);
  }
  return out;
}

// Exact 1-d Gibbs posterior draws by rejection: propose v ~ N(w0, 1/gamma) and
// accept with probability exp(-tau R(v)), R(v) = range (1 - exp(-(v - centre)^2)) in [0, range].
inline std::vector<std::vector<double>> gibbs_rejection_draws(double w0, double gamma, double tau,
                                                              double range, double centre,
                                                              std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u;
  std::vector<std::vector<double>> out;
  while (out.size() < n) {
    const double v = w0 + z(gen) / std::sqrt(gamma);
    const double r = range * (1 - std::exp(-(v - centre) * (v - centre)));
    if (u(gen) < std::exp(-tau * r)) out.push_back({v});
  }
  return out;
}

}  // namespace testutil

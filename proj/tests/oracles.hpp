#pragma once

// Reference implementations used only by the tests. They are written
// independently of the library: high-precision arithmetic, brute-force grid
// scans and naive loops, so agreement with the production code is evidence
// rather than tautology.

#include <boost/multiprecision/cpp_dec_float.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace oracle {

using Hp = boost::multiprecision::cpp_dec_float_50;

inline Hp hp_kl(const Hp& q, const Hp& p) {
  using boost::multiprecision::log;
  Hp out = 0;
  if (q > 0) out += q * log(q / p);
  if (q < 1) out += (1 - q) * log((1 - q) / (1 - p));
  return out;
}

inline double kl50(double q, double p) { return static_cast<double>(hp_kl(Hp(q), Hp(p))); }

inline double maurer50(double kl, std::int64_t m, double delta) {
  using boost::multiprecision::log;
  using boost::multiprecision::sqrt;
  const Hp M(m);
  return static_cast<double>((Hp(kl) + log(2 * sqrt(M) / Hp(delta))) / M);
}

inline double lever50(double tau, std::int64_t m, double delta, bool as_displayed) {
  using boost::multiprecision::log;
  using boost::multiprecision::sqrt;
  const Hp M(m), T(tau);
  const Hp L = log(2 * sqrt(M) / Hp(delta));
  if (as_displayed) return static_cast<double>(T * sqrt(2 * L / M + T * T / (2 * M) + L) / M);
  return static_cast<double>((T * sqrt(2 * L / M) + T * T / (2 * M) + L) / M);
}

inline Hp hp_max_info_approx(double eps, std::int64_t m, double beta) {
  using boost::multiprecision::log;
  using boost::multiprecision::sqrt;
  const Hp E(eps), M(m);
  return E * E * M / 2 + E * sqrt(M * log(2 / Hp(beta)) / 2);
}

inline double max_info_approx50(double eps, std::int64_t m, double beta) {
  return static_cast<double>(hp_max_info_approx(eps, m, beta));
}

inline double dp_rhs50(double kl, std::int64_t m, double delta, double beta, double eps) {
  using boost::multiprecision::log;
  using boost::multiprecision::sqrt;
  const Hp M(m);
  const Hp first = (Hp(kl) + log(2 * sqrt(M) / (Hp(delta) - Hp(beta)))) / M;
  return static_cast<double>(first + hp_max_info_approx(eps, m, beta) / M);
}

// Plain long-double binary KL.
inline long double kl_ld(long double q, long double p) {
  long double out = 0;
  if (q > 0) {
    if (p <= 0) return INFINITY;
    out += q * std::log(q / p);
  }
  if (q < 1) {
    if (p >= 1) return INFINITY;
    out += (1 - q) * std::log((1 - q) / (1 - p));
  }
  return out;
}

// Largest grid point p = k * step, p >= q, with kl(q||p) <= c. The answer of
// the exact inverse lies in [result, result + step].
inline double kl_inverse_grid(double q, double c, double step = 1e-7) {
  const auto n = static_cast<std::int64_t>(std::llround(1.0 / step));
  auto k = static_cast<std::int64_t>(std::ceil(q / step - 1e-9));
  double best = q;
  for (; k <= n; ++k) {
    const long double p = static_cast<long double>(k) / n;
    if (p < q) continue;
    if (kl_ld(q, p) <= c) {
      best = static_cast<double>(p);
    } else {
      break;  // kl(q||.) is increasing on [q, 1]
    }
  }
  return best;
}

// Minimum of the private-prior right side over an evenly spaced beta grid in (0, delta).
inline double dp_rhs_grid_min(double kl, std::int64_t m, double delta, double eps,
                              std::int64_t points = 1000000) {
  double best = INFINITY;
  for (std::int64_t i = 1; i <= points; ++i) {
    const long double beta = static_cast<long double>(delta) * i / (points + 1);
    const long double L = std::log(2 * std::sqrt(static_cast<long double>(m)) / (delta - beta));
    const long double mi = static_cast<long double>(eps) * eps * m / 2 +
                           eps * std::sqrt(m * std::log(2 / beta) / 2);
    const long double v = (kl + L) / m + mi / m;
    if (v < best) best = static_cast<double>(v);
  }
  return best;
}

// Exact discretised-chain stationary variance of w <- w - (eta/2) k w + sqrt(eta) xi.
inline double quadratic_chain_variance(double k, double eta) {
  const double a = 1.0 - eta * k / 2.0;
  return eta / (1.0 - a * a);  // = 1 / (k (1 - eta k / 4))
}

// Straightforward per-layer MLP evaluation (ReLU hidden layers, softmax output).
// Parameter layout: for each layer, W (n_out x n_in, row-major) then b.
inline std::vector<long double> mlp_probs_ld(const std::vector<std::size_t>& sizes,
                                             const std::vector<double>& params,
                                             const std::vector<double>& x) {
  std::vector<long double> a(x.begin(), x.end());
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const std::size_t nin = sizes[l], nout = sizes[l + 1];
    std::vector<long double> z(nout);
    for (std::size_t o = 0; o < nout; ++o) {
      long double s = params[off + nin * nout + o];
      for (std::size_t i = 0; i < nin; ++i) s += params[off + o * nin + i] * a[i];
      z[o] = s;
    }
    off += nin * nout + nout;
    if (l + 2 < sizes.size()) {
      for (auto& v : z) v = v > 0 ? v : 0;
    }
    a = z;
  }
  long double mx = a[0];
  for (auto v : a) mx = v > mx ? v : mx;
  long double s = 0;
  for (auto& v : a) {
    v = std::exp(v - mx);
    s += v;
  }
  for (auto& v : a) v /= s;
  return a;
}

inline std::vector<double> mlp_probs(const std::vector<std::size_t>& sizes,
                                     const std::vector<double>& params,
                                     const std::vector<double>& x) {
  const auto p = mlp_probs_ld(sizes, params, x);
  return {p.begin(), p.end()};
}

// Mean bounded cross entropy over all examples, evaluated in long double.
template <typename Data>
long double mean_bounded_xent_ld(const std::vector<std::size_t>& sizes,
                                 const std::vector<double>& params, const Data& data,
                                 long double l_max = 4.0L) {
  const long double f = std::exp(-l_max);
  long double acc = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::vector<double> xi(data.input(i).begin(), data.input(i).end());
    const auto p = mlp_probs_ld(sizes, params, xi);
    acc += -std::log(f + (1 - 2 * f) * p[data.label(i) - 1]);
  }
  return acc / data.size();
}

inline double bounded_xent_ref(double p_y, double l_max = 4.0) {
  const double f = std::exp(-l_max);
  return -std::log(f + (1 - 2 * f) * p_y);
}

}  // namespace oracle

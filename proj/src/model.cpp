#include "dpbayes/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dpbayes/errors.hpp"
#include "dpbayes/numeric.hpp"

namespace dpb {

void MlpArchitecture::validate() const {
  if (layer_sizes.size() < 2) throw ConfigError("architecture needs at least two layers");
  for (std::size_t n : layer_sizes) {
    if (n == 0) throw ConfigError("layer sizes must be positive");
  }
  if (num_classes() < 2) throw ConfigError("output layer needs at least two classes");
}

std::size_t MlpArchitecture::param_count() const {
  std::size_t p = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    p += (layer_sizes[l] + 1) * layer_sizes[l + 1];
  }
  return p;
}

double BoundedXentConfig::floor() const { return std::exp(-l_max); }

double BoundedXentConfig::slope() const { return 1.0 - 2.0 * std::exp(-l_max); }

MlpEvaluator::MlpEvaluator(MlpArchitecture arch, BoundedXentConfig loss)
    : arch_(std::move(arch)), loss_(loss) {
  arch_.validate();
  if (!(loss_.l_max > 0.0) || !std::isfinite(loss_.l_max)) {
    throw ConfigError("l_max must be positive");
  }
  const std::size_t L = arch_.num_layers();
  offsets_.resize(L);
  std::size_t off = 0;
  for (std::size_t l = 0; l < L; ++l) {
    offsets_[l] = off;
    off += (arch_.layer_sizes[l] + 1) * arch_.layer_sizes[l + 1];
  }
  act_.resize(L + 1);
  delta_.resize(L + 1);
  for (std::size_t l = 0; l <= L; ++l) {
    act_[l].resize(arch_.layer_sizes[l]);
    delta_[l].resize(arch_.layer_sizes[l]);
  }
  probs_.resize(arch_.num_classes());
}

void MlpEvaluator::check_params(std::span<const double> params) const {
  if (params.size() != arch_.param_count()) {
    throw DomainError("parameter vector has length " + std::to_string(params.size()) +
                      ", architecture needs " + std::to_string(arch_.param_count()));
  }
}

void MlpEvaluator::run_forward(std::span<const double> params, std::span<const double> x) {
  if (x.size() != arch_.input_dim()) {
    throw DomainError("input has dimension " + std::to_string(x.size()) + ", expected " +
                      std::to_string(arch_.input_dim()));
  }
  std::copy(x.begin(), x.end(), act_[0].begin());
  const std::size_t L = arch_.num_layers();
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t n_in = arch_.layer_sizes[l];
    const std::size_t n_out = arch_.layer_sizes[l + 1];
    const double* W = params.data() + offsets_[l];
    const double* b = W + n_in * n_out;
    const double* a = act_[l].data();
    double* z = act_[l + 1].data();
    const bool hidden = l + 1 < L;
    for (std::size_t o = 0; o < n_out; ++o) {
      const double* row = W + o * n_in;
      double s = b[o];
      for (std::size_t i = 0; i < n_in; ++i) s += row[i] * a[i];
      z[o] = hidden ? std::max(s, 0.0) : s;
    }
  }
  // Stable softmax over the output logits.
  const auto& logits = act_[L];
  const double mx = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    probs_[k] = std::exp(logits[k] - mx);
    total += probs_[k];
  }
  for (double& p : probs_) p /= total;
}

std::span<const double> MlpEvaluator::probabilities(std::span<const double> params,
                                                    std::span<const double> x) {
  check_params(params);
  run_forward(params, x);
  return probs_;
}

double MlpEvaluator::bounded_xent(std::span<const double> params, std::span<const double> x,
                                  int label) {
  if (label < 1 || static_cast<std::size_t>(label) > arch_.num_classes()) {
    throw DomainError("label " + std::to_string(label) + " out of range");
  }
  const auto p = probabilities(params, x);
  return -std::log(loss_.floor() + loss_.slope() * p[static_cast<std::size_t>(label - 1)]);
}

int MlpEvaluator::error01(std::span<const double> params, std::span<const double> x, int label) {
  if (label < 1 || static_cast<std::size_t>(label) > arch_.num_classes()) {
    throw DomainError("label " + std::to_string(label) + " out of range");
  }
  return argmax_label(probabilities(params, x)) == label ? 0 : 1;
}

EmpiricalRisks MlpEvaluator::empirical_risks(std::span<const double> params,
                                             const Dataset& data) {
  check_params(params);
  const std::size_t n = data.size();
  per_example_.resize(n);
  per_example_err_.resize(n);
  const double floor = loss_.floor();
  const double slope = loss_.slope();
  for (std::size_t i = 0; i < n; ++i) {
    run_forward(params, data.input(i));
    const int y = data.label(i);
    per_example_[i] = -std::log(floor + slope * probs_[static_cast<std::size_t>(y - 1)]);
    per_example_err_[i] = argmax_label(probs_) == y ? 0.0 : 1.0;
  }
  return {mean(per_example_err_), mean(per_example_)};
}

double MlpEvaluator::surrogate_risk(std::span<const double> params, const Dataset& data) {
  return empirical_risks(params, data).xent;
}

void MlpEvaluator::gradient(std::span<const double> params, const Dataset& data,
                            std::span<const std::size_t> batch, std::span<double> grad) {
  check_params(params);
  if (grad.size() != params.size()) throw DomainError("gradient buffer has the wrong length");
  if (batch.empty()) throw DomainError("minibatch must be nonempty");
  std::fill(grad.begin(), grad.end(), 0.0);

  const std::size_t L = arch_.num_layers();
  const double floor = loss_.floor();
  const double slope = loss_.slope();
  for (std::size_t idx : batch) {
    run_forward(params, data.input(idx));
    const auto y = static_cast<std::size_t>(data.label(idx) - 1);
    // d(-ln psi(p_y)) / d z_k = -(slope p_y / psi) (1[k=y] - p_k)
    const double py = probs_[y];
    const double coef = slope * py / (floor + slope * py);
    auto& dout = delta_[L];
    for (std::size_t k = 0; k < dout.size(); ++k) {
      dout[k] = coef * (probs_[k] - (k == y ? 1.0 : 0.0));
    }
    for (std::size_t l = L; l-- > 0;) {
      const std::size_t n_in = arch_.layer_sizes[l];
      const std::size_t n_out = arch_.layer_sizes[l + 1];
      const double* W = params.data() + offsets_[l];
      double* gW = grad.data() + offsets_[l];
      double* gb = gW + n_in * n_out;
      const double* a = act_[l].data();
      const double* d = delta_[l + 1].data();
      for (std::size_t o = 0; o < n_out; ++o) {
        double* grow = gW + o * n_in;
        const double dv = d[o];
        for (std::size_t i = 0; i < n_in; ++i) grow[i] += dv * a[i];
        gb[o] += dv;
      }
      if (l == 0) break;
      double* dprev = delta_[l].data();
      std::fill(dprev, dprev + n_in, 0.0);
      for (std::size_t o = 0; o < n_out; ++o) {
        const double* row = W + o * n_in;
        const double dv = d[o];
        for (std::size_t i = 0; i < n_in; ++i) dprev[i] += row[i] * dv;
      }
      // ReLU derivative; the stored activation is max(z, 0).
      for (std::size_t i = 0; i < n_in; ++i) {
        if (a[i] <= 0.0) dprev[i] = 0.0;
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& g : grad) g *= inv;
}

WeightVector init_params(const MlpArchitecture& arch, Rng& rng) {
  arch.validate();
  WeightVector w(arch.param_count(), 0.0);
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < arch.layer_sizes.size(); ++l) {
    const std::size_t n_in = arch.layer_sizes[l];
    const std::size_t n_out = arch.layer_sizes[l + 1];
    const double sd = 1.0 / std::sqrt(static_cast<double>(n_in));
    for (std::size_t i = 0; i < n_in * n_out; ++i) w[off + i] = sd * rng.normal();
    off += (n_in + 1) * n_out;
  }
  return w;
}

std::vector<double> forward(const MlpArchitecture& arch, std::span<const double> params,
                            std::span<const double> x) {
  MlpEvaluator ev(arch);
  const auto p = ev.probabilities(params, x);
  return {p.begin(), p.end()};
}

double psi_remap(double p, const BoundedXentConfig& cfg) {
  if (!std::isfinite(p) || p < 0.0 || p > 1.0) throw DomainError("probability must lie in [0,1]");
  return cfg.floor() + cfg.slope() * p;
}

double bounded_xent(const MlpArchitecture& arch, std::span<const double> params,
                    std::span<const double> x, int label, const BoundedXentConfig& cfg) {
  MlpEvaluator ev(arch, cfg);
  return ev.bounded_xent(params, x, label);
}

int error01(const MlpArchitecture& arch, std::span<const double> params,
            std::span<const double> x, int label) {
  MlpEvaluator ev(arch);
  return ev.error01(params, x, label);
}

int argmax_label(std::span<const double> probs) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < probs.size(); ++k) {
    if (probs[k] > probs[best]) best = k;
  }
  return static_cast<int>(best) + 1;
}

WeightVector grad_bounded_xent(const MlpArchitecture& arch, std::span<const double> params,
                               const Dataset& data, std::span<const std::size_t> batch,
                               const BoundedXentConfig& cfg) {
  MlpEvaluator ev(arch, cfg);
  WeightVector g(params.size());
  ev.gradient(params, data, batch, g);
  return g;
}

EmpiricalRisks empirical_risks(const MlpArchitecture& arch, std::span<const double> params,
                               const Dataset& data, const BoundedXentConfig& cfg) {
  MlpEvaluator ev(arch, cfg);
  return ev.empirical_risks(params, data);
}

}  // namespace dpb

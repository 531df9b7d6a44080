#pragma once

// Fully-connected ReLU classifiers with softmax outputs, the bounded
// cross-entropy surrogate and exact backpropagation.
//
// Parameter layout (flat vector): for each layer in order, the n_out x n_in
// weight matrix in row-major order followed by the n_out biases.

#include <cstddef>
#include <span>
#include <vector>

#include "dpbayes/data.hpp"
#include "dpbayes/rng.hpp"

namespace dpb {

using WeightVector = std::vector<double>;

struct MlpArchitecture {
  // input, hidden..., output (= K classes)
  std::vector<std::size_t> layer_sizes;

  void validate() const;
  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t num_classes() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return layer_sizes.size() - 1; }
  // sum over layers of (n_in + 1) * n_out
  std::size_t param_count() const;

  bool operator==(const MlpArchitecture&) const = default;
};

struct BoundedXentConfig {
  double l_max = 4.0;

  // psi(p) = e^{-l_max} + (1 - 2 e^{-l_max}) p
  double floor() const;
  double slope() const;
  // Length of the interval containing the loss; used as the Gibbs sensitivity range.
  double range() const { return l_max; }
};

struct EmpiricalRisks {
  double err01 = 0.0;
  double xent = 0.0;
};

// Scratch buffers for repeated evaluation of one architecture. Not
// thread-safe; give each thread its own instance.
class MlpEvaluator {
public:
  explicit MlpEvaluator(MlpArchitecture arch, BoundedXentConfig loss = {});

  const MlpArchitecture& architecture() const noexcept { return arch_; }
  const BoundedXentConfig& loss_config() const noexcept { return loss_; }

  // Class probabilities; the span refers to an internal buffer valid until the next call.
  std::span<const double> probabilities(std::span<const double> params,
                                        std::span<const double> x);

  double bounded_xent(std::span<const double> params, std::span<const double> x, int label);
  int error01(std::span<const double> params, std::span<const double> x, int label);

  EmpiricalRisks empirical_risks(std::span<const double> params, const Dataset& data);
  double surrogate_risk(std::span<const double> params, const Dataset& data);

  // Gradient of the mean bounded cross entropy over `batch` (indices into data).
  void gradient(std::span<const double> params, const Dataset& data,
                std::span<const std::size_t> batch, std::span<double> grad);

private:
  void check_params(std::span<const double> params) const;
  void run_forward(std::span<const double> params, std::span<const double> x);

  MlpArchitecture arch_;
  BoundedXentConfig loss_;
  std::vector<std::size_t> offsets_;          // start of each layer's block in the flat vector
  std::vector<std::vector<double>> act_;      // activations per layer; act_[0] = input
  std::vector<std::vector<double>> delta_;    // backprop deltas per non-input layer
  std::vector<double> probs_;
  std::vector<double> per_example_;
  std::vector<double> per_example_err_;
};

/// Zero-mean Gaussian weights with standard deviation 1/sqrt(fan_in), zero biases.
WeightVector init_params(const MlpArchitecture& arch, Rng& rng);

std::vector<double> forward(const MlpArchitecture& arch, std::span<const double> params,
                            std::span<const double> x);

double psi_remap(double p, const BoundedXentConfig& cfg = {});

double bounded_xent(const MlpArchitecture& arch, std::span<const double> params,
                    std::span<const double> x, int label, const BoundedXentConfig& cfg = {});

/// 0 iff the label is the argmax of the probability vector; ties go to the lowest index.
int error01(const MlpArchitecture& arch, std::span<const double> params,
            std::span<const double> x, int label);

/// Index (1-based) of the largest entry; ties go to the lowest index.
int argmax_label(std::span<const double> probs);

WeightVector grad_bounded_xent(const MlpArchitecture& arch, std::span<const double> params,
                               const Dataset& data, std::span<const std::size_t> batch,
                               const BoundedXentConfig& cfg = {});

EmpiricalRisks empirical_risks(const MlpArchitecture& arch, std::span<const double> params,
                               const Dataset& data, const BoundedXentConfig& cfg = {});

}  // namespace dpb

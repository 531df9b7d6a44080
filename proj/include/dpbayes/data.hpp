#pragma once

// Datasets: the SYNTH generator, random-label variants, MNIST IDX ingestion,
// CSV persistence and seeded minibatch partitions.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dpb {

enum class Split { Train, Heldout };
enum class LabelMode { True, Random };

std::string to_string(Split s);
std::string to_string(LabelMode m);
LabelMode label_mode_from_string(const std::string& s);

// Row-major n x d inputs with labels in {1..K}. Immutable once built.
class Dataset {
public:
  Dataset() = default;
  Dataset(std::vector<double> inputs, std::vector<int> labels, std::size_t dim,
          int num_classes, Split split = Split::Train, LabelMode mode = LabelMode::True);

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  int num_classes() const noexcept { return num_classes_; }
  Split split() const noexcept { return split_; }
  LabelMode label_mode() const noexcept { return mode_; }

  std::span<const double> input(std::size_t i) const {
    return {inputs_.data() + i * dim_, dim_};
  }
  int label(std::size_t i) const { return labels_[i]; }

  std::span<const double> inputs() const noexcept { return inputs_; }
  std::span<const int> labels() const noexcept { return labels_; }

  Dataset with_labels(std::vector<int> labels, LabelMode mode) const;
  Dataset with_split(Split split) const;
  // First min(n, size()) examples.
  Dataset head(std::size_t n) const;
  Dataset concat(const Dataset& other) const;

  bool operator==(const Dataset&) const = default;

private:
  std::vector<double> inputs_;
  std::vector<int> labels_;
  std::size_t dim_ = 0;
  int num_classes_ = 2;
  Split split_ = Split::Train;
  LabelMode mode_ = LabelMode::True;
};

enum class HyperplaneSampling {
  // Uniform direction scaled by |s|, s ~ N(0,1).
  DirectionTimesAbsNormal,
  // Each coordinate i.i.d. N(0,1).
  IsotropicNormal,
};

struct SynthConfig {
  std::size_t n_train = 50;
  std::size_t n_heldout = 100;
  std::size_t d = 4;
  std::uint64_t seed = 0;
  HyperplaneSampling hyperplane = HyperplaneSampling::DirectionTimesAbsNormal;
};

struct SynthData {
  Dataset train;
  Dataset heldout;
  std::vector<double> hyperplane;
};

/// Gaussian inputs labelled by a random hyperplane through the origin:
/// label 1 when <w*, x> >= 0, otherwise 2.
SynthData synth_generate(const SynthConfig& cfg);

/// Replace labels by i.i.d. uniform draws on {1..K}.
Dataset randomize_labels(const Dataset& ds, int num_classes, std::uint64_t seed);

/// Seeded permutation of [0, n) cut into ceil(n / batch_size) consecutive slices.
std::vector<std::vector<std::size_t>> minibatch_stream(std::size_t n, std::size_t batch_size,
                                                       std::uint64_t epoch_seed);

// --- MNIST -----------------------------------------------------------------

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

struct MnistPaths {
  std::filesystem::path train_images;
  std::filesystem::path train_labels;
  std::filesystem::path heldout_images;
  std::filesystem::path heldout_labels;
};

struct MnistData {
  Dataset train;
  Dataset heldout;
};

/// Raw IDX readers. Files may be gzip-compressed; compression is detected from content.
std::vector<std::uint8_t> read_idx_images(const std::filesystem::path& path, std::size_t& rows,
                                          std::size_t& cols);
std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path);

/// Pixels scaled to [0,1], labels shifted to {1..10}. `limit` keeps the first
/// `limit` examples of each split.
MnistData mnist_load(const MnistPaths& paths, std::optional<std::size_t> limit = std::nullopt);

// --- CSV -------------------------------------------------------------------

/// Header `x1,..,xd,label`, one example per row, 17 significant digits.
void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path);
Dataset read_dataset_csv(const std::filesystem::path& path, int num_classes, Split split,
                         LabelMode mode);

}  // namespace dpb

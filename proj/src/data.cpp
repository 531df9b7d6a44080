#include "dpbayes/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dpbayes/errors.hpp"
#include "dpbayes/rng.hpp"

namespace dpb {

std::string to_string(Split s) { return s == Split::Train ? "train" : "heldout"; }

std::string to_string(LabelMode m) { return m == LabelMode::True ? "true" : "random"; }

LabelMode label_mode_from_string(const std::string& s) {
  if (s == "true") return LabelMode::True;
  if (s == "random") return LabelMode::Random;
  throw ConfigError("unknown label mode '" + s + "' (expected true|random)");
}

Dataset::Dataset(std::vector<double> inputs, std::vector<int> labels, std::size_t dim,
                 int num_classes, Split split, LabelMode mode)
    : inputs_(std::move(inputs)),
      labels_(std::move(labels)),
      dim_(dim),
      num_classes_(num_classes),
      split_(split),
      mode_(mode) {
  if (labels_.empty()) throw DataError(DataErrorKind::Format, "dataset must be nonempty");
  if (dim_ == 0 || inputs_.size() != labels_.size() * dim_) {
    throw DataError(DataErrorKind::Format, "input matrix does not match label count");
  }
  if (num_classes_ < 2) throw DataError(DataErrorKind::Format, "need at least two classes");
  for (int y : labels_) {
    if (y < 1 || y > num_classes_) {
      throw DataError(DataErrorKind::Format,
                      "label " + std::to_string(y) + " outside {1.." +
                          std::to_string(num_classes_) + "}");
    }
  }
}

Dataset Dataset::with_labels(std::vector<int> labels, LabelMode mode) const {
  return Dataset(inputs_, std::move(labels), dim_, num_classes_, split_, mode);
}

Dataset Dataset::with_split(Split split) const {
  Dataset d = *this;
  d.split_ = split;
  return d;
}

Dataset Dataset::head(std::size_t n) const {
  n = std::min(n, size());
  std::vector<double> x(inputs_.begin(), inputs_.begin() + static_cast<std::ptrdiff_t>(n * dim_));
  std::vector<int> y(labels_.begin(), labels_.begin() + static_cast<std::ptrdiff_t>(n));
  return Dataset(std::move(x), std::move(y), dim_, num_classes_, split_, mode_);
}

Dataset Dataset::concat(const Dataset& other) const {
  if (other.dim_ != dim_ || other.num_classes_ != num_classes_) {
    throw DataError(DataErrorKind::Format, "cannot concatenate datasets of different shape");
  }
  std::vector<double> x = inputs_;
  x.insert(x.end(), other.inputs_.begin(), other.inputs_.end());
  std::vector<int> y = labels_;
  y.insert(y.end(), other.labels_.begin(), other.labels_.end());
  return Dataset(std::move(x), std::move(y), dim_, num_classes_, split_, mode_);
}

namespace {

std::vector<double> sample_hyperplane(Rng& rng, const SynthConfig& cfg) {
  std::vector<double> w(cfg.d);
  rng.fill_normal(w);
  if (cfg.hyperplane == HyperplaneSampling::IsotropicNormal) return w;
  double norm = 0.0;
  for (double v : w) norm += v * v;
  norm = std::sqrt(norm);
  const double scale = std::fabs(rng.normal()) / norm;
  for (double& v : w) v *= scale;
  return w;
}

Dataset label_points(Rng& rng, std::size_t n, const std::vector<double>& w, Split split) {
  const std::size_t d = w.size();
  std::vector<double> x(n * d);
  rng.fill_normal(x);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < d; ++j) dot += w[j] * x[i * d + j];
    y[i] = dot >= 0.0 ? 1 : 2;
  }
  return Dataset(std::move(x), std::move(y), d, 2, split, LabelMode::True);
}

}  // namespace

SynthData synth_generate(const SynthConfig& cfg) {
  if (cfg.n_train == 0 || cfg.n_heldout == 0 || cfg.d == 0) {
    throw ConfigError("SYNTH sizes must be positive");
  }
  Rng rng(derive_seed(cfg.seed, "synth"));
  SynthData out;
  out.hyperplane = sample_hyperplane(rng, cfg);
  out.train = label_points(rng, cfg.n_train, out.hyperplane, Split::Train);
  out.heldout = label_points(rng, cfg.n_heldout, out.hyperplane, Split::Heldout);
  return out;
}

Dataset randomize_labels(const Dataset& ds, int num_classes, std::uint64_t seed) {
  if (num_classes < 2) throw ConfigError("need at least two classes");
  Rng rng(derive_seed(seed, "labels"));
  std::vector<int> y(ds.size());
  for (int& v : y) v = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(num_classes)));
  return Dataset(std::vector<double>(ds.inputs().begin(), ds.inputs().end()), std::move(y),
                 ds.dim(), num_classes, ds.split(), LabelMode::Random);
}

std::vector<std::vector<std::size_t>> minibatch_stream(std::size_t n, std::size_t batch_size,
                                                       std::uint64_t epoch_seed) {
  if (n == 0 || batch_size == 0 || batch_size > n) {
    throw ConfigError("batch size must lie in [1, n]");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(epoch_seed);
  // Fisher-Yates with our own draw so the permutation does not depend on the
  // standard library's shuffle implementation.
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(perm[i], perm[rng.below(i + 1)]);
  }
  std::vector<std::vector<std::size_t>> batches;
  batches.reserve((n + batch_size - 1) / batch_size);
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                         perm.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError(DataErrorKind::Io, "cannot open " + path.string() + " for writing");
  for (std::size_t j = 0; j < ds.dim(); ++j) out << 'x' << (j + 1) << ',';
  out << "label\n";
  char buf[32];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.input(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << buf << ',';
    }
    out << ds.label(i) << '\n';
  }
  if (!out) throw DataError(DataErrorKind::Io, "write failed: " + path.string());
}

Dataset read_dataset_csv(const std::filesystem::path& path, int num_classes, Split split,
                         LabelMode mode) {
  std::ifstream in(path);
  if (!in) throw DataError(DataErrorKind::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(DataErrorKind::Format, "empty CSV: " + path.string());
  const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (columns < 2 || line.substr(line.rfind(',') + 1) != "label") {
    throw DataError(DataErrorKind::Format, "expected header x1..xd,label in " + path.string());
  }
  const std::size_t d = columns - 1;
  std::vector<double> x;
  std::vector<int> y;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::size_t field = 0;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p <= end && field < columns) {
      const char* comma = std::find(p, end, ',');
      if (field < d) {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(p, comma, v);
        if (ec != std::errc{} || ptr != comma) {
          throw DataError(DataErrorKind::Format,
                          path.string() + ":" + std::to_string(lineno) + ": bad number");
        }
        x.push_back(v);
      } else {
        int v = 0;
        auto [ptr, ec] = std::from_chars(p, comma, v);
        if (ec != std::errc{} || ptr != comma) {
          throw DataError(DataErrorKind::Format,
                          path.string() + ":" + std::to_string(lineno) + ": bad label");
        }
        y.push_back(v);
      }
      ++field;
      p = comma + 1;
    }
    if (field != columns) {
      throw DataError(DataErrorKind::Format,
                      path.string() + ":" + std::to_string(lineno) + ": wrong column count");
    }
  }
  return Dataset(std::move(x), std::move(y), d, num_classes, split, mode);
}

}  // namespace dpb

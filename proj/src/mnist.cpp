#include <zlib.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <memory>

#include "dpbayes/data.hpp"
#include "dpbayes/errors.hpp"

namespace dpb {
namespace {

struct GzCloser {
  void operator()(gzFile_s* f) const noexcept { gzclose(f); }
};
using GzHandle = std::unique_ptr<gzFile_s, GzCloser>;

// gzread passes uncompressed input through unchanged, so one reader covers both.
class IdxReader {
public:
  explicit IdxReader(const std::filesystem::path& path) : path_(path.string()) {
    file_.reset(gzopen(path_.c_str(), "rb"));
    if (!file_) throw DataError(DataErrorKind::Io, "cannot open " + path_);
  }

  void read(void* dst, std::size_t n) {
    auto* out = static_cast<unsigned char*>(dst);
    while (n > 0) {
      const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(n, 1u << 30));
      const int got = gzread(file_.get(), out, chunk);
      if (got < 0) throw DataError(DataErrorKind::Io, "read error in " + path_);
      if (got == 0) throw DataError(DataErrorKind::Truncated, "truncated IDX file " + path_);
      out += got;
      n -= static_cast<std::size_t>(got);
    }
  }

  std::uint32_t read_be32() {
    std::array<unsigned char, 4> b{};
    read(b.data(), b.size());
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
           (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
  }

  void expect_magic(std::uint32_t magic) {
    const std::uint32_t got = read_be32();
    if (got != magic) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "bad IDX magic 0x%08x (expected 0x%08x) in ", got, magic);
      throw DataError(DataErrorKind::BadMagic, buf + path_);
    }
  }

private:
  std::string path_;
  GzHandle file_;
};

Dataset to_dataset(const std::vector<std::uint8_t>& pixels, const std::vector<std::uint8_t>& labels,
                   std::size_t dim, Split split, std::optional<std::size_t> limit) {
  const std::size_t n_img = pixels.size() / dim;
  if (n_img != labels.size()) {
    throw DataError(DataErrorKind::CountMismatch,
                    "image count " + std::to_string(n_img) + " != label count " +
                        std::to_string(labels.size()));
  }
  const std::size_t n = limit ? std::min(*limit, n_img) : n_img;
  std::vector<double> x(n * dim);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = pixels[i] / 255.0;
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] > 9) throw DataError(DataErrorKind::Format, "MNIST label out of range");
    y[i] = labels[i] + 1;
  }
  return Dataset(std::move(x), std::move(y), dim, 10, split, LabelMode::True);
}

}  // namespace

std::vector<std::uint8_t> read_idx_images(const std::filesystem::path& path, std::size_t& rows,
                                          std::size_t& cols) {
  IdxReader r(path);
  r.expect_magic(kIdxImageMagic);
  const std::size_t n = r.read_be32();
  rows = r.read_be32();
  cols = r.read_be32();
  std::vector<std::uint8_t> data(n * rows * cols);
  r.read(data.data(), data.size());
  return data;
}

std::vector<std::uint8_t> read_idx_labels(const std::filesystem::path& path) {
  IdxReader r(path);
  r.expect_magic(kIdxLabelMagic);
  const std::size_t n = r.read_be32();
  std::vector<std::uint8_t> data(n);
  r.read(data.data(), data.size());
  return data;
}

MnistData mnist_load(const MnistPaths& paths, std::optional<std::size_t> limit) {
  std::size_t rows = 0, cols = 0;
  auto train_px = read_idx_images(paths.train_images, rows, cols);
  auto train_lb = read_idx_labels(paths.train_labels);
  std::size_t hrows = 0, hcols = 0;
  auto held_px = read_idx_images(paths.heldout_images, hrows, hcols);
  auto held_lb = read_idx_labels(paths.heldout_labels);
  if (rows * cols == 0 || hrows != rows || hcols != cols) {
    throw DataError(DataErrorKind::Format, "train and heldout image shapes differ");
  }
  return {to_dataset(train_px, train_lb, rows * cols, Split::Train, limit),
          to_dataset(held_px, held_lb, rows * cols, Split::Heldout, limit)};
}

}  // namespace dpb

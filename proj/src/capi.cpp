#include "dpbayes/dpbayes.h"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dpbayes/errors.hpp"
#include "dpbayes/harness.hpp"
#include "json.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

struct dpb_dataset {
  dpb::Dataset ds;
};

struct dpb_reports {
  std::vector<dpb::BoundReport> rows;
  std::size_t failures = 0;
};

namespace {

thread_local std::string g_last_error;

dpb_status fail(dpb_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <typename F>
dpb_status guard(F&& f) {
  try {
    f();
    g_last_error.clear();
    return DPB_OK;
  } catch (const dpb::DomainError& e) {
    return fail(DPB_ERR_DOMAIN, e.what());
  } catch (const dpb::ConfigError& e) {
    return fail(DPB_ERR_CONFIG, e.what());
  } catch (const dpb::DataError& e) {
    return fail(e.kind() == dpb::DataErrorKind::Io ? DPB_ERR_IO : DPB_ERR_DATA, e.what());
  } catch (const dpb::DivergenceError& e) {
    return fail(DPB_ERR_DIVERGENCE, e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(DPB_ERR_CONFIG, e.what());
  } catch (const std::exception& e) {
    return fail(DPB_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(DPB_ERR_INTERNAL, "unknown error");
  }
}

void need(const void* p, const char* name) {
  if (p == nullptr) throw dpb::DomainError(std::string(name) + " must not be null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

dpb::LeverVariant variant_of(dpb_lever_variant v) {
  return v == DPB_LEVER_AS_DISPLAYED ? dpb::LeverVariant::AsDisplayed
                                     : dpb::LeverVariant::Conventional;
}

std::string md5_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw dpb::DataError(dpb::DataErrorKind::Io, "cannot open " + path);
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_md5(), nullptr) != 1) {
    throw std::runtime_error("md5 initialisation failed");
  }
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

struct MnistFile {
  const char* name;
  const char* md5;
};

constexpr std::array<MnistFile, 4> kMnistFiles{{
    {"train-images-idx3-ubyte.gz", "f68b3c2dcbeaaa9fbdd348bbdeb94873"},
    {"train-labels-idx1-ubyte.gz", "d53e105ee54ea40749a09fcbcd1e9432"},
    {"t10k-images-idx3-ubyte.gz", "9fb629c4189551a2d022fa330f9573f3"},
    {"t10k-labels-idx1-ubyte.gz", "ec29112dd5afa0611ce80d1b7f02629c"},
}};

constexpr const char* kDefaultMirror = "https://ossci-datasets.s3.amazonaws.com/mnist/";

// Splits "https://host[:port]/prefix/" into scheme+host and path prefix.
void split_url(const std::string& url, std::string& origin, std::string& prefix) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw dpb::ConfigError("base URL needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  origin = url.substr(0, path_start);
  prefix = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (prefix.back() != '/') prefix += '/';
}

}  // namespace

extern "C" {

const char* dpb_version(void) { return "1.0.0"; }

const char* dpb_last_error(void) { return g_last_error.c_str(); }

dpb_status dpb_kl_bin(double q, double p, double* out) {
  return guard([&] {
    need(out, "out");
    *out = dpb::kl_bin(q, p);
  });
}

dpb_status dpb_kl_inverse(double q, double c, double* out) {
  return guard([&] {
    need(out, "out");
    *out = dpb::kl_inverse(q, c);
  });
}

dpb_status dpb_maurer_bound(double kl_qp, int64_t m, double delta, double* out) {
  return guard([&] {
    need(out, "out");
    *out = dpb::maurer_bound(kl_qp, m, delta);
  });
}

dpb_status dpb_lever_bound(double tau, int64_t m, double delta, dpb_lever_variant variant,
                           double* out) {
  return guard([&] {
    need(out, "out");
    *out = dpb::lever_bound(tau, m, delta, variant_of(variant));
  });
}

dpb_status dpb_max_info_pure(double epsilon, int64_t m, double* out) {
  return guard([&] {
    need(out, "out");
    *out = dpb::max_info_pure(epsilon, m);
  });
}

dpb_status dpb_max_info_approx(double epsilon, int64_t m, double beta, double* out) {
  return guard([&] {
    need(out, "out");
    *out = dpb::max_info_approx(epsilon, m, beta);
  });
}

dpb_status dpb_dp_pacbayes_rhs(double kl_qp, int64_t m, double delta, double beta, double epsilon,
                               double* out) {
  return guard([&] {
    need(out, "out");
    *out = dpb::dp_pacbayes_rhs(kl_qp, dpb::BoundParams{m, delta, beta, epsilon});
  });
}

dpb_status dpb_optimize_beta(double kl_qp, int64_t m, double delta, double epsilon,
                             double* beta_out, double* bound_out) {
  return guard([&] {
    need(beta_out, "beta_out");
    need(bound_out, "bound_out");
    const auto opt = dpb::optimize_beta(kl_qp, m, delta, epsilon);
    *beta_out = opt.beta;
    *bound_out = opt.bound;
  });
}

dpb_status dpb_gibbs_sample_privacy(double tau, double surrogate_range, int64_t m,
                                    double* epsilon_out) {
  return guard([&] {
    need(epsilon_out, "epsilon_out");
    *epsilon_out = dpb::gibbs_sample_privacy(tau, surrogate_range, m).epsilon;
  });
}

dpb_status dpb_wasserstein_kl_penalty(double C, double sigma_min, double expected_norm,
                                      double delta_prime, double* out) {
  return guard([&] {
    need(out, "out");
    *out = dpb::wasserstein_kl_penalty({C, sigma_min, expected_norm, delta_prime});
  });
}

dpb_status dpb_gibbs_expected_norm_bound(double tau, double surrogate_range, double* out) {
  return guard([&] {
    need(out, "out");
    *out = dpb::gibbs_expected_norm_bound(tau, surrogate_range);
  });
}

// ---- datasets ----

dpb_status dpb_synth_generate(const char* config_json, dpb_dataset** train_out,
                              dpb_dataset** heldout_out, char** sidecar_json_out) {
  return guard([&] {
    need(train_out, "train_out");
    need(heldout_out, "heldout_out");
    const auto j = nlohmann::json::parse(config_json ? config_json : "{}");
    if (!j.is_object()) throw dpb::ConfigError("synth config must be a JSON object");
    dpb::SynthConfig cfg;
    cfg.n_train = j.value("n_train", cfg.n_train);
    cfg.n_heldout = j.value("n_heldout", cfg.n_heldout);
    cfg.d = j.value("d", cfg.d);
    cfg.seed = j.value("seed", cfg.seed);
    const auto hp = j.value("hyperplane", std::string("direction-abs-normal"));
    if (hp == "isotropic-normal") {
      cfg.hyperplane = dpb::HyperplaneSampling::IsotropicNormal;
    } else if (hp != "direction-abs-normal") {
      throw dpb::ConfigError("unknown hyperplane sampling '" + hp + "'");
    }
    const auto mode = dpb::label_mode_from_string(j.value("label_mode", std::string("true")));
    if (cfg.n_train == 0 || cfg.n_heldout == 0 || cfg.d == 0) {
      throw dpb::ConfigError("synth sizes must be positive");
    }

    auto data = dpb::synth_generate(cfg);
    if (mode == dpb::LabelMode::Random) {
      data.train = dpb::randomize_labels(data.train, 2, dpb::derive_seed(cfg.seed, "random-train"));
      data.heldout =
          dpb::randomize_labels(data.heldout, 2, dpb::derive_seed(cfg.seed, "random-heldout"));
    }
    std::string sidecar;
    if (sidecar_json_out) sidecar = dpb::synth_sidecar_json(cfg, data, mode);
    auto train = std::make_unique<dpb_dataset>(dpb_dataset{std::move(data.train)});
    auto heldout = std::make_unique<dpb_dataset>(dpb_dataset{std::move(data.heldout)});
    if (sidecar_json_out) *sidecar_json_out = dup_string(sidecar);
    *train_out = train.release();
    *heldout_out = heldout.release();
  });
}

dpb_status dpb_dataset_load_csv(const char* path, int num_classes, dpb_dataset** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    auto ds = dpb::read_dataset_csv(path, num_classes, dpb::Split::Train, dpb::LabelMode::True);
    *out = new dpb_dataset{std::move(ds)};
  });
}

dpb_status dpb_dataset_save_csv(const dpb_dataset* ds, const char* path) {
  return guard([&] {
    need(ds, "ds");
    need(path, "path");
    dpb::write_dataset_csv(ds->ds, path);
  });
}

dpb_status dpb_mnist_load(const char* train_images, const char* train_labels,
                          const char* heldout_images, const char* heldout_labels, int64_t limit,
                          dpb_dataset** train_out, dpb_dataset** heldout_out) {
  return guard([&] {
    need(train_images, "train_images");
    need(train_labels, "train_labels");
    need(heldout_images, "heldout_images");
    need(heldout_labels, "heldout_labels");
    need(train_out, "train_out");
    need(heldout_out, "heldout_out");
    std::optional<std::size_t> lim;
    if (limit >= 0) lim = static_cast<std::size_t>(limit);
    auto data = dpb::mnist_load({train_images, train_labels, heldout_images, heldout_labels}, lim);
    auto train = std::make_unique<dpb_dataset>(dpb_dataset{std::move(data.train)});
    auto heldout = std::make_unique<dpb_dataset>(dpb_dataset{std::move(data.heldout)});
    *train_out = train.release();
    *heldout_out = heldout.release();
  });
}

size_t dpb_dataset_size(const dpb_dataset* ds) { return ds ? ds->ds.size() : 0; }

size_t dpb_dataset_dim(const dpb_dataset* ds) { return ds ? ds->ds.dim() : 0; }

int dpb_dataset_label(const dpb_dataset* ds, size_t i) {
  if (ds == nullptr || i >= ds->ds.size()) return 0;
  return ds->ds.label(i);
}

void dpb_dataset_free(dpb_dataset* ds) { delete ds; }

// ---- experiments and reports ----

dpb_status dpb_config_normalize(const char* config_json, char** normalized_out) {
  return guard([&] {
    need(config_json, "config_json");
    const auto cfg = dpb::config_from_json(config_json);
    if (normalized_out) *normalized_out = dup_string(dpb::config_to_json(cfg));
  });
}

dpb_status dpb_experiment_run(const char* config_json, dpb_reports** out) {
  return guard([&] {
    need(config_json, "config_json");
    need(out, "out");
    const auto cfg = dpb::config_from_json(config_json);
    auto result = dpb::run_experiment(cfg);
    *out = new dpb_reports{std::move(result.reports), result.failures};
  });
}

dpb_status dpb_reports_read_csv(const char* path, dpb_reports** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    auto rows = dpb::read_reports_csv(path);
    std::size_t failures = 0;
    for (const auto& r : rows) failures += r.failed() ? 1 : 0;
    *out = new dpb_reports{std::move(rows), failures};
  });
}

dpb_status dpb_reports_write_csv(const dpb_reports* reports, const char* path) {
  return guard([&] {
    need(reports, "reports");
    need(path, "path");
    dpb::write_reports_csv(reports->rows, path);
  });
}

size_t dpb_reports_count(const dpb_reports* reports) { return reports ? reports->rows.size() : 0; }

size_t dpb_reports_failures(const dpb_reports* reports) { return reports ? reports->failures : 0; }

dpb_status dpb_reports_recompute(dpb_reports* reports, int64_t m, double delta, int optimize_beta,
                                 dpb_lever_variant variant) {
  return guard([&] {
    need(reports, "reports");
    if (m < 1) throw dpb::DomainError("m must be >= 1");
    if (!(delta > 0.0 && delta < 1.0)) throw dpb::DomainError("delta must lie in (0,1)");
    dpb::recompute_bounds(reports->rows, {m, delta, optimize_beta != 0, variant_of(variant)});
  });
}

dpb_status dpb_reports_plot(const dpb_reports* reports, const char* out_dir, double delta) {
  return guard([&] {
    need(reports, "reports");
    need(out_dir, "out_dir");
    dpb::PlotSpec spec;
    spec.delta = delta;
    dpb::emit_plots(reports->rows, out_dir, spec);
  });
}

dpb_status dpb_reports_get(const dpb_reports* reports, size_t i, const char* column, double* out) {
  return guard([&] {
    need(reports, "reports");
    need(column, "column");
    need(out, "out");
    if (i >= reports->rows.size()) throw dpb::DomainError("row index out of range");
    const auto& r = reports->rows[i];
    const std::string c = column;
    const std::pair<const char*, double> cols[] = {
        {"seed", static_cast<double>(r.seed)},
        {"tau1", r.tau1},
        {"tau2", r.tau2},
        {"gamma", r.gamma},
        {"epoch", static_cast<double>(r.epoch)},
        {"train_err01", r.train_err01},
        {"test_err01", r.test_err01},
        {"train_xent", r.train_xent},
        {"kl_upper_raw", r.kl_upper_raw},
        {"kl_upper", r.kl_upper},
        {"epsilon", r.epsilon},
        {"rhs_dp", r.rhs_dp},
        {"rhs_lever", r.rhs_lever},
        {"risk_bound_dp", r.risk_bound_dp},
        {"risk_bound_lever", r.risk_bound_lever},
        {"runtime_s", r.runtime_s},
    };
    for (const auto& [name, v] : cols) {
      if (c == name) {
        *out = v;
        return;
      }
    }
    throw dpb::DomainError("unknown or non-numeric column '" + c + "'");
  });
}

void dpb_reports_free(dpb_reports* reports) { delete reports; }

// ---- weight checkpoints ----

dpb_status dpb_checkpoint_write(const char* path, const double* w, size_t n) {
  return guard([&] {
    need(path, "path");
    if (n > 0) need(w, "w");
    dpb::write_checkpoint(path, std::span<const double>(w, n));
  });
}

dpb_status dpb_checkpoint_read(const char* path, double** w_out, size_t* n_out) {
  return guard([&] {
    need(path, "path");
    need(w_out, "w_out");
    need(n_out, "n_out");
    const auto w = dpb::read_checkpoint(path);
    auto* buf = static_cast<double*>(std::malloc(std::max<std::size_t>(1, w.size()) * sizeof(double)));
    if (buf == nullptr) throw std::bad_alloc();
    std::copy(w.begin(), w.end(), buf);
    *w_out = buf;
    *n_out = w.size();
  });
}

void dpb_buffer_free(double* buffer) { std::free(buffer); }

// ---- MNIST download ----

dpb_status dpb_file_md5(const char* path, char* out, size_t out_len) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    if (out_len < 33) throw dpb::DomainError("md5 output buffer needs 33 bytes");
    const auto h = md5_hex(path);
    std::memcpy(out, h.c_str(), h.size() + 1);
  });
}

dpb_status dpb_mnist_fetch(const char* dest_dir, const char* base_url) {
  return guard([&] {
    need(dest_dir, "dest_dir");
    const std::filesystem::path dir = dest_dir;
    std::filesystem::create_directories(dir);
    std::string origin, prefix;
    split_url(base_url ? base_url : kDefaultMirror, origin, prefix);

    httplib::Client client(origin);
    client.set_follow_location(true);
    client.set_connection_timeout(30);
    client.set_read_timeout(120);

    for (const auto& f : kMnistFiles) {
      const auto target = dir / f.name;
      if (std::filesystem::exists(target) && md5_hex(target.string()) == f.md5) continue;

      const auto tmp = dir / (std::string(f.name) + ".part");
      {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw dpb::DataError(dpb::DataErrorKind::Io, "cannot write " + tmp.string());
        auto res = client.Get(prefix + f.name, [&](const char* data, size_t len) {
          out.write(data, static_cast<std::streamsize>(len));
          return static_cast<bool>(out);
        });
        if (!res) {
          throw dpb::DataError(dpb::DataErrorKind::Io,
                               "download of " + std::string(f.name) +
                                   " failed: " + httplib::to_string(res.error()));
        }
        if (res->status != 200) {
          throw dpb::DataError(dpb::DataErrorKind::Io, "download of " + std::string(f.name) +
                                                           " returned HTTP " +
                                                           std::to_string(res->status));
        }
      }
      const auto got = md5_hex(tmp.string());
      if (got != f.md5) {
        std::filesystem::remove(tmp);
        throw dpb::DataError(dpb::DataErrorKind::Format, std::string(f.name) +
                                                             ": checksum mismatch (got " + got +
                                                             ", expected " + f.md5 + ")");
      }
      std::filesystem::rename(tmp, target);
    }
  });
}

void dpb_string_free(char* s) { std::free(s); }

}  // extern "C"

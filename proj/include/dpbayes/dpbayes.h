/*
 * C interface to the dpbayes library.
 *
 * Objects are opaque handles created by dpb_*_create / dpb_*_load functions
 * and released with the matching dpb_*_free. Every fallible call returns a
 * dpb_status; on failure a thread-local message is available from
 * dpb_last_error(). Output parameters are written only on success.
 *
 * Status values double as CLI exit codes (0 ok, 2 config, 3 data, 4 divergence).
 */
#ifndef DPBAYES_H
#define DPBAYES_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define DPB_API __declspec(dllexport)
#else
#define DPB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dpb_status {
  DPB_OK = 0,
  DPB_ERR_DOMAIN = 1,
  DPB_ERR_CONFIG = 2,
  DPB_ERR_DATA = 3,
  DPB_ERR_DIVERGENCE = 4,
  DPB_ERR_IO = 5,
  DPB_ERR_INTERNAL = 6
} dpb_status;

typedef enum dpb_lever_variant {
  DPB_LEVER_CONVENTIONAL = 0,
  DPB_LEVER_AS_DISPLAYED = 1
} dpb_lever_variant;

typedef struct dpb_dataset dpb_dataset;
typedef struct dpb_reports dpb_reports;

DPB_API const char* dpb_version(void);
/* Message for the last failed call on this thread; "" if none. */
DPB_API const char* dpb_last_error(void);

/* ---- certificate formulas (nats) ---- */
DPB_API dpb_status dpb_kl_bin(double q, double p, double* out);
DPB_API dpb_status dpb_kl_inverse(double q, double c, double* out);
DPB_API dpb_status dpb_maurer_bound(double kl_qp, int64_t m, double delta, double* out);
DPB_API dpb_status dpb_lever_bound(double tau, int64_t m, double delta, dpb_lever_variant variant,
                                   double* out);
DPB_API dpb_status dpb_max_info_pure(double epsilon, int64_t m, double* out);
DPB_API dpb_status dpb_max_info_approx(double epsilon, int64_t m, double beta, double* out);
DPB_API dpb_status dpb_dp_pacbayes_rhs(double kl_qp, int64_t m, double delta, double beta,
                                       double epsilon, double* out);
DPB_API dpb_status dpb_optimize_beta(double kl_qp, int64_t m, double delta, double epsilon,
                                     double* beta_out, double* bound_out);
DPB_API dpb_status dpb_gibbs_sample_privacy(double tau, double surrogate_range, int64_t m,
                                            double* epsilon_out);
DPB_API dpb_status dpb_wasserstein_kl_penalty(double C, double sigma_min, double expected_norm,
                                              double delta_prime, double* out);
DPB_API dpb_status dpb_gibbs_expected_norm_bound(double tau, double surrogate_range, double* out);

/* ---- datasets ---- */
/* config_json: {"n_train":50,"n_heldout":100,"d":4,"seed":1,"label_mode":"true"}; all keys optional.
 * sidecar_json_out (may be NULL) receives a malloc'd JSON description; release with dpb_string_free. */
DPB_API dpb_status dpb_synth_generate(const char* config_json, dpb_dataset** train_out,
                                      dpb_dataset** heldout_out, char** sidecar_json_out);
DPB_API dpb_status dpb_dataset_load_csv(const char* path, int num_classes, dpb_dataset** out);
DPB_API dpb_status dpb_dataset_save_csv(const dpb_dataset* ds, const char* path);
/* limit < 0: no limit. */
DPB_API dpb_status dpb_mnist_load(const char* train_images, const char* train_labels,
                                  const char* heldout_images, const char* heldout_labels,
                                  int64_t limit, dpb_dataset** train_out,
                                  dpb_dataset** heldout_out);
DPB_API size_t dpb_dataset_size(const dpb_dataset* ds);
DPB_API size_t dpb_dataset_dim(const dpb_dataset* ds);
/* Label of example i in {1..K}; 0 when i is out of range. */
DPB_API int dpb_dataset_label(const dpb_dataset* ds, size_t i);
DPB_API void dpb_dataset_free(dpb_dataset* ds);

/* ---- experiments and reports ---- */
/* Validates an experiment config; normalized_out (may be NULL) receives the
 * config with all defaults filled in. */
DPB_API dpb_status dpb_config_normalize(const char* config_json, char** normalized_out);
/* Runs the sweep described by config_json. On divergence without "strict",
 * failed rows are included and the call still returns DPB_OK. */
DPB_API dpb_status dpb_experiment_run(const char* config_json, dpb_reports** out);
DPB_API dpb_status dpb_reports_read_csv(const char* path, dpb_reports** out);
DPB_API dpb_status dpb_reports_write_csv(const dpb_reports* reports, const char* path);
DPB_API size_t dpb_reports_count(const dpb_reports* reports);
DPB_API size_t dpb_reports_failures(const dpb_reports* reports);
/* Recomputes bound columns for training-set size m and confidence delta. */
DPB_API dpb_status dpb_reports_recompute(dpb_reports* reports, int64_t m, double delta,
                                         int optimize_beta, dpb_lever_variant variant);
/* Writes fig_*.svg files into out_dir. */
DPB_API dpb_status dpb_reports_plot(const dpb_reports* reports, const char* out_dir,
                                    double delta);
/* Column value of row i by CSV header name (NaN for empty cells). */
DPB_API dpb_status dpb_reports_get(const dpb_reports* reports, size_t i, const char* column,
                                   double* out);
DPB_API void dpb_reports_free(dpb_reports* reports);

/* ---- weight checkpoints ---- */
DPB_API dpb_status dpb_checkpoint_write(const char* path, const double* w, size_t n);
/* *w_out is malloc'd; release with dpb_buffer_free. */
DPB_API dpb_status dpb_checkpoint_read(const char* path, double** w_out, size_t* n_out);
DPB_API void dpb_buffer_free(double* buffer);

/* ---- MNIST download ---- */
/* Downloads the four gzip IDX files from base_url (NULL: default mirror)
 * into dest_dir and verifies their MD5 checksums. */
DPB_API dpb_status dpb_mnist_fetch(const char* dest_dir, const char* base_url);
/* Lower-case hex MD5 of a file, written into out (at least 33 bytes). */
DPB_API dpb_status dpb_file_md5(const char* path, char* out, size_t out_len);

DPB_API void dpb_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* DPBAYES_H */

/* sbtk: sparsity-aware Bayesian learning toolkit, C interface.
 *
 * Every function returns an sbtk_status; outputs are written through caller
 * pointers or returned as opaque handles that must be released with the
 * matching *_destroy/_free call. On failure sbtk_last_error() returns a
 * thread-local description of the most recent error.
 */
#ifndef SBTK_H_
#define SBTK_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define SBTK_API __attribute__((visibility("default")))

typedef enum sbtk_status {
  SBTK_OK = 0,
  SBTK_ERR_DOMAIN = 1,     /* invalid arguments / model configuration */
  SBTK_ERR_NUMERICAL = 2,  /* factorization or quadrature failure */
  SBTK_ERR_PARSE = 3,      /* malformed input file */
  SBTK_ERR_IO = 4,         /* file system failure */
  SBTK_ERR_INTERNAL = 5
} sbtk_status;

SBTK_API const char* sbtk_last_error(void);
SBTK_API const char* sbtk_version(void);
SBTK_API void sbtk_string_free(char* s);

/* ---- GSM priors --------------------------------------------------------- */

typedef struct sbtk_gsm sbtk_gsm;

/* kind: "student_t" (a=shape, b=scale), "laplacian" (a=shape, b=rate),
 * "normal_jeffreys" (no parameters), "gen_hyperbolic" (a, b, order),
 * "horseshoe" (a, b). Unused parameters are ignored. */
SBTK_API sbtk_status sbtk_gsm_create(const char* kind, double a, double b, double order,
                                     sbtk_gsm** out);
SBTK_API void sbtk_gsm_destroy(sbtk_gsm* h);
SBTK_API sbtk_status sbtk_gsm_log_density(const sbtk_gsm* h, double theta, double* out);
SBTK_API sbtk_status sbtk_gsm_grouped_log_density(const sbtk_gsm* h, const double* w, int dim,
                                                  double* out);
/* 1 when the density is normalized, 0 for the improper Normal-Jeffreys. */
SBTK_API sbtk_status sbtk_gsm_is_normalized(const sbtk_gsm* h, int* out);
SBTK_API sbtk_status sbtk_gsm_sample(const sbtk_gsm* h, int n, uint64_t seed, double* out);

/* ---- IBP ---------------------------------------------------------------- */

/* sticks, probs: length truncation; z: row-major rows x truncation (0/1). */
SBTK_API sbtk_status sbtk_ibp_sample(double alpha, int rows, int truncation, uint64_t seed,
                                     double* sticks, double* probs, uint8_t* z);

/* ---- Bayesian linear regression ----------------------------------------- */

/* X row-major n x l. Outputs: mean (l), cov (row-major l x l). */
SBTK_API sbtk_status sbtk_blr_posterior(const double* X, int n, int l, const double* y,
                                        const double* alpha, double beta, double* mean,
                                        double* cov);
SBTK_API sbtk_status sbtk_blr_evidence(const double* X, int n, int l, const double* y,
                                       const double* alpha, double beta, double* log_evidence,
                                       int* conditioning_warning);
SBTK_API sbtk_status sbtk_blr_predict(const double* mean, const double* cov, int l, double beta,
                                      const double* x_star, double* pred_mean, double* pred_var);
SBTK_API sbtk_status sbtk_bic_score(double loglik_at_map, int param_count, int sample_count,
                                    double* out);

typedef struct sbtk_ard_result sbtk_ard_result;
SBTK_API sbtk_status sbtk_ard_fit(const double* X, int n, int l, const double* y, int max_iters,
                                  double tol, double fixed_beta /* <=0: learn */,
                                  sbtk_ard_result** out);
SBTK_API void sbtk_ard_result_destroy(sbtk_ard_result* h);
SBTK_API sbtk_status sbtk_ard_result_alpha(const sbtk_ard_result* h, double* alpha);
SBTK_API sbtk_status sbtk_ard_result_beta(const sbtk_ard_result* h, double* beta);
SBTK_API sbtk_status sbtk_ard_result_pruned(const sbtk_ard_result* h, int* pruned);
SBTK_API sbtk_status sbtk_ard_result_converged(const sbtk_ard_result* h, int* converged);
SBTK_API sbtk_status sbtk_ard_result_trace_len(const sbtk_ard_result* h, int* len);
SBTK_API sbtk_status sbtk_ard_result_trace(const sbtk_ard_result* h, double* trace);

/* ---- kernels ------------------------------------------------------------- */

typedef struct sbtk_kernel sbtk_kernel;

SBTK_API sbtk_status sbtk_kernel_parse(const char* json_text, sbtk_kernel** out);
/* Returned string must be released with sbtk_string_free. */
SBTK_API sbtk_status sbtk_kernel_to_json(const sbtk_kernel* h, char** out);
SBTK_API sbtk_status sbtk_kernel_grid_make(int q, double freq_lo, double freq_hi, double sigma,
                                           sbtk_kernel** out);
SBTK_API void sbtk_kernel_destroy(sbtk_kernel* h);
SBTK_API sbtk_status sbtk_kernel_eval(const sbtk_kernel* h, const double* x, const double* xp,
                                      int dim, double* out);
/* X row-major n x dim, X2 row-major m x dim; out row-major n x m. */
SBTK_API sbtk_status sbtk_kernel_matrix(const sbtk_kernel* h, const double* X, int n,
                                        const double* X2, int m, int dim, double* out);
SBTK_API sbtk_status sbtk_kernel_spectral_density(const sbtk_kernel* h, double omega,
                                                  double* out);
SBTK_API sbtk_status sbtk_kernel_weight_count(const sbtk_kernel* h, int* out);
SBTK_API sbtk_status sbtk_kernel_get_weights(const sbtk_kernel* h, double* out);
SBTK_API sbtk_status sbtk_kernel_set_weights(sbtk_kernel* h, const double* w, int len);

/* ---- GP regression ------------------------------------------------------- */

typedef struct sbtk_gp_result sbtk_gp_result;

typedef struct sbtk_gp_options {
  int max_iters;        /* <=0: default 200 */
  double tol;           /* <=0: default 1e-8 */
  double epsilon_w;     /* <=0: default 1e-6 */
  double rho_init;      /* <=0: default 1.0 */
  uint64_t seed;
  int learn_noise;      /* 0/1; default 1 */
  double noise_init;    /* <=0: default 0.1 var(y) */
} sbtk_gp_options;

SBTK_API sbtk_status sbtk_gp_evidence(const sbtk_kernel* kernel, double noise_var,
                                      const double* X, int n, int dim, const double* y,
                                      double* log_evidence);
/* mean: m entries; var: m entries (diagonal of the posterior covariance). */
SBTK_API sbtk_status sbtk_gp_predict(const sbtk_kernel* kernel, double noise_var,
                                     const double* X, int n, int dim, const double* y,
                                     const double* X_star, int m, double* mean, double* var);

/* solver: "mm", "admm" or "seq". */
SBTK_API sbtk_status sbtk_gp_fit(const sbtk_kernel* kernel, const double* X, int n, int dim,
                                 const double* y, const char* solver,
                                 const sbtk_gp_options* opts, sbtk_gp_result** out);
SBTK_API void sbtk_gp_result_destroy(sbtk_gp_result* h);
SBTK_API sbtk_status sbtk_gp_result_kernel(const sbtk_gp_result* h, sbtk_kernel** out);
SBTK_API sbtk_status sbtk_gp_result_noise_var(const sbtk_gp_result* h, double* out);
SBTK_API sbtk_status sbtk_gp_result_evidence(const sbtk_gp_result* h, double* out);
SBTK_API sbtk_status sbtk_gp_result_converged(const sbtk_gp_result* h, int* out);
SBTK_API sbtk_status sbtk_gp_result_active_count(const sbtk_gp_result* h, int* out);
SBTK_API sbtk_status sbtk_gp_result_trace_len(const sbtk_gp_result* h, int* out);
SBTK_API sbtk_status sbtk_gp_result_trace(const sbtk_gp_result* h, double* objective,
                                          int* active);
SBTK_API sbtk_status sbtk_gp_result_residuals(const sbtk_gp_result* h, double* primal,
                                              double* dual);

/* ---- tensors / CPD ------------------------------------------------------- */

typedef struct sbtk_tensor sbtk_tensor;
typedef struct sbtk_cpd_result sbtk_cpd_result;

/* indices row-major nobs x order. */
SBTK_API sbtk_status sbtk_tensor_create(const int* dims, int order, const int* indices,
                                        const double* values, int nobs, sbtk_tensor** out);
SBTK_API sbtk_status sbtk_tensor_read(const char* path, sbtk_tensor** out);
SBTK_API sbtk_status sbtk_tensor_write(const sbtk_tensor* h, const char* path);
SBTK_API void sbtk_tensor_destroy(sbtk_tensor* h);
SBTK_API sbtk_status sbtk_tensor_order(const sbtk_tensor* h, int* out);
SBTK_API sbtk_status sbtk_tensor_dims(const sbtk_tensor* h, int* dims);
SBTK_API sbtk_status sbtk_tensor_observed(const sbtk_tensor* h, int* out);

typedef struct sbtk_cpd_options {
  int max_sweeps;         /* <=0: default 500 */
  double tol;             /* <=0: default 1e-7 */
  double prune_threshold; /* <0: default 1e-6 */
  uint64_t seed;
} sbtk_cpd_options;

SBTK_API sbtk_status sbtk_cpd_fit(const sbtk_tensor* data, int rank_bound,
                                  const sbtk_cpd_options* opts, sbtk_cpd_result** out);
SBTK_API void sbtk_cpd_result_destroy(sbtk_cpd_result* h);
SBTK_API sbtk_status sbtk_cpd_result_rank(const sbtk_cpd_result* h, int* out);
SBTK_API sbtk_status sbtk_cpd_result_converged(const sbtk_cpd_result* h, int* out);
SBTK_API sbtk_status sbtk_cpd_result_noise_precision(const sbtk_cpd_result* h, double* out);
SBTK_API sbtk_status sbtk_cpd_result_elbo_len(const sbtk_cpd_result* h, int* out);
SBTK_API sbtk_status sbtk_cpd_result_elbo(const sbtk_cpd_result* h, double* out);
/* factor p: rows = dims[p], cols = rank; out row-major. */
SBTK_API sbtk_status sbtk_cpd_result_factor(const sbtk_cpd_result* h, int mode, double* out);
/* Posterior-mean completion; mean/variance as fully dense tensors. */
SBTK_API sbtk_status sbtk_cpd_complete(const sbtk_tensor* data, int rank_bound,
                                       const sbtk_cpd_options* opts, sbtk_tensor** mean,
                                       sbtk_tensor** variance, sbtk_cpd_result** model);

/* ---- stochastic LWTA network --------------------------------------------- */

typedef struct sbtk_lwta sbtk_lwta;

typedef struct sbtk_lwta_train_options {
  double learning_rate;  /* <=0: default 0.01 */
  int epochs;            /* <=0: default 100 */
  int batch_size;        /* <=0: default 64 */
  double gs_temperature; /* <=0: default 0.67 */
  double rb_temperature; /* <=0: default 0.5 */
  uint64_t seed;
} sbtk_lwta_train_options;

SBTK_API sbtk_status sbtk_lwta_create(int input_dim, const int* blocks, const int* units,
                                      int n_layers, int classes, double ibp_alpha, uint64_t seed,
                                      sbtk_lwta** out);
SBTK_API void sbtk_lwta_destroy(sbtk_lwta* h);
/* elbo_trace (nullable) receives up to trace_cap per-step values; *steps gets
 * the full step count. */
SBTK_API sbtk_status sbtk_lwta_train(sbtk_lwta* h, const double* X, int n, int dim,
                                     const int* labels, const sbtk_lwta_train_options* opts,
                                     double* elbo_trace, int trace_cap, int* steps,
                                     double* final_elbo);
/* mode: 0 = posterior-mean weights with argmax winners, 1 = sampled winners. */
SBTK_API sbtk_status sbtk_lwta_predict(const sbtk_lwta* h, const double* X, int n, int dim,
                                       int mode, uint64_t seed, int* labels, double* probs);
SBTK_API sbtk_status sbtk_lwta_prune(sbtk_lwta* h, double tau, double* retained_fraction);
SBTK_API sbtk_status sbtk_lwta_layer_count(const sbtk_lwta* h, int* out);
/* hist: (ceiling+1) bins for one layer (readout = layer_count). */
SBTK_API sbtk_status sbtk_lwta_bit_report(const sbtk_lwta* h, int layer, int ceiling,
                                          int* hist, double* mean_bits);
SBTK_API sbtk_status sbtk_lwta_save(const sbtk_lwta* h, const char* path);
SBTK_API sbtk_status sbtk_lwta_load(const char* path, sbtk_lwta** out);

/* ---- metrics -------------------------------------------------------------- */

SBTK_API sbtk_status sbtk_metrics(const double* y_true, const double* y_pred, int n, double* mse,
                                  double* mape, int* mape_excluded);

#ifdef __cplusplus
}
#endif

#endif /* SBTK_H_ */

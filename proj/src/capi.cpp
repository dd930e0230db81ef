#include "sbtk.h"

#include <cstring>
#include <string>

#include "sbtk/cpd.hpp"
#include "sbtk/errors.hpp"
#include "sbtk/gpinfer.hpp"
#include "sbtk/io.hpp"
#include "sbtk/kernels.hpp"
#include "sbtk/linmodel.hpp"
#include "sbtk/lwta.hpp"
#include "sbtk/metrics.hpp"
#include "sbtk/priors.hpp"
#include "sbtk/rng.hpp"

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& msg) { g_last_error = msg; }

template <typename Fn>
sbtk_status guarded(Fn&& fn) {
  try {
    fn();
    return SBTK_OK;
  } catch (const sbtk::ParseError& e) {
    set_error(e.what());
    return SBTK_ERR_PARSE;
  } catch (const sbtk::DomainError& e) {
    set_error(e.what());
    return SBTK_ERR_DOMAIN;
  } catch (const sbtk::NumericalError& e) {
    set_error(e.what());
    return SBTK_ERR_NUMERICAL;
  } catch (const std::exception& e) {
    set_error(e.what());
    return SBTK_ERR_INTERNAL;
  } catch (...) {
    set_error("unknown failure");
    return SBTK_ERR_INTERNAL;
  }
}

sbtk_status require(bool cond, const char* msg) {
  if (cond) return SBTK_OK;
  set_error(msg);
  return SBTK_ERR_DOMAIN;
}

Eigen::MatrixXd map_rowmajor(const double* data, int rows, int cols) {
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      data, rows, cols);
}

void copy_rowmajor(const Eigen::MatrixXd& m, double* out) {
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      out, m.rows(), m.cols()) = m;
}

sbtk::MkSolverOptions convert_gp_options(const sbtk_gp_options* opts) {
  sbtk::MkSolverOptions o;
  if (!opts) return o;
  if (opts->max_iters > 0) o.max_iters = opts->max_iters;
  if (opts->tol > 0.0) o.tol = opts->tol;
  if (opts->epsilon_w > 0.0) o.epsilon_w = opts->epsilon_w;
  if (opts->rho_init > 0.0) o.rho_init = opts->rho_init;
  o.seed = opts->seed;
  o.learn_noise = opts->learn_noise != 0;
  return o;
}

sbtk::CpdOptions convert_cpd_options(const sbtk_cpd_options* opts) {
  sbtk::CpdOptions o;
  o.warn_stream = true;  // C consumers get configuration warnings on stderr
  if (!opts) return o;
  if (opts->max_sweeps > 0) o.max_sweeps = opts->max_sweeps;
  if (opts->tol > 0.0) o.tol = opts->tol;
  if (opts->prune_threshold >= 0.0) o.prune_threshold = opts->prune_threshold;
  o.seed = opts->seed;
  return o;
}

}  // namespace

struct sbtk_gsm {
  sbtk::GsmSpec spec;
};
struct sbtk_kernel {
  sbtk::KernelSpec spec;
};
struct sbtk_ard_result {
  sbtk::ArdResult result;
};
struct sbtk_gp_result {
  sbtk::GpFitResult result;
};
struct sbtk_tensor {
  sbtk::PartialTensor tensor;
};
struct sbtk_cpd_result {
  sbtk::CpdModel model;
};
struct sbtk_lwta {
  sbtk::LwtaNetwork net;
};

extern "C" {

const char* sbtk_last_error(void) { return g_last_error.c_str(); }

const char* sbtk_version(void) { return "1.0.0"; }

void sbtk_string_free(char* s) { delete[] s; }

/* ---- GSM ------------------------------------------------------------ */

sbtk_status sbtk_gsm_create(const char* kind, double a, double b, double order, sbtk_gsm** out) {
  if (auto st = require(kind && out, "null argument")) return st;
  return guarded([&] {
    const std::string k(kind);
    sbtk::GsmSpec spec;
    if (k == "student_t")
      spec = sbtk::GsmSpec::student_t(a, b);
    else if (k == "laplacian")
      spec = sbtk::GsmSpec::laplacian(a, b);
    else if (k == "normal_jeffreys")
      spec = sbtk::GsmSpec::normal_jeffreys();
    else if (k == "gen_hyperbolic")
      spec = sbtk::GsmSpec::gen_hyperbolic(a, b, order);
    else if (k == "horseshoe")
      spec = sbtk::GsmSpec::horseshoe(a, b);
    else
      throw sbtk::DomainError("unknown GSM kind: " + k);
    *out = new sbtk_gsm{spec};
  });
}

void sbtk_gsm_destroy(sbtk_gsm* h) { delete h; }

sbtk_status sbtk_gsm_log_density(const sbtk_gsm* h, double theta, double* out) {
  if (auto st = require(h && out, "null argument")) return st;
  return guarded([&] { *out = sbtk::gsm_log_density(h->spec, theta); });
}

sbtk_status sbtk_gsm_grouped_log_density(const sbtk_gsm* h, const double* w, int dim,
                                         double* out) {
  if (auto st = require(h && w && out && dim > 0, "null or empty argument")) return st;
  return guarded([&] {
    Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(w, dim);
    *out = sbtk::grouped_gsm_log_density(h->spec, v);
  });
}

sbtk_status sbtk_gsm_is_normalized(const sbtk_gsm* h, int* out) {
  if (auto st = require(h && out, "null argument")) return st;
  *out = h->spec.is_normalized() ? 1 : 0;
  return SBTK_OK;
}

sbtk_status sbtk_gsm_sample(const sbtk_gsm* h, int n, uint64_t seed, double* out) {
  if (auto st = require(h && out && n > 0, "null or empty argument")) return st;
  return guarded([&] {
    sbtk::Rng rng(seed);
    const Eigen::VectorXd draws = sbtk::gsm_sample(h->spec, n, rng);
    std::memcpy(out, draws.data(), sizeof(double) * n);
  });
}

/* ---- IBP ------------------------------------------------------------ */

sbtk_status sbtk_ibp_sample(double alpha, int rows, int truncation, uint64_t seed, double* sticks,
                            double* probs, uint8_t* z) {
  if (auto st = require(sticks && probs && z, "null argument")) return st;
  return guarded([&] {
    sbtk::IbpConfig cfg{alpha, rows, truncation};
    sbtk::Rng rng(seed);
    const sbtk::IbpDraw draw = sbtk::ibp_sample(cfg, rng);
    std::memcpy(sticks, draw.sticks.data(), sizeof(double) * truncation);
    std::memcpy(probs, draw.probs.data(), sizeof(double) * truncation);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < truncation; ++j) z[i * truncation + j] = draw.Z(i, j);
  });
}

/* ---- BLR ------------------------------------------------------------ */

sbtk_status sbtk_blr_posterior(const double* X, int n, int l, const double* y,
                               const double* alpha, double beta, double* mean, double* cov) {
  if (auto st = require(X && y && alpha && mean && cov && l > 0 && n >= 0, "bad arguments"))
    return st;
  return guarded([&] {
    sbtk::LinRegData data{map_rowmajor(X, n, l), Eigen::Map<const Eigen::VectorXd>(y, n)};
    sbtk::LinRegPrior prior{Eigen::Map<const Eigen::VectorXd>(alpha, l)};
    const sbtk::LinRegPosterior post = sbtk::blr_posterior(data, prior, beta);
    std::memcpy(mean, post.mean.data(), sizeof(double) * l);
    copy_rowmajor(post.cov, cov);
  });
}

sbtk_status sbtk_blr_evidence(const double* X, int n, int l, const double* y, const double* alpha,
                              double beta, double* log_evidence, int* conditioning_warning) {
  if (auto st = require(X && y && alpha && log_evidence && n > 0 && l > 0, "bad arguments"))
    return st;
  return guarded([&] {
    sbtk::LinRegData data{map_rowmajor(X, n, l), Eigen::Map<const Eigen::VectorXd>(y, n)};
    sbtk::LinRegPrior prior{Eigen::Map<const Eigen::VectorXd>(alpha, l)};
    const sbtk::EvidenceValue ev = sbtk::blr_evidence_log(data, prior, beta);
    *log_evidence = ev.log_value;
    if (conditioning_warning) *conditioning_warning = ev.conditioning_warning ? 1 : 0;
  });
}

sbtk_status sbtk_blr_predict(const double* mean, const double* cov, int l, double beta,
                             const double* x_star, double* pred_mean, double* pred_var) {
  if (auto st =
          require(mean && cov && x_star && pred_mean && pred_var && l > 0, "bad arguments"))
    return st;
  return guarded([&] {
    sbtk::LinRegPosterior post;
    post.mean = Eigen::Map<const Eigen::VectorXd>(mean, l);
    post.cov = map_rowmajor(cov, l, l);
    post.noise_precision = beta;
    const sbtk::Prediction p =
        sbtk::blr_predict(Eigen::Map<const Eigen::VectorXd>(x_star, l), post);
    *pred_mean = p.mean;
    *pred_var = p.variance;
  });
}

sbtk_status sbtk_bic_score(double loglik_at_map, int param_count, int sample_count, double* out) {
  if (auto st = require(out != nullptr, "null argument")) return st;
  return guarded([&] { *out = sbtk::bic_score(loglik_at_map, param_count, sample_count); });
}

sbtk_status sbtk_ard_fit(const double* X, int n, int l, const double* y, int max_iters,
                         double tol, double fixed_beta, sbtk_ard_result** out) {
  if (auto st = require(X && y && out && n > 0 && l > 0, "bad arguments")) return st;
  return guarded([&] {
    sbtk::LinRegData data{map_rowmajor(X, n, l), Eigen::Map<const Eigen::VectorXd>(y, n)};
    sbtk::ArdOptions opts;
    if (max_iters > 0) opts.max_iters = max_iters;
    if (tol > 0.0) opts.tol = tol;
    if (fixed_beta > 0.0) {
      opts.learn_noise = false;
      opts.beta_init = fixed_beta;
    }
    *out = new sbtk_ard_result{sbtk::ard_fit(data, opts)};
  });
}

void sbtk_ard_result_destroy(sbtk_ard_result* h) { delete h; }

sbtk_status sbtk_ard_result_alpha(const sbtk_ard_result* h, double* alpha) {
  if (auto st = require(h && alpha, "null argument")) return st;
  std::memcpy(alpha, h->result.prior.alpha.data(),
              sizeof(double) * h->result.prior.alpha.size());
  return SBTK_OK;
}

sbtk_status sbtk_ard_result_beta(const sbtk_ard_result* h, double* beta) {
  if (auto st = require(h && beta, "null argument")) return st;
  *beta = h->result.beta;
  return SBTK_OK;
}

sbtk_status sbtk_ard_result_pruned(const sbtk_ard_result* h, int* pruned) {
  if (auto st = require(h && pruned, "null argument")) return st;
  for (size_t i = 0; i < h->result.pruned.size(); ++i) pruned[i] = h->result.pruned[i] ? 1 : 0;
  return SBTK_OK;
}

sbtk_status sbtk_ard_result_converged(const sbtk_ard_result* h, int* converged) {
  if (auto st = require(h && converged, "null argument")) return st;
  *converged = h->result.converged ? 1 : 0;
  return SBTK_OK;
}

sbtk_status sbtk_ard_result_trace_len(const sbtk_ard_result* h, int* len) {
  if (auto st = require(h && len, "null argument")) return st;
  *len = static_cast<int>(h->result.evidence_trace.size());
  return SBTK_OK;
}

sbtk_status sbtk_ard_result_trace(const sbtk_ard_result* h, double* trace) {
  if (auto st = require(h && trace, "null argument")) return st;
  std::memcpy(trace, h->result.evidence_trace.data(),
              sizeof(double) * h->result.evidence_trace.size());
  return SBTK_OK;
}

/* ---- kernels ---------------------------------------------------------- */

sbtk_status sbtk_kernel_parse(const char* json_text, sbtk_kernel** out) {
  if (auto st = require(json_text && out, "null argument")) return st;
  return guarded([&] { *out = new sbtk_kernel{sbtk::kernel_from_json(json_text)}; });
}

sbtk_status sbtk_kernel_to_json(const sbtk_kernel* h, char** out) {
  if (auto st = require(h && out, "null argument")) return st;
  return guarded([&] {
    const std::string text = sbtk::kernel_to_json(h->spec);
    *out = new char[text.size() + 1];
    std::memcpy(*out, text.c_str(), text.size() + 1);
  });
}

sbtk_status sbtk_kernel_grid_make(int q, double freq_lo, double freq_hi, double sigma,
                                  sbtk_kernel** out) {
  if (auto st = require(out != nullptr, "null argument")) return st;
  return guarded([&] { *out = new sbtk_kernel{sbtk::grid_make(q, freq_lo, freq_hi, sigma)}; });
}

void sbtk_kernel_destroy(sbtk_kernel* h) { delete h; }

sbtk_status sbtk_kernel_eval(const sbtk_kernel* h, const double* x, const double* xp, int dim,
                             double* out) {
  if (auto st = require(h && x && xp && out && dim > 0, "bad arguments")) return st;
  return guarded([&] {
    *out = sbtk::kernel_eval(h->spec, Eigen::Map<const Eigen::VectorXd>(x, dim),
                             Eigen::Map<const Eigen::VectorXd>(xp, dim));
  });
}

sbtk_status sbtk_kernel_matrix(const sbtk_kernel* h, const double* X, int n, const double* X2,
                               int m, int dim, double* out) {
  if (auto st = require(h && X && X2 && out && n > 0 && m > 0 && dim > 0, "bad arguments"))
    return st;
  return guarded([&] {
    copy_rowmajor(
        sbtk::kernel_matrix(h->spec, map_rowmajor(X, n, dim), map_rowmajor(X2, m, dim)), out);
  });
}

sbtk_status sbtk_kernel_spectral_density(const sbtk_kernel* h, double omega, double* out) {
  if (auto st = require(h && out, "null argument")) return st;
  return guarded([&] { *out = sbtk::spectral_density(h->spec, omega); });
}

sbtk_status sbtk_kernel_weight_count(const sbtk_kernel* h, int* out) {
  if (auto st = require(h && out, "null argument")) return st;
  *out = h->spec.weight_count();
  return SBTK_OK;
}

sbtk_status sbtk_kernel_get_weights(const sbtk_kernel* h, double* out) {
  if (auto st = require(h && out, "null argument")) return st;
  return guarded([&] {
    const Eigen::VectorXd w = sbtk::kernel_weights(h->spec);
    std::memcpy(out, w.data(), sizeof(double) * w.size());
  });
}

sbtk_status sbtk_kernel_set_weights(sbtk_kernel* h, const double* w, int len) {
  if (auto st = require(h && w && len >= 0, "bad arguments")) return st;
  return guarded(
      [&] { sbtk::set_kernel_weights(h->spec, Eigen::Map<const Eigen::VectorXd>(w, len)); });
}

/* ---- GP ----------------------------------------------------------------- */

sbtk_status sbtk_gp_evidence(const sbtk_kernel* kernel, double noise_var, const double* X, int n,
                             int dim, const double* y, double* log_evidence) {
  if (auto st = require(kernel && X && y && log_evidence && n > 0 && dim > 0, "bad arguments"))
    return st;
  return guarded([&] {
    sbtk::GpModel model{kernel->spec, noise_var};
    *log_evidence = sbtk::gp_evidence_log(map_rowmajor(X, n, dim),
                                          Eigen::Map<const Eigen::VectorXd>(y, n), model)
                        .log_value;
  });
}

sbtk_status sbtk_gp_predict(const sbtk_kernel* kernel, double noise_var, const double* X, int n,
                            int dim, const double* y, const double* X_star, int m, double* mean,
                            double* var) {
  if (auto st = require(kernel && X_star && mean && var && n >= 0 && m > 0 && dim > 0,
                        "bad arguments"))
    return st;
  return guarded([&] {
    sbtk::GpModel model{kernel->spec, noise_var};
    Eigen::MatrixXd Xm = n > 0 ? Eigen::MatrixXd(map_rowmajor(X, n, dim))
                               : Eigen::MatrixXd(0, dim);
    Eigen::VectorXd ym =
        n > 0 ? Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(y, n)) : Eigen::VectorXd(0);
    const sbtk::GpPosterior post =
        sbtk::gp_predict(Xm, ym, map_rowmajor(X_star, m, dim), model);
    std::memcpy(mean, post.mean.data(), sizeof(double) * m);
    for (int i = 0; i < m; ++i) var[i] = post.cov(i, i);
  });
}

sbtk_status sbtk_gp_fit(const sbtk_kernel* kernel, const double* X, int n, int dim,
                        const double* y, const char* solver, const sbtk_gp_options* opts,
                        sbtk_gp_result** out) {
  if (auto st = require(kernel && X && y && solver && out && n > 0 && dim > 0, "bad arguments"))
    return st;
  return guarded([&] {
    const std::string s(solver);
    sbtk::MkSolver which;
    if (s == "mm")
      which = sbtk::MkSolver::Mm;
    else if (s == "admm")
      which = sbtk::MkSolver::Admm;
    else if (s == "seq")
      which = sbtk::MkSolver::Sequential;
    else
      throw sbtk::DomainError("unknown solver: " + s + " (expected mm, admm or seq)");
    *out = new sbtk_gp_result{sbtk::gp_fit(kernel->spec, map_rowmajor(X, n, dim),
                                           Eigen::Map<const Eigen::VectorXd>(y, n), which,
                                           convert_gp_options(opts))};
  });
}

void sbtk_gp_result_destroy(sbtk_gp_result* h) { delete h; }

sbtk_status sbtk_gp_result_kernel(const sbtk_gp_result* h, sbtk_kernel** out) {
  if (auto st = require(h && out, "null argument")) return st;
  *out = new sbtk_kernel{h->result.kernel};
  return SBTK_OK;
}

sbtk_status sbtk_gp_result_noise_var(const sbtk_gp_result* h, double* out) {
  if (auto st = require(h && out, "null argument")) return st;
  *out = h->result.fit.noise_var;
  return SBTK_OK;
}

sbtk_status sbtk_gp_result_evidence(const sbtk_gp_result* h, double* out) {
  if (auto st = require(h && out, "null argument")) return st;
  *out = h->result.fit.final_evidence;
  return SBTK_OK;
}

sbtk_status sbtk_gp_result_converged(const sbtk_gp_result* h, int* out) {
  if (auto st = require(h && out, "null argument")) return st;
  *out = h->result.fit.trace.converged ? 1 : 0;
  return SBTK_OK;
}

sbtk_status sbtk_gp_result_active_count(const sbtk_gp_result* h, int* out) {
  if (auto st = require(h && out, "null argument")) return st;
  *out = static_cast<int>(h->result.fit.active.size());
  return SBTK_OK;
}

sbtk_status sbtk_gp_result_trace_len(const sbtk_gp_result* h, int* out) {
  if (auto st = require(h && out, "null argument")) return st;
  *out = static_cast<int>(h->result.fit.trace.objective.size());
  return SBTK_OK;
}

sbtk_status sbtk_gp_result_trace(const sbtk_gp_result* h, double* objective, int* active) {
  if (auto st = require(h && objective, "null argument")) return st;
  const auto& tr = h->result.fit.trace;
  std::memcpy(objective, tr.objective.data(), sizeof(double) * tr.objective.size());
  if (active)
    for (size_t i = 0; i < tr.active_weights.size(); ++i) active[i] = tr.active_weights[i];
  return SBTK_OK;
}

sbtk_status sbtk_gp_result_residuals(const sbtk_gp_result* h, double* primal, double* dual) {
  if (auto st = require(h && primal && dual, "null argument")) return st;
  *primal = h->result.fit.primal_residual;
  *dual = h->result.fit.dual_residual;
  return SBTK_OK;
}

/* ---- tensors / CPD -------------------------------------------------------- */

sbtk_status sbtk_tensor_create(const int* dims, int order, const int* indices,
                               const double* values, int nobs, sbtk_tensor** out) {
  if (auto st = require(dims && indices && values && out && order >= 2 && nobs > 0,
                        "bad arguments"))
    return st;
  return guarded([&] {
    sbtk::PartialTensor t;
    t.dims.assign(dims, dims + order);
    t.indices.resize(nobs, order);
    for (int o = 0; o < nobs; ++o)
      for (int p = 0; p < order; ++p) t.indices(o, p) = indices[o * order + p];
    t.values = Eigen::Map<const Eigen::VectorXd>(values, nobs);
    t.validate();
    *out = new sbtk_tensor{std::move(t)};
  });
}

sbtk_status sbtk_tensor_read(const char* path, sbtk_tensor** out) {
  if (auto st = require(path && out, "null argument")) return st;
  return guarded([&] { *out = new sbtk_tensor{sbtk::read_tensor(path)}; });
}

sbtk_status sbtk_tensor_write(const sbtk_tensor* h, const char* path) {
  if (auto st = require(h && path, "null argument")) return st;
  return guarded([&] { sbtk::write_tensor(h->tensor, path); });
}

void sbtk_tensor_destroy(sbtk_tensor* h) { delete h; }

sbtk_status sbtk_tensor_order(const sbtk_tensor* h, int* out) {
  if (auto st = require(h && out, "null argument")) return st;
  *out = h->tensor.order();
  return SBTK_OK;
}

sbtk_status sbtk_tensor_dims(const sbtk_tensor* h, int* dims) {
  if (auto st = require(h && dims, "null argument")) return st;
  for (int p = 0; p < h->tensor.order(); ++p) dims[p] = h->tensor.dims[p];
  return SBTK_OK;
}

sbtk_status sbtk_tensor_observed(const sbtk_tensor* h, int* out) {
  if (auto st = require(h && out, "null argument")) return st;
  *out = h->tensor.observed();
  return SBTK_OK;
}

sbtk_status sbtk_cpd_fit(const sbtk_tensor* data, int rank_bound, const sbtk_cpd_options* opts,
                         sbtk_cpd_result** out) {
  if (auto st = require(data && out, "null argument")) return st;
  return guarded([&] {
    *out = new sbtk_cpd_result{sbtk::cpd_fit(data->tensor, rank_bound, convert_cpd_options(opts))};
  });
}

void sbtk_cpd_result_destroy(sbtk_cpd_result* h) { delete h; }

sbtk_status sbtk_cpd_result_rank(const sbtk_cpd_result* h, int* out) {
  if (auto st = require(h && out, "null argument")) return st;
  *out = h->model.active_rank();
  return SBTK_OK;
}

sbtk_status sbtk_cpd_result_converged(const sbtk_cpd_result* h, int* out) {
  if (auto st = require(h && out, "null argument")) return st;
  *out = h->model.converged ? 1 : 0;
  return SBTK_OK;
}

sbtk_status sbtk_cpd_result_noise_precision(const sbtk_cpd_result* h, double* out) {
  if (auto st = require(h && out, "null argument")) return st;
  *out = h->model.beta_mean();
  return SBTK_OK;
}

sbtk_status sbtk_cpd_result_elbo_len(const sbtk_cpd_result* h, int* out) {
  if (auto st = require(h && out, "null argument")) return st;
  *out = static_cast<int>(h->model.elbo_trace.size());
  return SBTK_OK;
}

sbtk_status sbtk_cpd_result_elbo(const sbtk_cpd_result* h, double* out) {
  if (auto st = require(h && out, "null argument")) return st;
  std::memcpy(out, h->model.elbo_trace.data(), sizeof(double) * h->model.elbo_trace.size());
  return SBTK_OK;
}

sbtk_status sbtk_cpd_result_factor(const sbtk_cpd_result* h, int mode, double* out) {
  if (auto st = require(h && out, "null argument")) return st;
  if (mode < 0 || mode >= static_cast<int>(h->model.factor_mean.size())) {
    set_error("factor mode out of range");
    return SBTK_ERR_DOMAIN;
  }
  copy_rowmajor(h->model.factor_mean[mode], out);
  return SBTK_OK;
}

sbtk_status sbtk_cpd_complete(const sbtk_tensor* data, int rank_bound,
                              const sbtk_cpd_options* opts, sbtk_tensor** mean,
                              sbtk_tensor** variance, sbtk_cpd_result** model) {
  if (auto st = require(data && mean && variance, "null argument")) return st;
  return guarded([&] {
    sbtk::CpdCompletion comp =
        sbtk::cpd_complete(data->tensor, rank_bound, convert_cpd_options(opts));
    *mean = new sbtk_tensor{std::move(comp.mean)};
    *variance = new sbtk_tensor{std::move(comp.variance)};
    if (model) *model = new sbtk_cpd_result{std::move(comp.model)};
  });
}

/* ---- LWTA ------------------------------------------------------------------ */

sbtk_status sbtk_lwta_create(int input_dim, const int* blocks, const int* units, int n_layers,
                             int classes, double ibp_alpha, uint64_t seed, sbtk_lwta** out) {
  if (auto st = require(blocks && units && out && n_layers > 0, "bad arguments")) return st;
  return guarded([&] {
    std::vector<sbtk::LayerGeometry> geometry;
    for (int i = 0; i < n_layers; ++i) geometry.push_back({blocks[i], units[i]});
    *out = new sbtk_lwta{sbtk::lwta_create(input_dim, geometry, classes, ibp_alpha, seed)};
  });
}

void sbtk_lwta_destroy(sbtk_lwta* h) { delete h; }

sbtk_status sbtk_lwta_train(sbtk_lwta* h, const double* X, int n, int dim, const int* labels,
                            const sbtk_lwta_train_options* opts, double* elbo_trace,
                            int trace_cap, int* steps, double* final_elbo) {
  if (auto st = require(h && X && labels && n > 0 && dim > 0, "bad arguments")) return st;
  return guarded([&] {
    sbtk::TrainConfig cfg;
    if (opts) {
      if (opts->learning_rate > 0.0) cfg.learning_rate = opts->learning_rate;
      if (opts->epochs > 0) cfg.epochs = opts->epochs;
      if (opts->batch_size > 0) cfg.batch_size = opts->batch_size;
      if (opts->gs_temperature > 0.0) cfg.gs_temperature = opts->gs_temperature;
      if (opts->rb_temperature > 0.0) cfg.rb_temperature = opts->rb_temperature;
      cfg.seed = opts->seed;
    }
    Eigen::VectorXi y(n);
    for (int i = 0; i < n; ++i) y[i] = labels[i];
    const sbtk::TrainResult result = sbtk::lwta_train(h->net, map_rowmajor(X, n, dim), y, cfg);
    if (steps) *steps = static_cast<int>(result.elbo_trace.size());
    if (elbo_trace) {
      const int count = std::min<int>(trace_cap, static_cast<int>(result.elbo_trace.size()));
      for (int i = 0; i < count; ++i) elbo_trace[i] = result.elbo_trace[i];
    }
    if (final_elbo && !result.elbo_trace.empty()) *final_elbo = result.elbo_trace.back();
  });
}

sbtk_status sbtk_lwta_predict(const sbtk_lwta* h, const double* X, int n, int dim, int mode,
                              uint64_t seed, int* labels, double* probs) {
  if (auto st = require(h && X && labels && n > 0 && dim > 0, "bad arguments")) return st;
  return guarded([&] {
    sbtk::Rng rng(seed);
    const sbtk::ForwardMode fm =
        mode == 1 ? sbtk::ForwardMode::TestSample : sbtk::ForwardMode::TestArgmax;
    const sbtk::LwtaForward fwd =
        sbtk::lwta_forward(h->net, map_rowmajor(X, n, dim), rng, fm);
    for (int r = 0; r < n; ++r) {
      int best = 0;
      fwd.class_probs.row(r).maxCoeff(&best);
      labels[r] = best;
    }
    if (probs) copy_rowmajor(fwd.class_probs, probs);
  });
}

sbtk_status sbtk_lwta_prune(sbtk_lwta* h, double tau, double* retained_fraction) {
  if (auto st = require(h != nullptr, "null argument")) return st;
  return guarded([&] {
    const sbtk::PruneStats stats = sbtk::lwta_prune(h->net, tau);
    if (retained_fraction)
      for (size_t i = 0; i < stats.retained_fraction.size(); ++i)
        retained_fraction[i] = stats.retained_fraction[i];
  });
}

sbtk_status sbtk_lwta_layer_count(const sbtk_lwta* h, int* out) {
  if (auto st = require(h && out, "null argument")) return st;
  *out = static_cast<int>(h->net.layers.size());
  return SBTK_OK;
}

sbtk_status sbtk_lwta_bit_report(const sbtk_lwta* h, int layer, int ceiling, int* hist,
                                 double* mean_bits) {
  if (auto st = require(h && hist && mean_bits && ceiling > 0, "bad arguments")) return st;
  return guarded([&] {
    const sbtk::BitReport report = sbtk::lwta_bit_report(h->net, ceiling);
    if (layer < 0 || layer >= static_cast<int>(report.histogram.size()))
      throw sbtk::DomainError("bit report layer out of range");
    for (int b = 0; b <= ceiling; ++b) hist[b] = report.histogram[layer][b];
    *mean_bits = report.mean_bits[layer];
  });
}

sbtk_status sbtk_lwta_save(const sbtk_lwta* h, const char* path) {
  if (auto st = require(h && path, "null argument")) return st;
  return guarded([&] { sbtk::lwta_save(h->net, path); });
}

sbtk_status sbtk_lwta_load(const char* path, sbtk_lwta** out) {
  if (auto st = require(path && out, "null argument")) return st;
  return guarded([&] { *out = new sbtk_lwta{sbtk::lwta_load(path)}; });
}

/* ---- metrics ---------------------------------------------------------------- */

sbtk_status sbtk_metrics(const double* y_true, const double* y_pred, int n, double* mse,
                         double* mape, int* mape_excluded) {
  if (auto st = require(y_true && y_pred && mse && mape && n > 0, "bad arguments")) return st;
  return guarded([&] {
    const sbtk::Metrics m = sbtk::compute_metrics(Eigen::Map<const Eigen::VectorXd>(y_true, n),
                                                  Eigen::Map<const Eigen::VectorXd>(y_pred, n));
    *mse = m.mse;
    *mape = m.mape;
    if (mape_excluded) *mape_excluded = m.mape_excluded;
  });
}

}  // extern "C"

#include "sbtk/gpinfer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "sbtk/errors.hpp"

namespace sbtk {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112353;

bool conditioning_flag(const Eigen::MatrixXd& chol_l) {
  const double dmax = chol_l.diagonal().maxCoeff();
  const double dmin = chol_l.diagonal().minCoeff();
  return dmin <= 0.0 || (dmax / dmin) * (dmax / dmin) > 1e12;
}

Eigen::MatrixXd assemble_c(const std::vector<Eigen::MatrixXd>& Ks, const Eigen::VectorXd& alpha,
                           double v) {
  if (Ks.empty()) throw DomainError("at least one subkernel Gram is required");
  if (static_cast<size_t>(alpha.size()) != Ks.size())
    throw DomainError("weight length must match subkernel count");
  const int n = static_cast<int>(Ks[0].rows());
  Eigen::MatrixXd C = v * Eigen::MatrixXd::Identity(n, n);
  for (size_t i = 0; i < Ks.size(); ++i) C.noalias() += alpha[static_cast<int>(i)] * Ks[i];
  return C;
}

Eigen::LLT<Eigen::MatrixXd> chol_or_throw(const Eigen::MatrixXd& C, const char* where) {
  Eigen::LLT<Eigen::MatrixXd> llt(C);
  if (llt.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << where << ": covariance factorization failed (trace=" << C.trace() << ")";
    throw NumericalError(msg.str());
  }
  return llt;
}

double logdet_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
}

int count_active(const Eigen::VectorXd& alpha, double eps_w) {
  const double amax = alpha.size() ? alpha.maxCoeff() : 0.0;
  if (amax <= 0.0) return 0;
  int n = 0;
  for (int i = 0; i < alpha.size(); ++i)
    if (alpha[i] >= eps_w * amax) ++n;
  return n;
}

std::vector<int> active_indices(const Eigen::VectorXd& alpha, double eps_w) {
  std::vector<int> idx;
  const double amax = alpha.size() ? alpha.maxCoeff() : 0.0;
  if (amax <= 0.0) return idx;
  for (int i = 0; i < alpha.size(); ++i)
    if (alpha[i] >= eps_w * amax) idx.push_back(i);
  return idx;
}

// Final model-selection pass shared by all solvers: a weight is kept only if
// zeroing it raises l = -2 log evidence + const by more than the BIC cost of
// one parameter (log N). Stragglers that fit noise at the chi-square scale
// fall below that bar; generating components exceed it by orders of
// magnitude. Runs outside the per-iteration trace, so solver monotonicity
// contracts are untouched.
void bic_sparsify(const std::vector<Eigen::MatrixXd>& Ks, const Eigen::VectorXd& y,
                  Eigen::VectorXd& alpha, double v, double* objective) {
  const double allowance = std::log(static_cast<double>(y.size()));
  double current = *objective;
  bool changed = true;
  while (changed) {
    changed = false;
    int best_i = -1;
    double best_obj = 0.0;
    for (int i = 0; i < alpha.size(); ++i) {
      if (alpha[i] <= 0.0) continue;
      Eigen::VectorXd trial = alpha;
      trial[i] = 0.0;
      double obj;
      try {
        obj = mk_objective(Ks, y, trial, v);
      } catch (const NumericalError&) {
        continue;
      }
      if (obj <= current + allowance && (best_i < 0 || obj < best_obj)) {
        best_i = i;
        best_obj = obj;
      }
    }
    if (best_i >= 0) {
      alpha[best_i] = 0.0;
      current = best_obj;
      changed = true;
    }
  }
  *objective = current;
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

EvidenceValue gp_evidence_log_gram(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, double v) {
  if (K.rows() != K.cols() || K.rows() != y.size())
    throw DomainError("gram/target dimensions must agree");
  if (y.size() < 1) throw DomainError("evidence requires at least one observation");
  if (!(v > 0.0)) throw DomainError("noise variance must be positive");
  Eigen::MatrixXd C = K;
  C.diagonal().array() += v;
  const auto llt = chol_or_throw(C, "gp_evidence_log");
  const Eigen::MatrixXd l_factor = llt.matrixL();
  EvidenceValue ev;
  ev.log_value =
      -0.5 * (y.size() * kLog2Pi + logdet_from_llt(llt) + y.dot(llt.solve(y)));
  ev.conditioning_warning = conditioning_flag(l_factor);
  return ev;
}

EvidenceValue gp_evidence_log(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const GpModel& model) {
  model.kernel.validate();
  if (X.rows() != y.size()) throw DomainError("input/target sizes must agree");
  return gp_evidence_log_gram(kernel_matrix(model.kernel, X), y, model.noise_var);
}

GpPosterior gp_predict_gram(const Eigen::MatrixXd& K_xx, const Eigen::MatrixXd& K_xs,
                            const Eigen::MatrixXd& K_ss, const Eigen::VectorXd& y, double v) {
  if (!(v > 0.0)) throw DomainError("noise variance must be positive");
  const int n = static_cast<int>(K_xx.rows());
  const int m = static_cast<int>(K_ss.rows());
  if (K_xx.cols() != n || K_xs.rows() != n || K_xs.cols() != m || K_ss.cols() != m ||
      y.size() != n)
    throw DomainError("prediction dimensions are inconsistent");

  GpPosterior post;
  if (n == 0) {
    post.mean = Eigen::VectorXd::Zero(m);
    post.cov = K_ss + v * Eigen::MatrixXd::Identity(m, m);
    return post;
  }
  Eigen::MatrixXd C = K_xx;
  C.diagonal().array() += v;
  const auto llt = chol_or_throw(C, "gp_predict");
  post.mean = K_xs.transpose() * llt.solve(y);
  post.cov = K_ss + v * Eigen::MatrixXd::Identity(m, m) - K_xs.transpose() * llt.solve(K_xs);
  post.cov = 0.5 * (post.cov + post.cov.transpose().eval());
  return post;
}

GpPosterior gp_predict(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const Eigen::MatrixXd& X_star, const GpModel& model) {
  model.kernel.validate();
  if (X.rows() != y.size()) throw DomainError("input/target sizes must agree");
  if (X.rows() > 0 && X.cols() != X_star.cols())
    throw DomainError("training and test input dimensions must agree");
  const Eigen::MatrixXd K_xx = kernel_matrix(model.kernel, X);
  const Eigen::MatrixXd K_xs = kernel_matrix(model.kernel, X, X_star);
  const Eigen::MatrixXd K_ss = kernel_matrix(model.kernel, X_star);
  return gp_predict_gram(K_xx, K_xs, K_ss, y, model.noise_var);
}

double mk_g(const std::vector<Eigen::MatrixXd>& Ks, const Eigen::VectorXd& y,
            const Eigen::VectorXd& alpha, double v) {
  const Eigen::MatrixXd C = assemble_c(Ks, alpha, v);
  const auto llt = chol_or_throw(C, "mk_g");
  return y.dot(llt.solve(y));
}

double mk_h(const std::vector<Eigen::MatrixXd>& Ks, const Eigen::VectorXd& alpha, double v) {
  const Eigen::MatrixXd C = assemble_c(Ks, alpha, v);
  const auto llt = chol_or_throw(C, "mk_h");
  return -logdet_from_llt(llt);
}

double mk_objective(const std::vector<Eigen::MatrixXd>& Ks, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& alpha, double v) {
  const Eigen::MatrixXd C = assemble_c(Ks, alpha, v);
  const auto llt = chol_or_throw(C, "mk_objective");
  return y.dot(llt.solve(y)) + logdet_from_llt(llt);
}

void mk_gradients(const std::vector<Eigen::MatrixXd>& Ks, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& alpha, double v, Eigen::VectorXd* grad_g,
                  Eigen::VectorXd* grad_h) {
  const int q = static_cast<int>(Ks.size());
  const Eigen::MatrixXd C = assemble_c(Ks, alpha, v);
  const auto llt = chol_or_throw(C, "mk_gradients");
  const Eigen::VectorXd r = llt.solve(y);  // C^{-1} y
  const int n = static_cast<int>(C.rows());
  const Eigen::MatrixXd Cinv = llt.solve(Eigen::MatrixXd::Identity(n, n));
  if (grad_g) {
    grad_g->resize(q + 1);
    for (int i = 0; i < q; ++i) (*grad_g)[i] = -r.dot(Ks[i] * r);
    (*grad_g)[q] = -r.squaredNorm();
  }
  if (grad_h) {
    grad_h->resize(q + 1);
    for (int i = 0; i < q; ++i) (*grad_h)[i] = -(Cinv.cwiseProduct(Ks[i])).sum();
    (*grad_h)[q] = -Cinv.trace();
  }
}

Eigen::VectorXd mk_default_init(int q, const Eigen::VectorXd& y) {
  const double scale = y.size() > 0 ? y.squaredNorm() / y.size() : 1.0;
  return Eigen::VectorXd::Constant(q, std::max(scale, 1e-12) / q);
}

double mk_default_noise(const Eigen::VectorXd& y) {
  const double mean = y.size() > 0 ? y.mean() : 0.0;
  const double var = y.size() > 1 ? (y.array() - mean).square().sum() / (y.size() - 1) : 1.0;
  return std::max(0.1 * var, 1e-6);
}

// ---------------------------------------------------------------------------
// gamma_fit
// ---------------------------------------------------------------------------

MkFit gamma_fit(const std::vector<Eigen::MatrixXd>& Ks, const Eigen::VectorXd& y, double v,
                const MkSolverOptions& opts) {
  Stopwatch watch;
  if (!(v >= opts.v_min)) throw DomainError("gamma_fit requires v >= v_min");
  const int q = static_cast<int>(Ks.size());
  const int n = static_cast<int>(y.size());
  if (q < 1) throw DomainError("gamma_fit requires Q >= 1");

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(q);
  MkFit out;
  double prev_obj = mk_objective(Ks, y, alpha, v);

  const double log_lo = std::log(1e-12), log_hi = std::log(1e6);
  for (int sweep = 0; sweep < opts.max_iters; ++sweep) {
    for (int i = 0; i < q; ++i) {
      // C_{-i} via downdate of the current weight.
      Eigen::VectorXd alpha_minus = alpha;
      alpha_minus[i] = 0.0;
      const Eigen::MatrixXd Cmi = assemble_c(Ks, alpha_minus, v);
      const auto llt = chol_or_throw(Cmi, "gamma_fit");
      const double logdet_cmi = logdet_from_llt(llt);

      // Whiten: C(a) = L (I + a M) L', M = L^{-1} K_i L^{-T}.
      const Eigen::MatrixXd l_factor = llt.matrixL();
      const Eigen::MatrixXd B =
          l_factor.triangularView<Eigen::Lower>().solve(Ks[i]);
      Eigen::MatrixXd M =
          l_factor.triangularView<Eigen::Lower>().solve(B.transpose());
      M = 0.5 * (M + M.transpose().eval());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
      Eigen::VectorXd d = es.eigenvalues().cwiseMax(0.0);
      const Eigen::VectorXd yt =
          es.eigenvectors().transpose() *
          l_factor.triangularView<Eigen::Lower>().solve(y);

      // Exact evidence restricted to coordinate i:
      //   L(a) = -1/2 [ n log 2pi + logdet C_{-i} + sum log(1 + a d_j)
      //                 + sum yt_j^2/(1 + a d_j) ]
      auto evidence_1d = [&](double a) {
        double ld = 0.0, quad = 0.0;
        for (int j = 0; j < n; ++j) {
          const double t = 1.0 + a * d[j];
          ld += std::log(t);
          quad += yt[j] * yt[j] / t;
        }
        return -0.5 * (n * kLog2Pi + logdet_cmi + ld + quad);
      };

      // Coarse log-scale scan to bracket, then golden-section refinement.
      const int scan_points = 49;
      double best_t = log_lo;
      double best_val = evidence_1d(std::exp(log_lo));
      for (int sidx = 1; sidx < scan_points; ++sidx) {
        const double t = log_lo + (log_hi - log_lo) * sidx / (scan_points - 1);
        const double val = evidence_1d(std::exp(t));
        if (val > best_val) {
          best_val = val;
          best_t = t;
        }
      }
      const double spacing = (log_hi - log_lo) / (scan_points - 1);
      double lo = std::max(log_lo, best_t - spacing);
      double hi = std::min(log_hi, best_t + spacing);
      const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
      double t1 = hi - gr * (hi - lo), t2 = lo + gr * (hi - lo);
      double f1 = evidence_1d(std::exp(t1)), f2 = evidence_1d(std::exp(t2));
      for (int gs = 0; gs < 80 && hi - lo > 1e-12; ++gs) {
        if (f1 < f2) {
          lo = t1;
          t1 = t2;
          f1 = f2;
          t2 = lo + gr * (hi - lo);
          f2 = evidence_1d(std::exp(t2));
        } else {
          hi = t2;
          t2 = t1;
          f2 = f1;
          t1 = hi - gr * (hi - lo);
          f1 = evidence_1d(std::exp(t1));
        }
      }
      double a_star = std::exp(0.5 * (lo + hi));
      double f_star = evidence_1d(a_star);

      // Explicit candidates: zero (preferred on ties) and the current weight.
      const double f_zero = evidence_1d(0.0);
      const double f_curr = evidence_1d(alpha[i]);
      if (f_curr > f_star) {
        a_star = alpha[i];
        f_star = f_curr;
      }
      if (f_zero >= f_star - 1e-10 * (1.0 + std::fabs(f_zero))) a_star = 0.0;
      alpha[i] = a_star;
    }

    const double obj = mk_objective(Ks, y, alpha, v);
    out.trace.objective.push_back(obj);
    out.trace.active_weights.push_back(count_active(alpha, opts.epsilon_w));
    const double rel = std::fabs(prev_obj - obj) / (1.0 + std::fabs(obj));
    prev_obj = obj;
    if (rel < opts.tol) {
      out.trace.converged = true;
      break;
    }
  }

  bic_sparsify(Ks, y, alpha, v, &prev_obj);
  out.weights = alpha;
  out.noise_var = v;
  out.final_objective = prev_obj;
  out.final_evidence = -0.5 * (prev_obj + n * kLog2Pi);
  out.active = active_indices(alpha, opts.epsilon_w);
  out.trace.seconds = watch.seconds();
  return out;
}

// ---------------------------------------------------------------------------
// mm_fit
// ---------------------------------------------------------------------------

namespace {

// Minimize phi(eta) = g(eta) - grad_h_k . eta over the box eta >= lower,
// starting from eta_k: projected gradient with Barzilai-Borwein steps and an
// Armijo backtracking safeguard.
Eigen::VectorXd mm_subproblem(const std::vector<Eigen::MatrixXd>& Ks, const Eigen::VectorXd& y,
                              const Eigen::VectorXd& eta_k, const Eigen::VectorXd& grad_h_k,
                              const Eigen::VectorXd& lower, const MkSolverOptions& opts) {
  const int q = static_cast<int>(Ks.size());
  auto phi = [&](const Eigen::VectorXd& eta) {
    return mk_g(Ks, y, eta.head(q), eta[q]) - grad_h_k.dot(eta);
  };
  auto grad_phi = [&](const Eigen::VectorXd& eta) {
    Eigen::VectorXd gg;
    mk_gradients(Ks, y, eta.head(q), eta[q], &gg, nullptr);
    return Eigen::VectorXd(gg - grad_h_k);
  };
  auto project = [&](Eigen::VectorXd eta) {
    for (int i = 0; i <= q; ++i) eta[i] = std::max(eta[i], lower[i]);
    return eta;
  };

  Eigen::VectorXd eta = eta_k;
  double f = phi(eta);
  Eigen::VectorXd grad = grad_phi(eta);
  Eigen::VectorXd eta_prev = eta, grad_prev = grad;
  double step = 1.0 / std::max(1.0, grad.cwiseAbs().maxCoeff());
  for (int it = 0; it < opts.inner_max_iters; ++it) {
    if (it > 0) {
      const Eigen::VectorXd s = eta - eta_prev;
      const Eigen::VectorXd g_diff = grad - grad_prev;
      const double sg = s.dot(g_diff);
      if (sg > 0.0) step = std::min(std::max(s.squaredNorm() / sg, 1e-12), 1e12);
    }
    bool accepted = false;
    for (int bt = 0; bt < 40; ++bt) {
      const Eigen::VectorXd cand = project(eta - step * grad);
      const Eigen::VectorXd diff = cand - eta;
      if (diff.cwiseAbs().maxCoeff() == 0.0) break;
      double f_cand;
      try {
        f_cand = phi(cand);
      } catch (const NumericalError&) {
        step *= 0.25;  // stepped outside the PD region; shrink
        continue;
      }
      if (f_cand <= f + 1e-4 * grad.dot(diff)) {
        eta_prev = eta;
        grad_prev = grad;
        eta = cand;
        f = f_cand;
        grad = grad_phi(eta);
        accepted = true;
        break;
      }
      step *= 0.25;
    }
    if (!accepted) break;
    const Eigen::VectorXd fixed_point_gap = eta - project(eta - grad);
    if (fixed_point_gap.cwiseAbs().maxCoeff() <= opts.inner_tol * (1.0 + eta.cwiseAbs().maxCoeff()))
      break;
  }
  return eta;
}

}  // namespace

MkFit mm_fit(const std::vector<Eigen::MatrixXd>& Ks, const Eigen::VectorXd& y,
             const Eigen::VectorXd& alpha0, double v0, const MkSolverOptions& opts) {
  Stopwatch watch;
  const int q = static_cast<int>(Ks.size());
  const int n = static_cast<int>(y.size());
  if (static_cast<int>(alpha0.size()) != q) throw DomainError("mm_fit init length mismatch");
  if (alpha0.size() > 0 && !(alpha0.minCoeff() >= 0.0))
    throw DomainError("mm_fit requires nonnegative initial weights");
  if (!(v0 >= opts.v_min)) throw DomainError("mm_fit requires v0 >= v_min");

  Eigen::VectorXd eta(q + 1);
  eta.head(q) = alpha0;
  eta[q] = v0;
  Eigen::VectorXd lower = Eigen::VectorXd::Zero(q + 1);
  lower[q] = opts.v_min;
  if (!opts.learn_noise) lower[q] = v0;  // clamp from below; see fixed handling next

  MkFit out;
  double obj = mk_objective(Ks, y, eta.head(q), eta[q]);
  for (int it = 0; it < opts.max_iters; ++it) {
    Eigen::VectorXd grad_h;
    mk_gradients(Ks, y, eta.head(q), eta[q], nullptr, &grad_h);
    if (!opts.learn_noise) grad_h[q] = 0.0;

    Eigen::VectorXd eta_next = mm_subproblem(Ks, y, eta, grad_h, lower, opts);
    if (!opts.learn_noise) eta_next[q] = v0;
    double obj_next = mk_objective(Ks, y, eta_next.head(q), eta_next[q]);

    // zero-polish: small weights decay slowly under the majorized steps, but
    // snapping one to zero is a plain feasible move; keep it whenever the true
    // objective does not increase
    {
      const double amax = eta_next.head(q).maxCoeff();
      for (int i = 0; i < q; ++i) {
        if (eta_next[i] <= 0.0 || eta_next[i] > 1e-2 * amax) continue;
        Eigen::VectorXd trial = eta_next;
        trial[i] = 0.0;
        double obj_trial;
        try {
          obj_trial = mk_objective(Ks, y, trial.head(q), trial[q]);
        } catch (const NumericalError&) {
          continue;
        }
        if (obj_trial <= obj_next + 1e-12 * (1.0 + std::fabs(obj_next))) {
          eta_next = trial;
          obj_next = obj_trial;
        }
      }
    }

    // The subproblem starts at eta and only accepts descent of the surrogate,
    // so obj_next <= obj up to rounding.
    if (obj_next > obj + 1e-12 * (1.0 + std::fabs(obj))) {
      out.trace.objective.push_back(obj);
      out.trace.active_weights.push_back(count_active(eta.head(q), opts.epsilon_w));
      out.trace.converged = true;
      break;
    }
    eta = eta_next;
    const double rel = std::fabs(obj - obj_next) / (1.0 + std::fabs(obj_next));
    obj = obj_next;
    out.trace.objective.push_back(obj);
    out.trace.active_weights.push_back(count_active(eta.head(q), opts.epsilon_w));
    if (rel < opts.tol) {
      out.trace.converged = true;
      break;
    }
  }

  Eigen::VectorXd alpha_final = eta.head(q);
  bic_sparsify(Ks, y, alpha_final, eta[q], &obj);
  out.weights = alpha_final;
  out.noise_var = eta[q];
  out.final_objective = obj;
  out.final_evidence = -0.5 * (obj + n * kLog2Pi);
  out.active = active_indices(out.weights, opts.epsilon_w);
  out.trace.seconds = watch.seconds();
  return out;
}

// ---------------------------------------------------------------------------
// admm_fit
// ---------------------------------------------------------------------------

namespace detail {

Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, int max_iters) {
  const int m = static_cast<int>(A.cols());
  Eigen::VectorXd x = Eigen::VectorXd::Zero(m);
  std::vector<bool> passive(m, false);
  const double tol = 1e-12 * A.cwiseAbs().maxCoeff() * std::max(1.0, b.cwiseAbs().maxCoeff());

  for (int outer = 0; outer < max_iters; ++outer) {
    const Eigen::VectorXd w = A.transpose() * (b - A * x);
    int best = -1;
    double best_w = tol;
    for (int i = 0; i < m; ++i)
      if (!passive[i] && w[i] > best_w) {
        best_w = w[i];
        best = i;
      }
    if (best < 0) break;
    passive[best] = true;

    for (int inner = 0; inner < max_iters; ++inner) {
      std::vector<int> pidx;
      for (int i = 0; i < m; ++i)
        if (passive[i]) pidx.push_back(i);
      Eigen::MatrixXd Ap(A.rows(), pidx.size());
      for (size_t c = 0; c < pidx.size(); ++c) Ap.col(c) = A.col(pidx[c]);
      const Eigen::VectorXd zp =
          (Ap.transpose() * Ap + 1e-14 * Eigen::MatrixXd::Identity(pidx.size(), pidx.size()))
              .ldlt()
              .solve(Ap.transpose() * b);
      bool all_pos = true;
      for (int c = 0; c < zp.size(); ++c)
        if (zp[c] <= 0.0) all_pos = false;
      if (all_pos) {
        x.setZero();
        for (size_t c = 0; c < pidx.size(); ++c) x[pidx[c]] = zp[c];
        break;
      }
      double step = 1.0;
      for (size_t c = 0; c < pidx.size(); ++c) {
        if (zp[c] <= 0.0) {
          const double xi = x[pidx[c]];
          step = std::min(step, xi / (xi - zp[c]));
        }
      }
      for (size_t c = 0; c < pidx.size(); ++c) {
        x[pidx[c]] += step * (zp[c] - x[pidx[c]]);
        if (x[pidx[c]] <= 1e-14) {
          x[pidx[c]] = 0.0;
          passive[pidx[c]] = false;
        }
      }
    }
  }
  return x;
}

namespace {

// Conjugate gradients on the Newton system
//   S^{-1} D S^{-1} + (rho/2)(D C^2 + C^2 D) = -G
// over symmetric matrices with the Frobenius inner product.
Eigen::MatrixXd newton_direction_cg(const Eigen::MatrixXd& Sinv, const Eigen::MatrixXd& C2,
                                    double rho, const Eigen::MatrixXd& G, int max_iters) {
  auto hess_apply = [&](const Eigen::MatrixXd& D) {
    Eigen::MatrixXd out = Sinv * D * Sinv;
    out.noalias() += 0.5 * rho * (D * C2 + C2 * D);
    return out;
  };
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(G.rows(), G.cols());
  Eigen::MatrixXd r = -G;  // b - H x with x = 0
  Eigen::MatrixXd p = r;
  double rho_old = r.squaredNorm();
  const double tol2 = 1e-20 * std::max(1.0, rho_old);
  for (int it = 0; it < max_iters && rho_old > tol2; ++it) {
    const Eigen::MatrixXd hp = hess_apply(p);
    const double denom = (p.array() * hp.array()).sum();
    if (denom <= 0.0) break;
    const double step = rho_old / denom;
    x += step * p;
    r -= step * hp;
    const double rho_new = r.squaredNorm();
    p = r + (rho_new / rho_old) * p;
    rho_old = rho_new;
  }
  return 0.5 * (x + x.transpose().eval());
}

}  // namespace

Eigen::MatrixXd admm_s_update(const Eigen::MatrixXd& S0, const Eigen::MatrixXd& C,
                              const Eigen::MatrixXd& R, const Eigen::VectorXd& y, double rho,
                              int max_newton) {
  const int n = static_cast<int>(C.rows());
  const Eigen::MatrixXd C2 = C * C;
  const Eigen::MatrixXd yyT = y * y.transpose();
  auto f_s = [&](const Eigen::MatrixXd& Sm, const Eigen::LLT<Eigen::MatrixXd>& llt) {
    return y.dot(Sm * y) - logdet_from_llt(llt) + 0.5 * rho * (Sm * C - R).squaredNorm();
  };
  Eigen::MatrixXd S = S0;
  Eigen::LLT<Eigen::MatrixXd> llt_s(S);
  if (llt_s.info() != Eigen::Success) throw NumericalError("admm S-update needs a PD start");
  double f_cur = f_s(S, llt_s);
  for (int newton = 0; newton < max_newton; ++newton) {
    const Eigen::MatrixXd Sinv = llt_s.solve(Eigen::MatrixXd::Identity(n, n));
    Eigen::MatrixXd G = yyT - Sinv + rho * (S * C - R) * C;
    G = 0.5 * (G + G.transpose().eval());
    if (G.norm() <= 1e-10 * std::max(1.0, yyT.norm())) break;
    const Eigen::MatrixXd D = newton_direction_cg(Sinv, C2, rho, G, 8 * n);
    double t = 1.0;
    bool moved = false;
    for (int bt = 0; bt < 60; ++bt) {
      Eigen::MatrixXd S_cand = S + t * D;
      Eigen::LLT<Eigen::MatrixXd> llt_cand(S_cand);
      if (llt_cand.info() == Eigen::Success) {
        const double f_cand = f_s(S_cand, llt_cand);
        if (f_cand <= f_cur + 1e-4 * t * (G.array() * D.array()).sum()) {
          S = std::move(S_cand);
          llt_s = std::move(llt_cand);
          f_cur = f_cand;
          moved = true;
          break;
        }
      }
      t *= 0.5;
    }
    if (!moved) break;
  }
  return S;
}

}  // namespace detail

MkFit admm_fit(const std::vector<Eigen::MatrixXd>& Ks, const Eigen::VectorXd& y,
               const Eigen::VectorXd& alpha0, double v0, const MkSolverOptions& opts) {
  Stopwatch watch;
  const int q = static_cast<int>(Ks.size());
  const int n = static_cast<int>(y.size());
  if (static_cast<int>(alpha0.size()) != q) throw DomainError("admm_fit init length mismatch");
  if (!(v0 >= opts.v_min)) throw DomainError("admm_fit requires v0 >= v_min");

  Eigen::VectorXd alpha = alpha0;
  double v = v0;
  // penalty scaled with the matrix dimension; the damped eta step below keeps
  // the bilinear splitting from collapsing along the S-up/C-down direction
  double rho = opts.rho_init * n;
  const double eta_damping = 0.2;

  Eigen::MatrixXd C = assemble_c(Ks, alpha, v);
  Eigen::MatrixXd S = chol_or_throw(C, "admm init").solve(Eigen::MatrixXd::Identity(n, n));
  S = 0.5 * (S + S.transpose().eval());
  Eigen::MatrixXd U = Eigen::MatrixXd::Zero(n, n);

  // Columns of the eta least-squares system: vec(S K_i) and vec(S).
  const int cols = q + 1;
  Eigen::MatrixXd A_ls(n * n, cols);

  MkFit out;
  double primal = std::numeric_limits<double>::infinity();
  double dual = std::numeric_limits<double>::infinity();

  for (int it = 0; it < opts.max_iters; ++it) {
    // --- S update: min_S y'Sy - log det S + rho/2 ||SC - I + U||_F^2
    const Eigen::MatrixXd R = Eigen::MatrixXd::Identity(n, n) - U;
    S = detail::admm_s_update(S, C, R, y, rho, /*max_newton=*/8);

    // --- eta update: nonnegative least squares on vec(S C(eta)) = vec(I - U)
    for (int i = 0; i < q; ++i) {
      const Eigen::MatrixXd SK = S * Ks[i];
      A_ls.col(i) = Eigen::Map<const Eigen::VectorXd>(SK.data(), n * n);
    }
    A_ls.col(q) = Eigen::Map<const Eigen::VectorXd>(S.data(), n * n);
    Eigen::MatrixXd target = R;  // I - U
    Eigen::VectorXd b_ls = Eigen::Map<const Eigen::VectorXd>(target.data(), n * n);
    // Shift v by its floor so the solve is a plain NNLS.
    b_ls -= opts.v_min * A_ls.col(q);
    const Eigen::VectorXd eta_star = detail::nnls(A_ls, b_ls);
    Eigen::VectorXd eta_shift(q + 1);
    eta_shift.head(q) = alpha;
    eta_shift[q] = v - opts.v_min;
    eta_shift += eta_damping * (eta_star - eta_shift);
    alpha = eta_shift.head(q);
    v = opts.v_min + eta_shift[q];
    if (!opts.learn_noise) v = v0;

    const Eigen::MatrixXd C_new = assemble_c(Ks, alpha, v);
    dual = rho * (S * (C_new - C)).norm();
    C = C_new;

    // --- dual update
    const Eigen::MatrixXd gap = S * C - Eigen::MatrixXd::Identity(n, n);
    U += gap;
    primal = gap.norm();

    out.trace.objective.push_back(mk_objective(Ks, y, alpha, v));
    out.trace.active_weights.push_back(count_active(alpha, opts.epsilon_w));

    if (primal < opts.admm_primal_tol && dual < opts.admm_dual_tol) {
      out.trace.converged = true;
      break;
    }
    // Standard residual balancing for the scaled form.
    if (primal > 10.0 * dual) {
      rho *= 2.0;
      U *= 0.5;
    } else if (dual > 10.0 * primal) {
      rho *= 0.5;
      U *= 2.0;
    }
  }

  double final_obj = mk_objective(Ks, y, alpha, v);
  bic_sparsify(Ks, y, alpha, v, &final_obj);
  out.weights = alpha;
  out.noise_var = v;
  out.final_objective = final_obj;
  out.final_evidence = -0.5 * (final_obj + n * kLog2Pi);
  out.active = active_indices(alpha, opts.epsilon_w);
  out.primal_residual = primal;
  out.dual_residual = dual;
  out.trace.seconds = watch.seconds();
  return out;
}

GpFitResult gp_fit(const KernelSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                   MkSolver solver, const MkSolverOptions& opts) {
  spec.validate();
  if (spec.weight_count() == 0)
    throw DomainError("gp_fit requires a grid_sm or linear_combo kernel");
  const std::vector<Eigen::MatrixXd> Ks = subkernel_grams(spec, X);
  const int q = static_cast<int>(Ks.size());
  const Eigen::VectorXd alpha0 = mk_default_init(q, y);
  const double v0 = std::max(mk_default_noise(y), opts.v_min);

  MkFit fit;
  switch (solver) {
    case MkSolver::Mm: fit = mm_fit(Ks, y, alpha0, v0, opts); break;
    case MkSolver::Admm: fit = admm_fit(Ks, y, alpha0, v0, opts); break;
    case MkSolver::Sequential: fit = gamma_fit(Ks, y, v0, opts); break;
  }

  GpFitResult out;
  out.kernel = spec;
  set_kernel_weights(out.kernel, fit.weights);
  out.fit = fit;
  return out;
}

}  // namespace sbtk

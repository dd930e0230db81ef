#ifndef SBTK_GPINFER_HPP_
#define SBTK_GPINFER_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "sbtk/kernels.hpp"
#include "sbtk/linmodel.hpp"  // EvidenceValue

namespace sbtk {

inline constexpr double kNoiseVarFloor = 1e-10;  // v_min

struct GpModel {
  KernelSpec kernel;
  double noise_var = 0.1;  // v = beta^{-1}, >= kNoiseVarFloor; zero mean function
};

struct GpPosterior {
  Eigen::VectorXd mean;  // over y* (includes observation noise)
  Eigen::MatrixXd cov;
};

EvidenceValue gp_evidence_log(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const GpModel& model);
EvidenceValue gp_evidence_log_gram(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, double v);

GpPosterior gp_predict(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const Eigen::MatrixXd& X_star, const GpModel& model);
GpPosterior gp_predict_gram(const Eigen::MatrixXd& K_xx, const Eigen::MatrixXd& K_xs,
                            const Eigen::MatrixXd& K_ss, const Eigen::VectorXd& y, double v);

// ---- linear-multiple-kernel weight learning --------------------------------
//
// Evidence maximization over eta = [alpha; v] for C(eta) = sum alpha_i K_i + vI
// is min of l(eta) = g(eta) - h(eta), g = y'C^{-1}y, h = -log det C. Both g and
// h are convex, so the problem is a difference-of-convex program.

struct MkSolverOptions {
  int max_iters = 200;        // outer iterations / sweeps
  double tol = 1e-8;          // relative objective change
  double epsilon_w = 1e-6;    // active-weight threshold, relative to max weight
  double rho_init = 1.0;      // ADMM penalty parameter
  std::uint64_t seed = 0;
  double v_min = kNoiseVarFloor;
  bool learn_noise = true;    // mm/admm only; gamma_fit keeps v fixed
  int inner_max_iters = 50;   // MM subproblem projected-gradient cap
  double inner_tol = 1e-8;
  double admm_primal_tol = 1e-6;
  double admm_dual_tol = 1e-6;
};

struct FitTrace {
  std::vector<double> objective;  // l(eta) per outer iteration (after the update)
  std::vector<int> active_weights;
  double seconds = 0.0;
  bool converged = false;
};

struct MkFit {
  Eigen::VectorXd weights;
  double noise_var = 0.0;
  FitTrace trace;
  double final_objective = 0.0;   // l(eta)
  double final_evidence = 0.0;    // -(l + N log 2pi)/2
  std::vector<int> active;        // indices with alpha_i >= eps_w * max(alpha)
  double primal_residual = 0.0;   // admm only
  double dual_residual = 0.0;     // admm only
};

double mk_g(const std::vector<Eigen::MatrixXd>& Ks, const Eigen::VectorXd& y,
            const Eigen::VectorXd& alpha, double v);
double mk_h(const std::vector<Eigen::MatrixXd>& Ks, const Eigen::VectorXd& alpha, double v);
double mk_objective(const std::vector<Eigen::MatrixXd>& Ks, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& alpha, double v);
// Gradients of g and h over eta = [alpha; v]:
//   dg/da_i = -y'C^{-1}K_iC^{-1}y,  dg/dv = -||C^{-1}y||^2
//   dh/da_i = -tr(C^{-1}K_i),       dh/dv = -tr(C^{-1})
void mk_gradients(const std::vector<Eigen::MatrixXd>& Ks, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& alpha, double v, Eigen::VectorXd* grad_g,
                  Eigen::VectorXd* grad_h);

Eigen::VectorXd mk_default_init(int q, const Eigen::VectorXd& y);
double mk_default_noise(const Eigen::VectorXd& y);

// Cyclic coordinate ascent on the exact evidence decomposition
// L(alpha) = L(alpha_{-i}) + gamma(alpha_i): per coordinate a golden-section
// search on log alpha_i over [1e-12, 1e6] plus the explicit zero candidate
// (ties prefer zero). v stays fixed.
MkFit gamma_fit(const std::vector<Eigen::MatrixXd>& Ks, const Eigen::VectorXd& y, double v,
                const MkSolverOptions& opts = {});

// Majorization-minimization: h linearized at eta^k, convex subproblem solved by
// projected gradient with Armijo backtracking over the nonnegative orthant
// (v >= v_min). l is non-increasing across outer iterations.
MkFit mm_fit(const std::vector<Eigen::MatrixXd>& Ks, const Eigen::VectorXd& y,
             const Eigen::VectorXd& alpha0, double v0, const MkSolverOptions& opts = {});

// Scaled augmented-Lagrangian ADMM on
//   min y'Sy - log det S  s.t.  S C(eta) = I, alpha >= 0, v >= v_min.
// S-update by damped Newton (CG on the symmetric Hessian operator), eta-update
// by nonnegative least squares, dual U += SC - I.
MkFit admm_fit(const std::vector<Eigen::MatrixXd>& Ks, const Eigen::VectorXd& y,
               const Eigen::VectorXd& alpha0, double v0, const MkSolverOptions& opts = {});

enum class MkSolver { Mm, Admm, Sequential };

namespace detail {
// Lawson-Hanson nonnegative least squares: min ||A x - b||, x >= 0.
Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, int max_iters = 300);
// ADMM S-subproblem: min_S y'Sy - log det S + rho/2 ||SC - R||_F^2 over
// symmetric positive definite S, by damped Newton from S0.
Eigen::MatrixXd admm_s_update(const Eigen::MatrixXd& S0, const Eigen::MatrixXd& C,
                              const Eigen::MatrixXd& R, const Eigen::VectorXd& y, double rho,
                              int max_newton = 30);
}  // namespace detail

// Convenience wrapper: builds sub-Grams from a grid_sm / linear_combo spec,
// runs the requested solver from the default initialization, and returns the
// fit plus the spec with learned weights.
struct GpFitResult {
  KernelSpec kernel;
  MkFit fit;
};
GpFitResult gp_fit(const KernelSpec& spec, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                   MkSolver solver, const MkSolverOptions& opts = {});

}  // namespace sbtk

#endif  // SBTK_GPINFER_HPP_

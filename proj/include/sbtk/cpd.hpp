#ifndef SBTK_CPD_HPP_
#define SBTK_CPD_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "sbtk/rng.hpp"

namespace sbtk {

// Possibly incomplete P-D tensor: only the entries listed in `indices` are
// observed.
struct PartialTensor {
  std::vector<int> dims;                            // J_1 .. J_P
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> indices;  // nobs x P, 0-based
  Eigen::VectorXd values;                           // nobs

  int order() const { return static_cast<int>(dims.size()); }
  int observed() const { return static_cast<int>(values.size()); }
  std::int64_t total_entries() const;
  bool fully_observed() const { return observed() == total_entries(); }
  void validate() const;
};

// Posterior state of the Bayesian CP model: per-mode row-wise Gaussian factor
// posteriors, Gamma posteriors on the column precisions lambda_l = 1/zeta_l
// (shared across modes -- the grouped scale tying that nulls a rank-1 term)
// and on the noise precision beta.
struct CpdModel {
  int rank_bound = 0;  // initial L
  std::vector<Eigen::MatrixXd> factor_mean;               // per mode: J_p x L_active
  std::vector<std::vector<Eigen::MatrixXd>> factor_cov;   // per mode, per row: L_active^2
  Eigen::VectorXd lambda_shape, lambda_rate;              // per active column
  double beta_shape = 1e-6, beta_rate = 1e-6;
  std::vector<int> active_columns;                        // original column ids
  std::vector<double> elbo_trace;                         // one entry per sweep
  std::vector<int> prune_sweeps;                          // sweeps followed by a prune
  int sweeps = 0;
  bool converged = false;

  int active_rank() const { return static_cast<int>(active_columns.size()); }
  Eigen::VectorXd lambda_mean() const;
  double beta_mean() const { return beta_shape / beta_rate; }

  // Posterior mean / variance of the reconstruction at one index tuple.
  double reconstruct(const Eigen::VectorXi& index) const;
  double reconstruct_variance(const Eigen::VectorXi& index) const;
};

struct CpdOptions {
  int max_sweeps = 500;
  // Relative ELBO change per sweep. The scale indeterminacy of CP factors
  // leaves a slow rebalancing drift long after rank and reconstruction have
  // stabilized, so the default is deliberately modest.
  double tol = 1e-4;
  double prune_threshold = 1e-6;   // relative column power
  int prune_every = 5;
  std::uint64_t seed = 0;
  double a0 = 1e-6, b0 = 1e-6;     // Gamma prior on lambda_l
  double c0 = 1e-6, d0 = 1e-6;     // Gamma prior on beta
  int noise_damp_sweeps = 10;      // damped beta updates early on
  double noise_damp = 0.5;
  bool warn_stream = false;        // emit warnings to stderr
};

// SVD-based initialization of the factor posteriors (missing entries
// zero-filled for the unfoldings only), identity-scaled covariances, priors
// for the Gamma posteriors.
CpdModel cpd_init(const PartialTensor& data, int rank_bound, Rng& rng,
                  const CpdOptions& opts = {});

// One full mean-field sweep: factor rows mode by mode, then lambda, then beta.
void cpd_vi_step(CpdModel& model, const PartialTensor& data, const CpdOptions& opts = {});

double cpd_elbo(const CpdModel& model, const PartialTensor& data, const CpdOptions& opts = {});

// Remove columns whose posterior power falls below threshold * mean power.
// Returns the number of removed columns.
int cpd_prune(CpdModel& model, const PartialTensor& data, double threshold,
              const CpdOptions& opts = {});

CpdModel cpd_fit(const PartialTensor& data, int rank_bound, const CpdOptions& opts = {});

struct CpdCompletion {
  PartialTensor mean;      // fully dense
  PartialTensor variance;  // reconstruction variance + E[beta]^{-1}
  CpdModel model;
};
CpdCompletion cpd_complete(const PartialTensor& data, int rank_bound,
                           const CpdOptions& opts = {});

}  // namespace sbtk

#endif  // SBTK_CPD_HPP_

#ifndef SBTK_LINMODEL_HPP_
#define SBTK_LINMODEL_HPP_

#include <Eigen/Dense>
#include <vector>

namespace sbtk {

struct LinRegData {
  Eigen::MatrixXd X;  // N x L, rows are inputs
  Eigen::VectorXd y;  // N

  void validate() const;
  int n() const { return static_cast<int>(X.rows()); }
  int l() const { return static_cast<int>(X.cols()); }
};

struct LinRegPrior {
  Eigen::VectorXd alpha;  // per-coefficient precisions, strictly positive
  void validate() const;
};

struct LinRegPosterior {
  Eigen::VectorXd mean;   // mu = beta * Sigma * X^T y
  Eigen::MatrixXd cov;    // Sigma = (A + beta X^T X)^{-1}
  double noise_precision = 1.0;
};

struct EvidenceValue {
  double log_value = 0.0;
  bool conditioning_warning = false;  // condition-number proxy exceeded 1e12
  operator double() const { return log_value; }
};

LinRegPosterior blr_posterior(const LinRegData& data, const LinRegPrior& prior, double beta);

// log N(y; 0, beta^{-1} I + X A^{-1} X^T) via Cholesky of the N x N covariance.
EvidenceValue blr_evidence_log(const LinRegData& data, const LinRegPrior& prior, double beta);

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
};
Prediction blr_predict(const Eigen::VectorXd& x_star, const LinRegPosterior& post);

struct ArdOptions {
  int max_iters = 500;
  double tol = 1e-8;              // relative evidence change
  double epsilon_prune = 1e-8;    // prior variance below this is pruned
  bool learn_noise = true;        // jointly optimize beta unless fixed
  double beta_init = 0.0;         // 0 -> data-driven init
  double alpha_cap = 1e12;        // precision ceiling for pruned coefficients
};

struct ArdResult {
  LinRegPrior prior;                 // fitted precisions (capped for pruned ones)
  double beta = 1.0;
  std::vector<bool> pruned;          // fitted prior variance < epsilon_prune
  std::vector<double> evidence_trace;
  bool converged = false;
  int iterations = 0;
};

// Evidence maximization over the per-coefficient variances and (optionally)
// the noise precision. MacKay-style fixed-point steps with an EM fallback so
// the evidence trace is non-decreasing.
ArdResult ard_fit(const LinRegData& data, const ArdOptions& opts = {});

// log p(D | theta_MAP) - (L/2) log N
double bic_score(double loglik_at_map, int param_count, int sample_count);

}  // namespace sbtk

#endif  // SBTK_LINMODEL_HPP_

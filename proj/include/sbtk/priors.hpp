#ifndef SBTK_PRIORS_HPP_
#define SBTK_PRIORS_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "sbtk/rng.hpp"

namespace sbtk {

// Gaussian scale mixture family: theta ~ N(0, zeta), zeta ~ mixing law.
enum class GsmKind { StudentT, Laplacian, NormalJeffreys, GenHyperbolic, Horseshoe };

struct GsmSpec {
  GsmKind kind = GsmKind::StudentT;
  double a = 1.0;       // shape (Student t, Laplacian, GIG) / half-Cauchy scale of tau
  double b = 1.0;       // scale / rate (member dependent) / half-Cauchy scale of upsilon
  double order = 0.0;   // GIG order lambda, gen_hyperbolic only

  static GsmSpec student_t(double shape, double scale);
  static GsmSpec laplacian(double shape, double rate);
  static GsmSpec normal_jeffreys();
  static GsmSpec gen_hyperbolic(double a, double b, double order);
  static GsmSpec horseshoe(double a, double b);

  // Normal-Jeffreys is improper: its log-density is exposed only up to an
  // additive constant, and it cannot be sampled.
  bool is_normalized() const { return kind != GsmKind::NormalJeffreys; }
  std::string name() const;
  void validate() const;
};

// log p(theta). Closed forms for Student t / Laplacian / Normal-Jeffreys,
// adaptive Gauss-Kronrod over the log-transformed mixing variable for the
// generalized hyperbolic, nested quadrature for the horseshoe.
double gsm_log_density(const GsmSpec& spec, double theta);

// log of the grouped marginal with a single mixing scale shared by the whole
// vector: p(w) = Int prod_i N(w_i; 0, zeta) p(zeta) dzeta.
double grouped_gsm_log_density(const GsmSpec& spec, const Eigen::VectorXd& w);

// i.i.d. draws via the two-stage hierarchy (zeta from the mixing law, then a
// zero-mean Gaussian of variance zeta).
Eigen::VectorXd gsm_sample(const GsmSpec& spec, int n, Rng& rng);

// One draw of the mixing scale zeta.
double gsm_sample_scale(const GsmSpec& spec, Rng& rng);

// Indian buffet process, truncated stick-breaking realization.
struct IbpConfig {
  double alpha = 1.0;   // innovation / strength parameter
  int rows = 1;         // number of customers L
  int truncation = 100; // J_max

  void validate() const;
  // E[sum_j z_ij] under the truncated construction: alpha (1 - (alpha/(1+alpha))^Jmax).
  double mean_row_sum() const;
  // Analytic tail bound on the truncation error: (alpha/(1+alpha))^Jmax.
  double truncation_tail() const;
};

struct IbpDraw {
  Eigen::VectorXd sticks;                              // u_j ~ Beta(alpha, 1)
  Eigen::VectorXd probs;                               // pi_j = prod_{l<=j} u_l
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> Z;  // rows x Jmax
};

IbpDraw ibp_sample(const IbpConfig& cfg, Rng& rng);

}  // namespace sbtk

#endif  // SBTK_PRIORS_HPP_

#ifndef SBTK_SPECIAL_HPP_
#define SBTK_SPECIAL_HPP_

namespace sbtk {

double digamma(double x);
double trigamma(double x);
double log_beta(double a, double b);

// log K_nu(x) for x > 0, stable for very small and very large x.
double log_bessel_k(double nu, double x);

// KL( Kumaraswamy(a, b) || Beta(alpha, beta) ), infinite series truncated at
// `series_terms` (the series carries a factor (beta - 1) and vanishes for the
// Beta(alpha, 1) stick prior; the truncation remainder is O(B(m/a, b)/m) at
// m = series_terms + 1).
struct KumaraswamyBetaKl {
  double value;
  double d_a;  // partial derivative w.r.t. a
  double d_b;  // partial derivative w.r.t. b
};
KumaraswamyBetaKl kumaraswamy_beta_kl(double a, double b, double alpha, double beta,
                                      int series_terms = 10);

}  // namespace sbtk

#endif  // SBTK_SPECIAL_HPP_

// Test-only oracles, kept independent of the library implementation paths
// they check.
#ifndef SBTK_TESTS_ORACLES_HPP_
#define SBTK_TESTS_ORACLES_HPP_

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

// Multivariate Gaussian log density via eigendecomposition (the library uses
// Cholesky).
inline double mvn_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                         const Eigen::MatrixXd& cov) {
  const int n = static_cast<int>(x.size());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::VectorXd evals = es.eigenvalues();
  const Eigen::VectorXd centered = es.eigenvectors().transpose() * (x - mean);
  double logdet = 0.0, quad = 0.0;
  for (int i = 0; i < n; ++i) {
    logdet += std::log(evals[i]);
    quad += centered[i] * centered[i] / evals[i];
  }
  return -0.5 * (n * std::log(2.0 * M_PI) + logdet + quad);
}

// Composite Simpson rule on a fixed grid; deliberately not the adaptive
// Gauss-Kronrod scheme the library uses.
inline double simpson(const std::function<double(double)>& f, double a, double b, int intervals) {
  if (intervals % 2 == 1) ++intervals;
  const double h = (b - a) / intervals;
  double acc = f(a) + f(b);
  for (int i = 1; i < intervals; ++i) acc += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

// Marginal scale-mixture density Int (2 pi z)^{-d/2} e^{-s/(2z)} p_mix(z) dz
// by Simpson on the log grid.
inline double gsm_density_quadrature(const std::function<double(double)>& mixing_density, int d,
                                     double s, double t_lo = -46.0, double t_hi = 46.0,
                                     int intervals = 40000) {
  return simpson(
      [&](double t) {
        const double z = std::exp(t);
        const double g = std::pow(2.0 * M_PI * z, -0.5 * d) * std::exp(-0.5 * s / z);
        return g * mixing_density(z) * z;
      },
      t_lo, t_hi, intervals);
}

// Two-sided Kolmogorov-Smirnov statistic of a sample against a CDF.
inline double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (size_t i = 0; i < sample.size(); ++i) {
    const double c = cdf(sample[i]);
    d = std::max(d, std::fabs(c - static_cast<double>(i) / n));
    d = std::max(d, std::fabs(c - static_cast<double>(i + 1) / n));
  }
  return d;
}

// KS critical value at significance level `alpha` for sample size n.
inline double ks_critical(double alpha, double n) {
  return std::sqrt(-0.5 * std::log(alpha / 2.0)) / std::sqrt(n);
}

inline double sample_mean(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / x.size();
}

inline double excess_kurtosis(const std::vector<double>& x) {
  const double m = sample_mean(x);
  double m2 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = v - m;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m2 /= x.size();
  m4 /= x.size();
  return m4 / (m2 * m2) - 3.0;
}

// Central finite difference of a scalar function.
inline double central_diff(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace oracle

#endif  // SBTK_TESTS_ORACLES_HPP_

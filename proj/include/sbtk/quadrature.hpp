#ifndef SBTK_QUADRATURE_HPP_
#define SBTK_QUADRATURE_HPP_

#include <functional>

namespace sbtk {

struct QuadResult {
  double value = 0.0;
  double error_estimate = 0.0;
  int evaluations = 0;
  int segments = 0;
  bool converged = false;
};

// Adaptive Gauss-Kronrod 7-15 on [a, b]. Segments are bisected (worst error
// first) until sum of per-segment errors <= max(abs_tol, rel_tol * |I|).
QuadResult gk_adaptive(const std::function<double(double)>& f, double a, double b,
                       double abs_tol = 1e-10, double rel_tol = 1e-9,
                       int max_segments = 4000);

// Same, but throws NumericalError with diagnostics when not converged.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double abs_tol = 1e-10, double rel_tol = 1e-9,
                 int max_segments = 4000);

}  // namespace sbtk

#endif  // SBTK_QUADRATURE_HPP_

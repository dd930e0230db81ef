#include "sbtk/metrics.hpp"

#include <cmath>

#include "sbtk/errors.hpp"

namespace sbtk {

Metrics compute_metrics(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred) {
  if (y_true.size() == 0) throw DomainError("metrics require at least one point");
  if (y_true.size() != y_pred.size()) throw DomainError("metrics input lengths must match");

  Metrics m;
  m.mse = (y_true - y_pred).squaredNorm() / y_true.size();
  double ape_sum = 0.0;
  int counted = 0;
  for (int i = 0; i < y_true.size(); ++i) {
    if (y_true[i] == 0.0) {
      m.mape_excluded += 1;
      continue;
    }
    ape_sum += std::fabs((y_true[i] - y_pred[i]) / y_true[i]);
    counted += 1;
  }
  m.mape = counted > 0 ? 100.0 * ape_sum / counted : 0.0;
  return m;
}

}  // namespace sbtk

#ifndef SBTK_METRICS_HPP_
#define SBTK_METRICS_HPP_

#include <Eigen/Dense>

namespace sbtk {

struct Metrics {
  double mse = 0.0;
  double mape = 0.0;           // percent
  int mape_excluded = 0;       // zero-valued truths excluded from the MAPE
};

// MSE and MAPE = 100/n * sum |y - yhat| / |y| (zero truths excluded, counted).
Metrics compute_metrics(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred);

}  // namespace sbtk

#endif  // SBTK_METRICS_HPP_

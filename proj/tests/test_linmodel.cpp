#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sbtk/errors.hpp"
#include "sbtk/linmodel.hpp"
#include "sbtk/rng.hpp"
#include "support/oracles.hpp"

using namespace sbtk;

namespace {

LinRegData random_instance(int n, int l, Rng& rng) {
  LinRegData d;
  d.X.resize(n, l);
  d.y.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < l; ++j) d.X(i, j) = rng.normal();
    d.y[i] = rng.normal();
  }
  return d;
}

LinRegPrior random_prior(int l, Rng& rng) {
  LinRegPrior p;
  p.alpha.resize(l);
  for (int j = 0; j < l; ++j) p.alpha[j] = 0.2 + 3.0 * rng.uniform();
  return p;
}

}  // namespace

TEST_CASE("posterior with no data equals the prior") {
  LinRegData d;
  d.X.resize(0, 3);
  d.y.resize(0);
  LinRegPrior p{(Eigen::VectorXd(3) << 2.0, 0.5, 1.0).finished()};
  const LinRegPosterior post = blr_posterior(d, p, 1.0);
  CHECK(post.mean.norm() == 0.0);
  CHECK((post.cov - p.alpha.cwiseInverse().asDiagonal().toDenseMatrix()).norm() <= 1e-14);
}

TEST_CASE("one-dimensional hand case") {
  LinRegData d;
  d.X = Eigen::MatrixXd::Ones(1, 1);
  d.y = Eigen::VectorXd::Ones(1);
  LinRegPrior p{Eigen::VectorXd::Ones(1)};
  const LinRegPosterior post = blr_posterior(d, p, 1.0);
  CHECK(post.cov(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(post.mean[0] == doctest::Approx(0.5).epsilon(1e-12));

  // predictive at x* = 1: mean 0.5, variance 1 + 0.5
  const Prediction pred = blr_predict(Eigen::VectorXd::Ones(1), post);
  CHECK(pred.mean == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(pred.variance == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("halving beta compensates a duplicated observation") {
  // duplicating a row of X and its y while halving beta keeps the likelihood,
  // hence the posterior, unchanged
  Eigen::MatrixXd X(3, 2);
  X << 1.0, 0.5, -0.3, 2.0, 0.7, -1.2;
  Eigen::VectorXd y(3);
  y << 0.2, -0.4, 1.0;
  LinRegPrior prior{(Eigen::VectorXd(2) << 1.3, 0.7).finished()};

  LinRegData base{X, y};
  const LinRegPosterior post_base = blr_posterior(base, prior, 2.0);

  Eigen::MatrixXd X2(6, 2);
  X2 << X, X;
  Eigen::VectorXd y2(6);
  y2 << y, y;
  LinRegData doubled{X2, y2};
  const LinRegPosterior post_doubled = blr_posterior(doubled, prior, 1.0);

  CHECK((post_base.mean - post_doubled.mean).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((post_base.cov - post_doubled.cov).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("scalar evidence hand case") {
  LinRegData d;
  d.X = Eigen::MatrixXd::Ones(1, 1);
  d.y = Eigen::VectorXd::Ones(1);
  LinRegPrior p{Eigen::VectorXd::Ones(1)};
  // y ~ N(0, beta^{-1} + 1/alpha) = N(0, 2)
  const double expected = -0.5 * std::log(4.0 * M_PI) - 0.25;
  CHECK(blr_evidence_log(d, p, 1.0).log_value == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("evidence matches the brute-force Gaussian oracle on random instances") {
  Rng rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform() * 6.0);
    const int l = 1 + static_cast<int>(rng.uniform() * 6.0);
    const LinRegData d = random_instance(n, l, rng);
    const LinRegPrior p = random_prior(l, rng);
    const double beta = 0.5 + 2.0 * rng.uniform();
    const Eigen::MatrixXd cov = (1.0 / beta) * Eigen::MatrixXd::Identity(n, n) +
                                d.X * p.alpha.cwiseInverse().asDiagonal() * d.X.transpose();
    const double expected = oracle::mvn_logpdf(d.y, Eigen::VectorXd::Zero(n), cov);
    const double got = blr_evidence_log(d, p, beta).log_value;
    CHECK(std::fabs(got - expected) <= 1e-10 * std::max(1.0, std::fabs(expected)));
  }
}

TEST_CASE("evidence over scaled targets peaks at zero") {
  Rng rng(5);
  const LinRegData d = random_instance(4, 2, rng);
  const LinRegPrior p = random_prior(2, rng);
  LinRegData scaled = d;
  scaled.y.setZero();
  const double at_zero = blr_evidence_log(scaled, p, 1.0).log_value;
  for (double s : {1.0, 0.5, 0.1, -0.7}) {
    scaled.y = s * d.y;
    CHECK(blr_evidence_log(scaled, p, 1.0).log_value <= at_zero + 1e-12);
  }
}

TEST_CASE("posterior stationarity identity") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform() * 8.0);
    const int l = 1 + static_cast<int>(rng.uniform() * 5.0);
    const LinRegData d = random_instance(n, l, rng);
    const LinRegPrior p = random_prior(l, rng);
    const double beta = 0.5 + rng.uniform();
    const LinRegPosterior post = blr_posterior(d, p, beta);
    const Eigen::MatrixXd precision =
        p.alpha.asDiagonal().toDenseMatrix() + beta * d.X.transpose() * d.X;
    const Eigen::VectorXd lhs = precision * post.mean;
    const Eigen::VectorXd rhs = beta * d.X.transpose() * d.y;
    CHECK((lhs - rhs).norm() <= 1e-10 * std::max(1.0, rhs.norm()));
  }
}

TEST_CASE("posterior mode is also the posterior mean (unimodal Gaussian)") {
  Rng rng(23);
  const LinRegData d = random_instance(6, 3, rng);
  const LinRegPrior p = random_prior(3, rng);
  const LinRegPosterior post = blr_posterior(d, p, 1.5);
  // log posterior density up to constants
  auto log_post = [&](const Eigen::VectorXd& theta) {
    return oracle::mvn_logpdf(theta, post.mean, post.cov);
  };
  const double at_mean = log_post(post.mean);
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd pert(3);
    for (int j = 0; j < 3; ++j) pert[j] = 0.5 * rng.normal();
    CHECK(log_post(post.mean + pert) <= at_mean);
  }
}

TEST_CASE("predictive distribution basics") {
  Rng rng(29);
  const LinRegData d = random_instance(5, 3, rng);
  const LinRegPrior p = random_prior(3, rng);
  const double beta = 2.0;
  const LinRegPosterior post = blr_posterior(d, p, beta);

  const Prediction at_zero = blr_predict(Eigen::VectorXd::Zero(3), post);
  CHECK(at_zero.mean == 0.0);
  CHECK(at_zero.variance == doctest::Approx(1.0 / beta).epsilon(1e-12));

  for (int i = 0; i < 20; ++i) {
    Eigen::VectorXd x(3);
    for (int j = 0; j < 3; ++j) x[j] = rng.normal();
    CHECK(blr_predict(x, post).variance >= 1.0 / beta);
  }
  CHECK_THROWS_AS(blr_predict(Eigen::VectorXd::Zero(2), post), DomainError);
}

TEST_CASE("ard recovers the generating support") {
  Rng rng(101);
  const int n = 100, l = 20;
  Eigen::MatrixXd X(n, l);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < l; ++j) X(i, j) = rng.normal();
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(l);
  theta[3] = 1.5;
  theta[11] = -2.0;
  Eigen::VectorXd y = X * theta;
  for (int i = 0; i < n; ++i) y[i] += 0.05 * rng.normal();

  const ArdResult fit = ard_fit({X, y});
  CHECK(fit.converged);
  for (int j = 0; j < l; ++j) {
    INFO("coefficient " << j);
    if (j == 3 || j == 11)
      CHECK_FALSE(fit.pruned[j]);
    else
      CHECK(fit.pruned[j]);
  }
  // evidence trace is non-decreasing within slack
  for (size_t i = 1; i < fit.evidence_trace.size(); ++i)
    CHECK(fit.evidence_trace[i] >=
          fit.evidence_trace[i - 1] - 1e-9 * (1.0 + std::fabs(fit.evidence_trace[i - 1])));
}

TEST_CASE("ard prunes everything when there is nothing to explain") {
  Rng rng(7);
  const int n = 40, l = 6;
  Eigen::MatrixXd X(n, l);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < l; ++j) X(i, j) = rng.normal();
  const LinRegData d{X, Eigen::VectorXd::Zero(n)};
  const ArdResult fit = ard_fit(d);
  for (int j = 0; j < l; ++j) CHECK(fit.pruned[j]);
}

TEST_CASE("ard respects a fixed noise precision") {
  Rng rng(13);
  const LinRegData d = random_instance(30, 4, rng);
  ArdOptions opts;
  opts.learn_noise = false;
  opts.beta_init = 3.7;
  const ArdResult fit = ard_fit(d, opts);
  CHECK(fit.beta == 3.7);
}

TEST_CASE("ard reports non-convergence at a tiny iteration cap") {
  Rng rng(19);
  const int n = 60, l = 10;
  Eigen::MatrixXd X(n, l);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < l; ++j) X(i, j) = rng.normal();
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y[i] = X(i, 0) + 0.3 * rng.normal();
  ArdOptions opts;
  opts.max_iters = 1;
  opts.tol = 1e-14;
  const ArdResult fit = ard_fit({X, y}, opts);
  CHECK_FALSE(fit.converged);
  CHECK(fit.iterations == 1);
}

TEST_CASE("bic score") {
  CHECK(bic_score(-10.0, 2, 100) == doctest::Approx(-10.0 - std::log(100.0)).epsilon(1e-12));
  CHECK(bic_score(-3.5, 0, 50) == -3.5);
  const double at_n = bic_score(-1.0, 2, 64);
  const double at_2n = bic_score(-1.0, 2, 128);
  CHECK(at_n - at_2n == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(bic_score(0.0, 1, 0), DomainError);
  CHECK_THROWS_AS(bic_score(0.0, -1, 10), DomainError);
}

TEST_CASE("input validation") {
  LinRegData bad;
  bad.X.resize(2, 2);
  bad.X.setZero();
  bad.y.resize(3);
  bad.y.setZero();
  CHECK_THROWS_AS(bad.validate(), DomainError);

  LinRegPrior p{(Eigen::VectorXd(1) << -1.0).finished()};
  CHECK_THROWS_AS(p.validate(), DomainError);

  LinRegData d;
  d.X = Eigen::MatrixXd::Ones(1, 1);
  d.y = Eigen::VectorXd::Ones(1);
  CHECK_THROWS_AS(blr_posterior(d, LinRegPrior{Eigen::VectorXd::Ones(1)}, -1.0), DomainError);
}

// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "sbtk/cpd.hpp"
#include "sbtk/gpinfer.hpp"
#include "sbtk/io.hpp"
#include "sbtk/kernels.hpp"
#include "sbtk/linmodel.hpp"
#include "sbtk/lwta.hpp"
#include "sbtk/priors.hpp"
#include "sbtk/quadrature.hpp"
#include "sbtk/rng.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace sbtk;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

class Criterion {
 public:
  Criterion(int id, std::string name) : id_(id), name_(std::move(name)),
        start_(std::chrono::steady_clock::now()) {}

  void check(bool ok, const std::string& what) {
    if (!ok) {
      ok_ = false;
      details_ += (details_.empty() ? "" : "; ") + what;
    }
  }

  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

  ~Criterion() {
    std::printf("[%s] C%d %s (%.1fs)%s%s\n", ok_ ? "PASS" : "FAIL", id_, name_.c_str(),
                seconds(), details_.empty() ? "" : " -- ", details_.c_str());
    std::fflush(stdout);
    if (!ok_) ++g_failures;
  }

 private:
  int id_;
  std::string name_;
  bool ok_ = true;
  std::string details_;
  std::chrono::steady_clock::time_point start_;
};

std::string fmt(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

// ---------------------------------------------------------------------------

void criterion_1_blr() {
  Criterion c(1, "BLR closed forms match brute-force Gaussian oracles");
  Rng rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform() * 6.0);
    const int l = 1 + static_cast<int>(rng.uniform() * 6.0);
    LinRegData data;
    data.X.resize(n, l);
    data.y.resize(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < l; ++j) data.X(i, j) = rng.normal();
      data.y[i] = rng.normal();
    }
    LinRegPrior prior;
    prior.alpha.resize(l);
    for (int j = 0; j < l; ++j) prior.alpha[j] = 0.3 + 2.0 * rng.uniform();
    const double beta = 0.4 + 2.0 * rng.uniform();

    // evidence against the eigendecomposition oracle
    const Eigen::MatrixXd cov = (1.0 / beta) * Eigen::MatrixXd::Identity(n, n) +
                                data.X * prior.alpha.cwiseInverse().asDiagonal() *
                                    data.X.transpose();
    const double ev_oracle = oracle::mvn_logpdf(data.y, Eigen::VectorXd::Zero(n), cov);
    const double ev = blr_evidence_log(data, prior, beta).log_value;
    worst = std::max(worst, std::fabs(ev - ev_oracle) / std::max(1.0, std::fabs(ev_oracle)));

    // posterior against a brute-force inverse
    const LinRegPosterior post = blr_posterior(data, prior, beta);
    Eigen::MatrixXd precision = prior.alpha.asDiagonal();
    precision += beta * data.X.transpose() * data.X;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(precision);
    const Eigen::MatrixXd sigma_oracle = es.eigenvectors() *
                                         es.eigenvalues().cwiseInverse().asDiagonal() *
                                         es.eigenvectors().transpose();
    const Eigen::VectorXd mu_oracle = beta * sigma_oracle * data.X.transpose() * data.y;
    worst = std::max(worst, (post.mean - mu_oracle).cwiseAbs().maxCoeff() /
                                std::max(1.0, mu_oracle.cwiseAbs().maxCoeff()));
    worst = std::max(worst, (post.cov - sigma_oracle).cwiseAbs().maxCoeff() /
                                std::max(1.0, sigma_oracle.cwiseAbs().maxCoeff()));

    // predictive against the closed form through the oracle posterior
    Eigen::VectorXd x_star(l);
    for (int j = 0; j < l; ++j) x_star[j] = rng.normal();
    const Prediction pred = blr_predict(x_star, post);
    const double mean_oracle = mu_oracle.dot(x_star);
    const double var_oracle = 1.0 / beta + x_star.dot(sigma_oracle * x_star);
    worst = std::max(worst, std::fabs(pred.mean - mean_oracle) / std::max(1.0, std::fabs(mean_oracle)));
    worst = std::max(worst, std::fabs(pred.variance - var_oracle) / var_oracle);
  }
  c.check(worst < 1e-10, "worst oracle deviation " + fmt(worst));

  // hand-computed 1-D case
  LinRegData one;
  one.X = Eigen::MatrixXd::Ones(1, 1);
  one.y = Eigen::VectorXd::Ones(1);
  const LinRegPosterior post = blr_posterior(one, LinRegPrior{Eigen::VectorXd::Ones(1)}, 1.0);
  c.check(std::fabs(post.mean[0] - 0.5) < 1e-12 && std::fabs(post.cov(0, 0) - 0.5) < 1e-12,
          "1-D hand case mu=" + fmt(post.mean[0]) + " sigma=" + fmt(post.cov(0, 0)));
}

void criterion_2_kernels() {
  Criterion c(2, "Wiener-Khintchine duality and GridSM low rank");
  Rng rng(6);
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    SpectralMixtureKernel sm;
    sm.weights.resize(3);
    sm.freqs.resize(3);
    sm.bandwidths.resize(3);
    for (int i = 0; i < 3; ++i) {
      sm.weights[i] = 0.2 + rng.uniform();
      sm.freqs[i] = 0.45 * rng.uniform();
      sm.bandwidths[i] = 1e-4 + 1e-2 * rng.uniform();
    }
    KernelSpec spec;
    spec.node = sm;
    const double hi = sm.freqs.maxCoeff() + 14.0 * std::sqrt(sm.bandwidths.maxCoeff());
    for (double tau : {0.0, 1.3, 4.7, 11.0, 20.0}) {
      const double recon =
          2.0 * integrate([&](double w) { return spectral_density(spec, w) *
                                                 std::cos(2.0 * M_PI * w * tau); },
                          0.0, hi, 1e-10, 1e-11);
      const double direct = kernel_eval(spec, Eigen::VectorXd::Constant(1, tau),
                                        Eigen::VectorXd::Zero(1));
      worst = std::max(worst, std::fabs(recon - direct));
    }
  }
  c.check(worst < 1e-6, "worst duality error " + fmt(worst));

  const int n = 100;
  Eigen::MatrixXd X(n, 1);
  for (int i = 0; i < n; ++i) X(i, 0) = i;
  const KernelSpec grid = grid_make(8, 0.0, 0.5, 1e-3);
  int worst_rank = 0;
  for (const auto& K : subkernel_grams(grid, X)) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(K);
    const auto& sv = svd.singularValues();
    const double thresh = sv[0] * n * std::numeric_limits<double>::epsilon();
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
      if (sv[i] > thresh) ++rank;
    worst_rank = std::max(worst_rank, rank);
  }
  c.check(worst_rank < n / 2, "max subkernel numerical rank " + std::to_string(worst_rank));
}

void criterion_3_gp_solver() {
  Criterion c(3, "MM solver: monotone, surrogate-sound, gradient-exact, sparse recovery");
  // monotone trace on 20 seeded runs
  bool monotone = true;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const synthetic::TwoTone d = synthetic::two_tone(60, 12, 0.25, 500 + seed, 3, 8);
    const KernelSpec grid = grid_make(12, 0.0, 0.5, 1e-3);
    const auto Ks = subkernel_grams(grid, d.t);
    MkSolverOptions opts;
    opts.max_iters = 40;
    const MkFit fit = mm_fit(Ks, d.y, mk_default_init(12, d.y), mk_default_noise(d.y), opts);
    for (size_t i = 1; i < fit.trace.objective.size(); ++i)
      if (fit.trace.objective[i] >
          fit.trace.objective[i - 1] + 1e-9 * (1.0 + std::fabs(fit.trace.objective[i - 1])))
        monotone = false;
  }
  c.check(monotone, "objective increased beyond the 1e-9 slack");

  // surrogate tangency and domination
  {
    Rng rng(7);
    const synthetic::TwoTone d = synthetic::two_tone(25, 6, 0.2, 13, 2, 4);
    const KernelSpec grid = grid_make(6, 0.0, 0.5, 1e-3);
    const auto Ks = subkernel_grams(grid, d.t);
    Eigen::VectorXd eta_k(7);
    for (int i = 0; i < 6; ++i) eta_k[i] = 0.1 + rng.uniform();
    eta_k[6] = 0.3;
    const double h_k = mk_h(Ks, eta_k.head(6), eta_k[6]);
    Eigen::VectorXd grad_h;
    mk_gradients(Ks, d.y, eta_k.head(6), eta_k[6], nullptr, &grad_h);
    auto surrogate = [&](const Eigen::VectorXd& eta) {
      return mk_g(Ks, d.y, eta.head(6), eta[6]) - h_k - grad_h.dot(eta - eta_k);
    };
    const double l_k = mk_objective(Ks, d.y, eta_k.head(6), eta_k[6]);
    c.check(std::fabs(surrogate(eta_k) - l_k) <= 1e-12 * (1.0 + std::fabs(l_k)),
            "surrogate tangency violated");
    bool dominated = true;
    for (int trial = 0; trial < 100; ++trial) {
      Eigen::VectorXd eta(7);
      for (int i = 0; i < 6; ++i) eta[i] = 2.0 * rng.uniform();
      eta[6] = 0.01 + rng.uniform();
      const double l_eta = mk_objective(Ks, d.y, eta.head(6), eta[6]);
      if (surrogate(eta) < l_eta - 1e-9 * (1.0 + std::fabs(l_eta))) dominated = false;
    }
    c.check(dominated, "surrogate domination violated");

    // gradients of g and h vs central finite differences
    Eigen::VectorXd grad_g;
    mk_gradients(Ks, d.y, eta_k.head(6), eta_k[6], &grad_g, &grad_h);
    double worst = 0.0;
    for (int i = 0; i <= 6; ++i) {
      auto eval = [&](double t, bool want_g) {
        Eigen::VectorXd a = eta_k.head(6);
        double vv = eta_k[6];
        if (i < 6)
          a[i] = t;
        else
          vv = t;
        return want_g ? mk_g(Ks, d.y, a, vv) : mk_h(Ks, a, vv);
      };
      const double x0 = eta_k[i];
      const double fd_g = oracle::central_diff([&](double t) { return eval(t, true); }, x0, 1e-6);
      const double fd_h = oracle::central_diff([&](double t) { return eval(t, false); }, x0, 1e-6);
      worst = std::max(worst, std::fabs(grad_g[i] - fd_g) / (1.0 + std::fabs(fd_g)));
      worst = std::max(worst, std::fabs(grad_h[i] - fd_h) / (1.0 + std::fabs(fd_h)));
    }
    c.check(worst < 1e-5, "gradient FD deviation " + fmt(worst));
  }

  // two-tone recovery at N=200, Q=50
  {
    const synthetic::TwoTone d = synthetic::two_tone(200, 50, 0.1, 55);
    const KernelSpec grid = grid_make(50, 0.0, 0.5, 1e-3);
    const auto Ks = subkernel_grams(grid, d.t);
    MkSolverOptions opts;
    opts.max_iters = 60;
    const MkFit fit = mm_fit(Ks, d.y, mk_default_init(50, d.y), mk_default_noise(d.y), opts);
    auto bin_active = [&](int b) {
      for (int idx : fit.active)
        if (std::abs(idx - b) <= 1) return true;
      return false;
    };
    c.check(bin_active(d.bin1) && bin_active(d.bin2), "generating bins not recovered");
    c.check(static_cast<int>(fit.active.size()) <= 4,
            "active weights " + std::to_string(fit.active.size()));
  }
  c.check(c.seconds() < 60.0, "criterion exceeded 60 s");
}

void criterion_4_cross_solver() {
  Criterion c(4, "Cross-solver evidence agreement (mm / seq / admm)");
  for (std::uint64_t seed : {17ull, 91ull, 230ull}) {
    const synthetic::TwoTone d = synthetic::two_tone(16, 3, 0.15, seed, 0, 2);
    const KernelSpec grid = grid_make(3, 0.0, 0.5, 1e-3);
    const auto Ks = subkernel_grams(grid, d.t);
    const Eigen::VectorXd init = mk_default_init(3, d.y);
    const double v0 = mk_default_noise(d.y);

    MkSolverOptions opts;
    opts.max_iters = 400;
    const MkFit mm = mm_fit(Ks, d.y, init, v0, opts);
    const MkFit seq = gamma_fit(Ks, d.y, mm.noise_var, opts);  // v fixed at the mm optimum
    MkSolverOptions admm_opts;
    admm_opts.max_iters = 4000;
    const MkFit admm = admm_fit(Ks, d.y, init, v0, admm_opts);

    const double scale = std::fabs(mm.final_evidence);
    c.check(std::fabs(seq.final_evidence - mm.final_evidence) <= 1e-3 * scale,
            "seed " + std::to_string(seed) + ": seq vs mm " +
                fmt(std::fabs(seq.final_evidence - mm.final_evidence) / scale));
    c.check(std::fabs(admm.final_evidence - mm.final_evidence) <= 1e-3 * scale,
            "seed " + std::to_string(seed) + ": admm vs mm " +
                fmt(std::fabs(admm.final_evidence - mm.final_evidence) / scale));
  }
}

void criterion_5_gridsm_vs_se() {
  Criterion c(5, "GridSM beats the SE kernel on multi-periodic holdout");
  const int n = 220, holdout = 20;
  const synthetic::TwoTone d = synthetic::multi_periodic(n, 0.1, 77);
  const Eigen::MatrixXd Xtr = d.t.topRows(n - holdout);
  const Eigen::VectorXd ytr = d.y.head(n - holdout);
  const Eigen::MatrixXd Xte = d.t.bottomRows(holdout);
  const Eigen::VectorXd yte = d.y.tail(holdout);

  // GridSM via the MM solver
  const KernelSpec grid = grid_make(50, 0.0, 0.5, 1e-3);
  MkSolverOptions opts;
  opts.max_iters = 60;
  const GpFitResult fit = gp_fit(grid, Xtr, ytr, MkSolver::Mm, opts);
  const GpPosterior grid_post =
      gp_predict(Xtr, ytr, Xte, GpModel{fit.kernel, fit.fit.noise_var});
  const double grid_mse = (grid_post.mean - yte).squaredNorm() / holdout;

  // SE baseline: evidence-driven grid search over (sigma_s^2, ell, v)
  double best_ev = -std::numeric_limits<double>::infinity();
  GpModel best_se;
  const double var_y = (ytr.array() - ytr.mean()).square().mean();
  for (double ell : {0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0})
    for (double s2 : {0.25 * var_y, var_y, 4.0 * var_y})
      for (double v : {1e-3 * var_y, 1e-2 * var_y, 0.1 * var_y, 0.5 * var_y}) {
        GpModel m;
        m.kernel.node = SeKernel{s2, ell};
        m.noise_var = v;
        const double ev = gp_evidence_log(Xtr, ytr, m).log_value;
        if (ev > best_ev) {
          best_ev = ev;
          best_se = m;
        }
      }
  const GpPosterior se_post = gp_predict(Xtr, ytr, Xte, best_se);
  const double se_mse = (se_post.mean - yte).squaredNorm() / holdout;

  c.check(grid_mse <= 0.7 * se_mse,
          "grid mse " + fmt(grid_mse) + " vs se mse " + fmt(se_mse));
}

void criterion_6_cpd_rank() {
  Criterion c(6, "CPD rank recovery 20x20x20 rank-3 at SNR 20 dB");
  int recovered = 0;
  bool monotone = true;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const synthetic::SyntheticTensor synth =
        synthetic::random_cp_tensor({20, 20, 20}, 3, 20.0, 1.0, 1000 + seed);
    CpdOptions opts;
    opts.seed = seed;
    const CpdModel model = cpd_fit(synth.observed, 10, opts);
    if (model.active_rank() == 3) ++recovered;
    for (size_t i = 1; i < model.elbo_trace.size(); ++i) {
      bool pruned_before = false;
      for (int ps : model.prune_sweeps)
        if (ps == static_cast<int>(i)) pruned_before = true;
      if (!pruned_before &&
          model.elbo_trace[i] <
              model.elbo_trace[i - 1] - 1e-8 * (1.0 + std::fabs(model.elbo_trace[i - 1])))
        monotone = false;
    }
  }
  c.check(recovered >= 18, "recovered rank 3 on " + std::to_string(recovered) + "/20 seeds");
  c.check(monotone, "elbo decreased beyond the 1e-8 slack");

  // row-update ridge-oracle equivalence on a 3x3x3 instance
  {
    const synthetic::SyntheticTensor synth =
        synthetic::random_cp_tensor({3, 3, 3}, 2, 15.0, 1.0, 3);
    Rng rng(4);
    CpdModel model = cpd_init(synth.observed, 3, rng);
    CpdOptions opts;
    cpd_vi_step(model, synth.observed, opts);
    const double e_beta = model.beta_mean();
    const Eigen::VectorXd e_lambda = model.lambda_mean();
    CpdModel updated = model;
    cpd_vi_step(updated, synth.observed, opts);
    double worst = 0.0;
    for (int mode = 0; mode < 3; ++mode) {
      for (int j = 0; j < 3; ++j) {
        Eigen::MatrixXd precision = e_lambda.asDiagonal();
        Eigen::VectorXd lin = Eigen::VectorXd::Zero(3);
        // the oracle uses the same moments the sweep consumed: modes before
        // `mode` already updated, later modes at their previous state
        for (int o = 0; o < synth.observed.observed(); ++o) {
          if (synth.observed.indices(o, mode) != j) continue;
          Eigen::VectorXd mean_prod = Eigen::VectorXd::Ones(3);
          Eigen::MatrixXd mom_prod = Eigen::MatrixXd::Ones(3, 3);
          for (int q = 0; q < 3; ++q) {
            if (q == mode) continue;
            const CpdModel& src = q < mode ? updated : model;
            const int jq = synth.observed.indices(o, q);
            const Eigen::VectorXd m = src.factor_mean[q].row(jq).transpose();
            mean_prod = mean_prod.cwiseProduct(m);
            mom_prod = mom_prod.cwiseProduct(
                (m * m.transpose() + src.factor_cov[q][jq]).eval());
          }
          precision += e_beta * mom_prod;
          lin += e_beta * synth.observed.values[o] * mean_prod;
        }
        const Eigen::VectorXd mean = precision.ldlt().solve(lin);
        worst = std::max(worst,
                         (updated.factor_mean[mode].row(j).transpose() - mean).cwiseAbs().maxCoeff() /
                             (1.0 + mean.cwiseAbs().maxCoeff()));
      }
    }
    c.check(worst < 1e-10, "ridge-oracle deviation " + fmt(worst));
  }
  c.check(c.seconds() < 120.0, "criterion exceeded 2 min");
}

void criterion_7_cpd_completion() {
  Criterion c(7, "CPD completion of an 80%-hidden rank-3 tensor at SNR 30 dB");
  int good = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const synthetic::SyntheticTensor synth =
        synthetic::random_cp_tensor({30, 30, 30}, 3, 30.0, 0.2, 2000 + seed);
    CpdOptions opts;
    opts.seed = seed;
    const CpdModel model = cpd_fit(synth.observed, 10, opts);
    double err = 0.0, power = 0.0;
    for (size_t h = 0; h < synth.hidden_indices.size(); ++h) {
      const double truth = synth.hidden_values[static_cast<int>(h)];
      const double pred = model.reconstruct(synth.hidden_indices[h]);
      err += (truth - pred) * (truth - pred);
      power += truth * truth;
    }
    if (std::sqrt(err / power) < 0.10) ++good;
  }
  c.check(good >= 18, "hidden-entry recovery on " + std::to_string(good) + "/20 seeds");
}

void criterion_8_ibp() {
  Criterion c(8, "IBP mean row sum matches the truncated analytic value");
  for (double alpha : {0.5, 2.0, 5.0}) {
    IbpConfig cfg{alpha, 1000, 100};
    const int draws = 60;
    std::vector<double> per_draw;
    for (int d = 0; d < draws; ++d) {
      Rng rng(3000 + d + static_cast<std::uint64_t>(alpha * 911));
      const IbpDraw draw = ibp_sample(cfg, rng);
      double total = 0.0;
      for (int i = 0; i < cfg.rows; ++i)
        for (int j = 0; j < cfg.truncation; ++j) total += draw.Z(i, j);
      per_draw.push_back(total / cfg.rows);
    }
    const double grand = oracle::sample_mean(per_draw);
    double var = 0.0;
    for (double m : per_draw) var += (m - grand) * (m - grand);
    var /= (draws - 1);
    const double se = std::sqrt(var / draws);
    c.check(std::fabs(grand - cfg.mean_row_sum()) < 3.0 * se,
            "alpha " + fmt(alpha) + ": mean " + fmt(grand) + " expected " +
                fmt(cfg.mean_row_sum()) + " se " + fmt(se));
  }
}

void criterion_9_lwta() {
  Criterion c(9, "LWTA gradients, winner normalization, two-arcs accuracy and pruning");
  // finite differences over every parameter class on the 2-block toy net
  {
    LwtaNetwork net = lwta_create(4, {{2, 2}}, 2, 1.0, 41);
    Rng rng(43);
    Eigen::MatrixXd x(3, 4);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 4; ++j) x(i, j) = rng.normal();
    Eigen::VectorXi labels(3);
    labels << 0, 1, 1;
    TrainConfig cfg;
    const LwtaGradients g = lwta_elbo_grad(net, x, labels, cfg, 4242);
    std::vector<Eigen::MatrixXd*> views = lwta_parameter_views(net);
    double worst = 0.0;
    const double step = 1e-5;
    for (size_t t = 0; t < views.size(); ++t) {
      Eigen::MatrixXd& param = *views[t];
      for (int i = 0; i < param.rows(); ++i)
        for (int j = 0; j < param.cols(); ++j) {
          const double saved = param(i, j);
          param(i, j) = saved + step;
          const double up = lwta_elbo_grad(net, x, labels, cfg, 4242).elbo;
          param(i, j) = saved - step;
          const double down = lwta_elbo_grad(net, x, labels, cfg, 4242).elbo;
          param(i, j) = saved;
          const double fd = (up - down) / (2.0 * step);
          worst = std::max(worst, std::fabs(-g.grads[t](i, j) - fd) / (1.0 + std::fabs(fd)));
        }
    }
    c.check(worst < 1e-4, "gradient FD deviation " + fmt(worst));
  }

  // winner probabilities sum to one
  {
    LwtaNetwork net = lwta_create(3, {{4, 3}}, 2, 1.0, 3);
    Rng rng(5);
    Eigen::MatrixXd x(6, 3);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 3; ++j) x(i, j) = rng.normal();
    const LwtaForward fwd = lwta_forward(net, x, rng, ForwardMode::Train);
    double worst = 0.0;
    for (int r = 0; r < 6; ++r)
      for (int g0 = 0; g0 < 12; g0 += 3)
        worst = std::max(worst,
                         std::fabs(fwd.winner_probs[0].row(r).segment(g0, 3).sum() - 1.0));
    c.check(worst <= 1e-12, "winner probability sum deviation " + fmt(worst));
  }

  // two-arcs training, accuracy and pruning
  {
    const synthetic::TwoArcs data = synthetic::two_arcs(400, 0.08, 99);
    Eigen::MatrixXd x_train = data.X.topRows(300), x_test = data.X.bottomRows(100);
    Eigen::VectorXi y_train = data.y.head(300), y_test = data.y.tail(100);
    LwtaNetwork net = lwta_create(2, {{8, 2}, {8, 2}}, 2, 1.0, 7);
    TrainConfig cfg;
    cfg.epochs = 300;
    cfg.batch_size = 64;
    cfg.learning_rate = 0.02;
    cfg.seed = 7;
    lwta_train(net, x_train, y_train, cfg);
    Rng rng(1);
    const double acc = lwta_accuracy(net, x_test, y_test, rng, ForwardMode::TestArgmax);
    c.check(acc > 0.90, "test accuracy " + fmt(acc));
    LwtaNetwork pruned = net;
    lwta_prune(pruned, 0.01);
    const double acc_pruned =
        lwta_accuracy(pruned, x_test, y_test, rng, ForwardMode::TestArgmax);
    c.check(acc - acc_pruned < 0.02,
            "pruning drop " + fmt(acc - acc_pruned) + " (from " + fmt(acc) + ")");
  }
  c.check(c.seconds() < 180.0, "criterion exceeded 3 min");
}

#ifndef SBTK_CLI_PATH
#error "SBTK_CLI_PATH must be defined"
#endif

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SBTK_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  return WEXITSTATUS(std::system(cmd.c_str()));
}

std::string strip_timing_file(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream out;
  std::string line;
  while (std::getline(is, line))
    if (line.find("_seconds") == std::string::npos) out << line << "\n";
  return out.str();
}

void criterion_10_determinism() {
  Criterion c(10, "Fit commands are rerun-identical given the seed");
  const fs::path root = fs::temp_directory_path() / "sbtk_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);

  // shared inputs
  const fs::path tone = root / "tone.csv";
  {
    const synthetic::TwoTone d = synthetic::two_tone(80, 20, 0.15, 7);
    std::ofstream os(tone);
    os.precision(17);
    os << "t,value\n";
    for (int i = 0; i < 80; ++i) os << d.t(i, 0) << "," << d.y[i] << "\n";
  }
  const fs::path tensor = root / "tensor.txt";
  {
    const synthetic::SyntheticTensor synth =
        synthetic::random_cp_tensor({8, 8, 8}, 2, 20.0, 0.8, 13);
    write_tensor(synth.observed, tensor.string());
  }
  const fs::path arcs = root / "arcs.csv";
  {
    const synthetic::TwoArcs d = synthetic::two_arcs(150, 0.08, 5);
    std::ofstream os(arcs);
    os.precision(17);
    os << "x1,x2,label\n";
    for (int i = 0; i < 150; ++i) os << d.X(i, 0) << "," << d.X(i, 1) << "," << d.y[i] << "\n";
  }
  const fs::path reg = root / "reg.csv";
  {
    Rng rng(5);
    std::ofstream os(reg);
    os.precision(17);
    os << "x1,x2,y\n";
    for (int i = 0; i < 40; ++i) {
      const double a = rng.normal(), b = rng.normal();
      os << a << "," << b << "," << (2.0 * a + 0.05 * rng.normal()) << "\n";
    }
  }

  struct Command {
    std::string name;
    std::string args;
    std::vector<std::string> outputs;
  };
  const std::vector<Command> commands = {
      {"blr", "--seed 3 blr --data " + reg.string(), {"result.json", "trace.csv"}},
      {"gp-fit-mm",
       "--seed 9 gp-fit --data " + tone.string() + " --holdout 10 --Q 20 --solver mm --max-iters 25",
       {"result.json", "model.json", "trace.csv", "predictions.csv"}},
      {"gp-fit-seq",
       "--seed 9 gp-fit --data " + tone.string() +
           " --holdout 10 --Q 20 --solver seq --max-iters 6 --tol 1e-4",
       {"result.json", "model.json", "trace.csv", "predictions.csv"}},
      {"gp-fit-admm",
       "--seed 9 gp-fit --data " + tone.string() +
           " --holdout 10 --Q 6 --solver admm --max-iters 1500",
       {"result.json", "model.json"}},
      {"cpd-fit", "--seed 2 cpd-fit --data " + tensor.string() + " --rank 4",
       {"result.json", "trace.csv"}},
      {"cpd-complete", "--seed 2 cpd-complete --data " + tensor.string() + " --rank 4",
       {"result.json", "completed.txt", "variance.txt"}},
      {"lwta-train",
       "--seed 5 lwta-train --data " + arcs.string() + " --arch 4x2 --epochs 8 --lr 0.02",
       {"result.json", "model.bin", "trace.csv"}},
      {"ibp-sample", "--seed 11 ibp-sample --alpha 2 --rows 100 --jmax 50",
       {"result.json", "draw.csv", "z.csv"}},
  };

  for (const auto& cmd : commands) {
    const fs::path a = root / (cmd.name + "_a");
    const fs::path b = root / (cmd.name + "_b");
    fs::create_directories(a);
    fs::create_directories(b);
    const int rc_a = run_cli("--out " + a.string() + " " + cmd.args);
    const int rc_b = run_cli("--out " + b.string() + " " + cmd.args);
    c.check(rc_a == rc_b && rc_a <= 4, cmd.name + " exit codes " + std::to_string(rc_a) + "/" +
                                           std::to_string(rc_b));
    for (const auto& file : cmd.outputs) {
      const bool same = strip_timing_file(a / file) == strip_timing_file(b / file) &&
                        fs::exists(a / file);
      c.check(same, cmd.name + ": " + file + " differs across reruns");
    }
  }
  fs::remove_all(root);
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  criterion_1_blr();
  criterion_2_kernels();
  criterion_3_gp_solver();
  criterion_4_cross_solver();
  criterion_5_gridsm_vs_se();
  criterion_6_cpd_rank();
  criterion_7_cpd_completion();
  criterion_8_ibp();
  criterion_9_lwta();
  criterion_10_determinism();
  const double total =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%s: %d criterion failure%s (%.1fs total)\n", g_failures == 0 ? "OK" : "FAILED",
              g_failures, g_failures == 1 ? "" : "s", total);
  return g_failures == 0 ? 0 : 1;
}

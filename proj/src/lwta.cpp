#include "sbtk/lwta.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sbtk/autodiff.hpp"
#include "sbtk/errors.hpp"

namespace sbtk {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Eigen::MatrixXd sample_normal(Rng& rng, int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.normal();
  return m;
}

Eigen::MatrixXd sample_uniform(Rng& rng, int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform();
  return m;
}

Eigen::MatrixXd sample_gumbel(Rng& rng, int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.gumbel();
  return m;
}

Eigen::MatrixXd sample_logistic(Rng& rng, int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.logistic();
  return m;
}

struct AdamState {
  std::vector<Eigen::MatrixXd> m, v;
  int step = 0;
};

void adam_step(std::vector<Eigen::MatrixXd*>& params, const std::vector<Eigen::MatrixXd>& grads,
               AdamState& state, double lr) {
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.emplace_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
      state.v.emplace_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    }
  }
  state.step += 1;
  const double c1 = 1.0 - std::pow(b1, state.step);
  const double c2 = 1.0 - std::pow(b2, state.step);
  for (size_t i = 0; i < params.size(); ++i) {
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * grads[i];
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * grads[i].cwiseProduct(grads[i]);
    const Eigen::MatrixXd mhat = state.m[i] / c1;
    const Eigen::MatrixXd vhat = state.v[i] / c2;
    *params[i] -=
        lr * mhat.cwiseQuotient((vhat.cwiseSqrt().array() + eps).matrix());
  }
}

}  // namespace

Eigen::MatrixXd LwtaLayer::util_prob() const {
  return util_logit.unaryExpr([](double v) { return sigmoid(v); });
}

void LwtaNetwork::validate() const {
  if (layers.empty()) throw DomainError("network needs at least one layer");
  if (classes < 2) throw DomainError("network needs at least two classes");
  int width = layers.front().in_dim;
  for (const auto& layer : layers) {
    if (layer.in_dim != width) throw DomainError("adjacent layer widths must match");
    if (layer.blocks < 1 || layer.units < 1)
      throw DomainError("layer geometry must be positive");
    width = layer.out_dim();
  }
  if (readout_mu.rows() != width + 1 || readout_mu.cols() != classes)
    throw DomainError("readout shape must be (H+1) x C");
}

LwtaNetwork lwta_create(int input_dim, const std::vector<LayerGeometry>& geometry, int classes,
                        double ibp_alpha, std::uint64_t seed) {
  if (input_dim < 1) throw DomainError("input dimension must be positive");
  if (geometry.empty()) throw DomainError("at least one layer is required");
  if (classes < 2) throw DomainError("at least two classes are required");
  if (!(ibp_alpha > 0.0)) throw DomainError("ibp alpha must be positive");

  Rng rng(seed);
  LwtaNetwork net;
  net.classes = classes;
  net.ibp_alpha = ibp_alpha;
  int width = input_dim;
  for (const auto& g : geometry) {
    LwtaLayer layer;
    layer.in_dim = width;
    layer.blocks = g.blocks;
    layer.units = g.units;
    const int out = g.blocks * g.units;
    layer.w_mu = sample_normal(rng, width, out) / std::sqrt(static_cast<double>(width));
    layer.w_logvar = Eigen::MatrixXd::Constant(width, out, std::log(1e-2));
    layer.util_logit = Eigen::MatrixXd::Constant(width, g.blocks, 2.0);
    layer.stick_loga = Eigen::MatrixXd::Constant(1, g.blocks, std::log(ibp_alpha));
    layer.stick_logb = Eigen::MatrixXd::Zero(1, g.blocks);
    layer.prune_mask = Eigen::MatrixXd::Ones(width, g.blocks);
    net.layers.push_back(std::move(layer));
    width = out;
  }
  net.readout_mu =
      sample_normal(rng, width + 1, classes) / std::sqrt(static_cast<double>(width + 1));
  net.readout_logvar = Eigen::MatrixXd::Constant(width + 1, classes, std::log(1e-2));
  return net;
}

void TrainConfig::validate() const {
  if (!(gs_temperature > 0.0) || !(rb_temperature > 0.0))
    throw DomainError("temperatures must be positive");
  if (mc_samples < 1) throw DomainError("mc_samples must be at least 1");
  if (batch_size < 1) throw DomainError("batch size must be at least 1");
}

LwtaForward lwta_forward(const LwtaNetwork& net, const Eigen::MatrixXd& x_batch, Rng& rng,
                         ForwardMode mode, const TrainConfig& cfg) {
  net.validate();
  cfg.validate();
  if (x_batch.cols() != net.input_dim())
    throw DomainError("batch width must match the first layer input dimension");

  const int batch = static_cast<int>(x_batch.rows());
  LwtaForward out;
  Eigen::MatrixXd x = x_batch;

  for (const auto& layer : net.layers) {
    const int K = layer.blocks, J = layer.units;
    // utility draw
    Eigen::MatrixXd z(layer.in_dim, K);
    if (mode == ForwardMode::Train) {
      for (int i = 0; i < layer.in_dim; ++i)
        for (int k = 0; k < K; ++k)
          z(i, k) = sigmoid((layer.util_logit(i, k) + rng.logistic()) / cfg.rb_temperature);
    } else {
      z = layer.util_logit.unaryExpr([](double v) { return sigmoid(v) >= 0.5 ? 1.0 : 0.0; });
    }
    z = z.cwiseProduct(layer.prune_mask);
    out.z.push_back(z);

    // weights
    Eigen::MatrixXd w;
    if (mode == ForwardMode::Train) {
      w = layer.w_mu +
          (0.5 * layer.w_logvar).array().exp().matrix().cwiseProduct(
              sample_normal(rng, layer.in_dim, layer.out_dim()));
    } else {
      w = layer.w_mu;
    }

    // effective weights: w_{i,(k,j)} * z_{i,k}
    Eigen::MatrixXd weff(layer.in_dim, layer.out_dim());
    for (int k = 0; k < K; ++k)
      for (int j = 0; j < J; ++j)
        weff.col(k * J + j) = w.col(k * J + j).cwiseProduct(z.col(k));
    Eigen::MatrixXd h = x * weff;

    // winner probabilities per block
    Eigen::MatrixXd p(batch, K * J);
    for (int r = 0; r < batch; ++r) {
      for (int k = 0; k < K; ++k) {
        const double m = h.row(r).segment(k * J, J).maxCoeff();
        Eigen::ArrayXd e = (h.row(r).segment(k * J, J).array() - m).exp();
        p.row(r).segment(k * J, J) = (e / e.sum()).matrix();
      }
    }
    out.winner_probs.push_back(p);

    // winner indicators
    Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(batch, K * J);
    if (mode == ForwardMode::Train) {
      for (int r = 0; r < batch; ++r)
        for (int k = 0; k < K; ++k) {
          Eigen::ArrayXd g(J);
          for (int j = 0; j < J; ++j) g[j] = rng.gumbel();
          Eigen::ArrayXd t = (h.row(r).segment(k * J, J).transpose().array() + g) /
                             cfg.gs_temperature;
          const double m = t.maxCoeff();
          Eigen::ArrayXd e = (t - m).exp();
          xi.row(r).segment(k * J, J) = (e / e.sum()).matrix().transpose();
        }
    } else if (mode == ForwardMode::TestSample) {
      for (int r = 0; r < batch; ++r)
        for (int k = 0; k < K; ++k) {
          const double u = rng.uniform();
          double acc = 0.0;
          int pick = J - 1;
          for (int j = 0; j < J; ++j) {
            acc += p(r, k * J + j);
            if (u <= acc) {
              pick = j;
              break;
            }
          }
          xi(r, k * J + pick) = 1.0;
        }
    } else {
      for (int r = 0; r < batch; ++r)
        for (int k = 0; k < K; ++k) {
          int pick = 0;
          h.row(r).segment(k * J, J).maxCoeff(&pick);
          xi(r, k * J + pick) = 1.0;
        }
    }
    out.xi.push_back(xi);

    x = xi.cwiseProduct(h);
    out.activations.push_back(x);
  }

  // readout
  Eigen::MatrixXd r_w;
  if (mode == ForwardMode::Train) {
    r_w = net.readout_mu +
          (0.5 * net.readout_logvar).array().exp().matrix().cwiseProduct(
              sample_normal(rng, net.readout_mu.rows(), net.readout_mu.cols()));
  } else {
    r_w = net.readout_mu;
  }
  Eigen::MatrixXd ext(batch, x.cols() + 1);
  ext.leftCols(x.cols()) = x;
  ext.col(x.cols()).setOnes();
  Eigen::MatrixXd logits = ext * r_w;

  out.class_probs.resize(batch, net.classes);
  for (int r = 0; r < batch; ++r) {
    const double m = logits.row(r).maxCoeff();
    Eigen::ArrayXd e = (logits.row(r).array() - m).exp();
    out.class_probs.row(r) = (e / e.sum()).matrix();
  }
  return out;
}

LwtaGradients lwta_elbo_grad(const LwtaNetwork& net, const Eigen::MatrixXd& x_batch,
                             const Eigen::VectorXi& labels, const TrainConfig& cfg,
                             std::uint64_t noise_seed, double data_scale) {
  net.validate();
  cfg.validate();
  if (x_batch.rows() != labels.size()) throw DomainError("label count must match batch size");
  for (int i = 0; i < labels.size(); ++i)
    if (labels[i] < 0 || labels[i] >= net.classes)
      throw DomainError("labels must lie in [0, classes)");

  Rng rng(noise_seed);
  ad::Tape tape;
  using ad::Var;

  const int batch = static_cast<int>(x_batch.rows());
  std::vector<Var> params;  // creation order mirrors lwta_parameter_views

  Var x = tape.constant(x_batch);
  Var kl_w = tape.constant(Eigen::MatrixXd::Zero(1, 1));
  Var kl_z = tape.constant(Eigen::MatrixXd::Zero(1, 1));
  Var kl_xi = tape.constant(Eigen::MatrixXd::Zero(1, 1));
  Var kl_u = tape.constant(Eigen::MatrixXd::Zero(1, 1));

  for (const auto& layer : net.layers) {
    const int K = layer.blocks, J = layer.units;
    Var w_mu = tape.param(layer.w_mu);
    Var w_logvar = tape.param(layer.w_logvar);
    Var util_logit = tape.param(layer.util_logit);
    Var stick_loga = tape.param(layer.stick_loga);
    Var stick_logb = tape.param(layer.stick_logb);
    params.insert(params.end(), {w_mu, w_logvar, util_logit, stick_loga, stick_logb});

    // weight reparameterization w = mu + exp(logvar/2) * eps
    Var eps = tape.constant(sample_normal(rng, layer.in_dim, layer.out_dim()));
    Var w = tape.add(w_mu, tape.mul(tape.exp_(tape.scale(w_logvar, 0.5)), eps));

    // relaxed Bernoulli utilities, hard-pruned links stay at zero
    Var noise = tape.constant(sample_logistic(rng, layer.in_dim, K));
    Var z_soft = tape.sigmoid(tape.scale(tape.add(util_logit, noise), 1.0 / cfg.rb_temperature));
    Var z = tape.mul(z_soft, tape.constant(layer.prune_mask));

    // sticks: u = (1 - (1-s)^{1/b})^{1/a}, log pi_k = cumsum log u
    Var a = tape.exp_(stick_loga);
    Var b = tape.exp_(stick_logb);
    Eigen::MatrixXd s_draw = sample_uniform(rng, 1, K);
    Var log1ms = tape.constant(
        s_draw.unaryExpr([](double s) { return std::log1p(-s); }));  // log(1-s)
    Var pow_b = tape.exp_(tape.mul(log1ms, tape.reciprocal(b)));      // (1-s)^{1/b}
    Var u = tape.exp_(tape.mul(tape.log_(tape.one_minus(pow_b)), tape.reciprocal(a)));
    Var log_pi = tape.cumsum_row(tape.log_(u));  // 1 x K
    Var log_1m_pi = tape.log1m(tape.exp_(log_pi));

    // KL(q(Z) || p(Z | pi)) with E[log pi] from the same stick sample
    Var pi_tilde = tape.sigmoid(util_logit);
    Var log_pt = tape.neg(tape.softplus(tape.neg(util_logit)));   // log pi_tilde
    Var log_1m_pt = tape.neg(tape.softplus(util_logit));          // log(1 - pi_tilde)
    Var b_log_pi = tape.broadcast_rows(log_pi, layer.in_dim);
    Var b_log_1m_pi = tape.broadcast_rows(log_1m_pi, layer.in_dim);
    Var kl_z_layer = tape.sum(tape.add(
        tape.mul(pi_tilde, tape.sub(log_pt, b_log_pi)),
        tape.mul(tape.one_minus(pi_tilde), tape.sub(log_1m_pt, b_log_1m_pi))));
    kl_z = tape.add(kl_z, kl_z_layer);

    // KL(q(U) || Beta(alpha, 1))
    kl_u = tape.add(kl_u, tape.kumaraswamy_kl(a, b, net.ibp_alpha, 1.0));

    // layer map: h = x (W .* z)
    Var weff = tape.mul(w, tape.repeat_cols(z, J));
    Var h = tape.matmul(x, weff);

    // KL(q(Xi) || uniform): sum P (log P + log J), per sample
    Var lsm = tape.log_softmax_groups(h, J);
    Var p = tape.exp_(lsm);
    kl_xi = tape.add(kl_xi, tape.sum(tape.mul(p, tape.add_scalar(lsm, std::log(J)))));

    // Gumbel-Softmax winner relaxation
    Var gumbel = tape.constant(sample_gumbel(rng, batch, K * J));
    Var xi = tape.softmax_groups(tape.scale(tape.add(h, gumbel), 1.0 / cfg.gs_temperature), J);
    x = tape.mul(xi, h);

    // KL(q(W) || N(0,1)) = 1/2 sum (mu^2 + zeta - log zeta - 1)
    Var zeta = tape.exp_(w_logvar);
    Var kl_w_layer = tape.scale(
        tape.sum(tape.add_scalar(tape.sub(tape.add(tape.mul(w_mu, w_mu), zeta), w_logvar), -1.0)),
        0.5);
    kl_w = tape.add(kl_w, kl_w_layer);
  }

  // readout
  Var r_mu = tape.param(net.readout_mu);
  Var r_logvar = tape.param(net.readout_logvar);
  params.insert(params.end(), {r_mu, r_logvar});
  Var r_eps = tape.constant(
      sample_normal(rng, static_cast<int>(net.readout_mu.rows()),
                    static_cast<int>(net.readout_mu.cols())));
  Var r_w = tape.add(r_mu, tape.mul(tape.exp_(tape.scale(r_logvar, 0.5)), r_eps));
  Var logits = tape.matmul(tape.append_ones(x), r_w);
  Var r_zeta = tape.exp_(r_logvar);
  kl_w = tape.add(
      kl_w, tape.scale(tape.sum(tape.add_scalar(
                           tape.sub(tape.add(tape.mul(r_mu, r_mu), r_zeta), r_logvar), -1.0)),
                       0.5));

  Var nll = tape.nll(logits, labels);
  Var loss = tape.add(tape.scale(tape.add(nll, kl_xi), data_scale),
                      tape.add(kl_w, tape.add(kl_z, kl_u)));
  tape.backward(loss);

  LwtaGradients out;
  out.elbo = -tape.value(loss)(0, 0);
  if (!std::isfinite(out.elbo)) throw NumericalError("non-finite ELBO value");
  out.kl_terms = {tape.value(kl_w)(0, 0), tape.value(kl_z)(0, 0), tape.value(kl_xi)(0, 0),
                  tape.value(kl_u)(0, 0)};
  for (Var p : params) {
    if (!tape.grad(p).allFinite()) {
      std::ostringstream msg;
      msg << "non-finite gradient in parameter tensor " << out.grads.size();
      throw NumericalError(msg.str());
    }
    out.grads.push_back(tape.grad(p));
  }
  return out;
}

std::vector<Eigen::MatrixXd*> lwta_parameter_views(LwtaNetwork& net) {
  std::vector<Eigen::MatrixXd*> views;
  for (auto& layer : net.layers) {
    views.push_back(&layer.w_mu);
    views.push_back(&layer.w_logvar);
    views.push_back(&layer.util_logit);
    views.push_back(&layer.stick_loga);
    views.push_back(&layer.stick_logb);
  }
  views.push_back(&net.readout_mu);
  views.push_back(&net.readout_logvar);
  return views;
}

TrainResult lwta_train(LwtaNetwork& net, const Eigen::MatrixXd& X, const Eigen::VectorXi& y,
                       const TrainConfig& cfg) {
  net.validate();
  cfg.validate();
  if (X.rows() < 1) throw DomainError("training dataset must be non-empty");
  if (X.rows() != y.size()) throw DomainError("label count must match sample count");

  const auto t0 = std::chrono::steady_clock::now();
  const int n = static_cast<int>(X.rows());
  const int batch = std::min(cfg.batch_size, n);
  std::vector<Eigen::MatrixXd*> views = lwta_parameter_views(net);
  AdamState adam;
  TrainResult result;

  std::uint64_t step_counter = 0;
  double smoothed_start = 0.0;
  bool have_start = false;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // deterministic shuffle per epoch
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    Rng shuffle_rng = Rng::split(cfg.seed, 0xE9000000ULL + epoch);
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(shuffle_rng.next_u64() % (i + 1));
      std::swap(order[i], order[j]);
    }

    for (int start = 0; start < n; start += batch) {
      const int sz = std::min(batch, n - start);
      Eigen::MatrixXd xb(sz, X.cols());
      Eigen::VectorXi yb(sz);
      for (int i = 0; i < sz; ++i) {
        xb.row(i) = X.row(order[start + i]);
        yb[i] = y[order[start + i]];
      }
      const double scale = static_cast<double>(n) / sz;

      std::vector<Eigen::MatrixXd> grad_acc;
      double elbo = 0.0;
      for (int s = 0; s < cfg.mc_samples; ++s) {
        LwtaGradients g = lwta_elbo_grad(net, xb, yb, cfg,
                                         Rng::split(cfg.seed, step_counter * 131 + s).next_u64(),
                                         scale);
        if (grad_acc.empty()) {
          grad_acc = std::move(g.grads);
        } else {
          for (size_t i = 0; i < grad_acc.size(); ++i) grad_acc[i] += g.grads[i];
        }
        elbo += g.elbo;
      }
      elbo /= cfg.mc_samples;
      for (auto& g : grad_acc) g /= cfg.mc_samples;

      adam_step(views, grad_acc, adam, cfg.learning_rate);
      result.elbo_trace.push_back(elbo);
      step_counter += 1;

      // divergence detection on the smoothed trace (window 50)
      const int window = 50;
      if (static_cast<int>(result.elbo_trace.size()) >= window) {
        double smoothed = 0.0;
        for (size_t i = result.elbo_trace.size() - window; i < result.elbo_trace.size(); ++i)
          smoothed += result.elbo_trace[i];
        smoothed /= window;
        if (!have_start) {
          smoothed_start = smoothed;
          have_start = true;
        } else if (smoothed < smoothed_start - 10.0 * (std::fabs(smoothed_start) + 1.0)) {
          result.diverged = true;
          result.seconds =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
          std::ostringstream msg;
          msg << "training diverged: smoothed ELBO " << smoothed << " vs start "
              << smoothed_start << " after " << result.elbo_trace.size() << " steps";
          throw NumericalError(msg.str());
        }
      }
    }
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

PruneStats lwta_prune(LwtaNetwork& net, double tau) {
  if (!(tau > 0.0) || !(tau < 1.0)) throw DomainError("cutoff tau must lie in (0, 1)");
  PruneStats stats;
  for (auto& layer : net.layers) {
    const Eigen::MatrixXd pi = layer.util_prob();
    int retained = 0;
    for (int i = 0; i < pi.rows(); ++i)
      for (int k = 0; k < pi.cols(); ++k) {
        if (pi(i, k) < tau) layer.prune_mask(i, k) = 0.0;
        if (layer.prune_mask(i, k) > 0.0) ++retained;
      }
    const int total = static_cast<int>(pi.size());
    stats.retained_fraction.push_back(static_cast<double>(retained) / total);
    stats.links_total += total;
    stats.links_retained += retained;
  }
  return stats;
}

BitReport lwta_bit_report(const LwtaNetwork& net, int ceiling) {
  BitReport report;
  report.ceiling = ceiling;
  auto layer_bits = [&](const Eigen::MatrixXd& mu, const Eigen::MatrixXd& logvar) {
    Eigen::VectorXi hist = Eigen::VectorXi::Zero(ceiling + 1);
    double total = 0.0;
    for (int i = 0; i < mu.rows(); ++i)
      for (int j = 0; j < mu.cols(); ++j) {
        const double sd = std::exp(0.5 * logvar(i, j));
        // smallest m >= 0 with half-ulp error |mu| 2^{-(m+1)} < sd/2
        int bits = 0;
        while (bits < ceiling &&
               !(std::fabs(mu(i, j)) * std::pow(2.0, -(bits + 1)) < 0.5 * sd))
          ++bits;
        hist[bits] += 1;
        total += bits;
      }
    report.histogram.push_back(hist);
    report.mean_bits.push_back(total / mu.size());
  };
  for (const auto& layer : net.layers) layer_bits(layer.w_mu, layer.w_logvar);
  layer_bits(net.readout_mu, net.readout_logvar);
  return report;
}

Eigen::VectorXi lwta_predict(const LwtaNetwork& net, const Eigen::MatrixXd& X, Rng& rng,
                             ForwardMode mode) {
  const LwtaForward fwd = lwta_forward(net, X, rng, mode);
  Eigen::VectorXi labels(X.rows());
  for (int r = 0; r < X.rows(); ++r) {
    int best = 0;
    fwd.class_probs.row(r).maxCoeff(&best);
    labels[r] = best;
  }
  return labels;
}

double lwta_accuracy(const LwtaNetwork& net, const Eigen::MatrixXd& X, const Eigen::VectorXi& y,
                     Rng& rng, ForwardMode mode) {
  const Eigen::VectorXi pred = lwta_predict(net, X, rng, mode);
  int hits = 0;
  for (int i = 0; i < y.size(); ++i)
    if (pred[i] == y[i]) ++hits;
  return static_cast<double>(hits) / y.size();
}

namespace {

constexpr char kMagic[8] = {'S', 'B', 'T', 'K', 'L', 'W', '0', '1'};

void write_matrix(std::ofstream& os, const Eigen::MatrixXd& m) {
  const std::uint32_t rows = static_cast<std::uint32_t>(m.rows());
  const std::uint32_t cols = static_cast<std::uint32_t>(m.cols());
  os.write(reinterpret_cast<const char*>(&rows), 4);
  os.write(reinterpret_cast<const char*>(&cols), 4);
  for (int c = 0; c < m.cols(); ++c)
    for (int r = 0; r < m.rows(); ++r) {
      const double v = m(r, c);
      os.write(reinterpret_cast<const char*>(&v), 8);
    }
}

Eigen::MatrixXd read_matrix(std::ifstream& is) {
  std::uint32_t rows = 0, cols = 0;
  is.read(reinterpret_cast<char*>(&rows), 4);
  is.read(reinterpret_cast<char*>(&cols), 4);
  if (!is || rows > 1u << 24 || cols > 1u << 24)
    throw DomainError("corrupt network container: bad matrix header");
  Eigen::MatrixXd m(rows, cols);
  for (std::uint32_t c = 0; c < cols; ++c)
    for (std::uint32_t r = 0; r < rows; ++r) {
      double v = 0.0;
      is.read(reinterpret_cast<char*>(&v), 8);
      m(r, c) = v;
    }
  if (!is) throw DomainError("corrupt network container: truncated matrix");
  return m;
}

}  // namespace

void lwta_save(const LwtaNetwork& net, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DomainError("cannot open " + path + " for writing");
  os.write(kMagic, 8);
  const std::uint32_t version = 1;
  os.write(reinterpret_cast<const char*>(&version), 4);
  const std::uint32_t n_layers = static_cast<std::uint32_t>(net.layers.size());
  const std::uint32_t classes = static_cast<std::uint32_t>(net.classes);
  os.write(reinterpret_cast<const char*>(&n_layers), 4);
  os.write(reinterpret_cast<const char*>(&classes), 4);
  os.write(reinterpret_cast<const char*>(&net.ibp_alpha), 8);
  for (const auto& layer : net.layers) {
    const std::uint32_t geo[3] = {static_cast<std::uint32_t>(layer.in_dim),
                                  static_cast<std::uint32_t>(layer.blocks),
                                  static_cast<std::uint32_t>(layer.units)};
    os.write(reinterpret_cast<const char*>(geo), 12);
    write_matrix(os, layer.w_mu);
    write_matrix(os, layer.w_logvar);
    write_matrix(os, layer.util_logit);
    write_matrix(os, layer.stick_loga);
    write_matrix(os, layer.stick_logb);
    write_matrix(os, layer.prune_mask);
  }
  write_matrix(os, net.readout_mu);
  write_matrix(os, net.readout_logvar);
  if (!os) throw NumericalError("failed writing network container to " + path);
}

LwtaNetwork lwta_load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DomainError("cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw DomainError("not a network container: bad magic in " + path);
  std::uint32_t version = 0, n_layers = 0, classes = 0;
  is.read(reinterpret_cast<char*>(&version), 4);
  if (version != 1) throw DomainError("unsupported network container version");
  is.read(reinterpret_cast<char*>(&n_layers), 4);
  is.read(reinterpret_cast<char*>(&classes), 4);
  LwtaNetwork net;
  net.classes = static_cast<int>(classes);
  is.read(reinterpret_cast<char*>(&net.ibp_alpha), 8);
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    std::uint32_t geo[3];
    is.read(reinterpret_cast<char*>(geo), 12);
    LwtaLayer layer;
    layer.in_dim = static_cast<int>(geo[0]);
    layer.blocks = static_cast<int>(geo[1]);
    layer.units = static_cast<int>(geo[2]);
    layer.w_mu = read_matrix(is);
    layer.w_logvar = read_matrix(is);
    layer.util_logit = read_matrix(is);
    layer.stick_loga = read_matrix(is);
    layer.stick_logb = read_matrix(is);
    layer.prune_mask = read_matrix(is);
    net.layers.push_back(std::move(layer));
  }
  net.readout_mu = read_matrix(is);
  net.readout_logvar = read_matrix(is);
  net.validate();
  return net;
}

}  // namespace sbtk

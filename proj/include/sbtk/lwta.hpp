#ifndef SBTK_LWTA_HPP_
#define SBTK_LWTA_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "sbtk/rng.hpp"

namespace sbtk {

// One stochastic local-winner-takes-all layer: K blocks of J competing linear
// units, Gaussian weight posteriors, per-link Bernoulli utility posteriors and
// per-block Kumaraswamy stick posteriors for the IBP prior.
struct LwtaLayer {
  int in_dim = 0, blocks = 0, units = 0;
  Eigen::MatrixXd w_mu;        // in_dim x (K*J), column k*J + j
  Eigen::MatrixXd w_logvar;    // log zeta_{ikj}
  Eigen::MatrixXd util_logit;  // in_dim x K, pi_tilde = sigmoid(util_logit)
  Eigen::MatrixXd stick_loga;  // 1 x K
  Eigen::MatrixXd stick_logb;  // 1 x K
  Eigen::MatrixXd prune_mask;  // in_dim x K of {0,1}; 0 = link hard-removed

  int out_dim() const { return blocks * units; }
  Eigen::MatrixXd util_prob() const;  // sigmoid(util_logit)
};

struct LwtaNetwork {
  std::vector<LwtaLayer> layers;
  Eigen::MatrixXd readout_mu;      // (H+1) x C, last row is the bias feature
  Eigen::MatrixXd readout_logvar;
  int classes = 0;
  double ibp_alpha = 1.0;

  int input_dim() const { return layers.empty() ? 0 : layers.front().in_dim; }
  void validate() const;
};

struct LayerGeometry {
  int blocks = 1;
  int units = 1;
};

LwtaNetwork lwta_create(int input_dim, const std::vector<LayerGeometry>& geometry, int classes,
                        double ibp_alpha, std::uint64_t seed);

struct TrainConfig {
  double learning_rate = 0.01;
  double gs_temperature = 0.67;   // Gumbel-Softmax
  double rb_temperature = 0.5;    // relaxed Bernoulli
  int epochs = 100;
  int batch_size = 64;
  std::uint64_t seed = 0;
  int mc_samples = 1;             // samples per SGVB step

  void validate() const;
};

enum class ForwardMode { Train, TestSample, TestArgmax };

struct LwtaForward {
  Eigen::MatrixXd class_probs;                // B x C
  std::vector<Eigen::MatrixXd> activations;   // per layer: B x (K*J), post winner gating
  std::vector<Eigen::MatrixXd> winner_probs;  // per layer: B x (K*J), block rows sum to 1
  std::vector<Eigen::MatrixXd> xi;            // per layer: sampled/relaxed winner indicators
  std::vector<Eigen::MatrixXd> z;             // per layer: utility draws (in_dim x K)
};

LwtaForward lwta_forward(const LwtaNetwork& net, const Eigen::MatrixXd& x_batch, Rng& rng,
                         ForwardMode mode, const TrainConfig& cfg = {});

// Flattened-parameter gradient bundle, one matrix per parameter tensor in
// network order (per layer: w_mu, w_logvar, util_logit, stick_loga,
// stick_logb; then readout_mu, readout_logvar).
struct LwtaGradients {
  double elbo = 0.0;
  std::vector<Eigen::MatrixXd> grads;
  std::vector<double> kl_terms;  // [kl_w, kl_z, kl_xi, kl_u] at the sampled draw
};

// Single-sample reparameterized ELBO and its gradient with respect to every
// variational parameter. `data_scale` multiplies the data-dependent terms
// (cross entropy and winner KL) for minibatch estimation. Deterministic given
// `noise_seed`.
LwtaGradients lwta_elbo_grad(const LwtaNetwork& net, const Eigen::MatrixXd& x_batch,
                             const Eigen::VectorXi& labels, const TrainConfig& cfg,
                             std::uint64_t noise_seed, double data_scale = 1.0);

// Applies a gradient bundle view of the network parameters in the same order.
std::vector<Eigen::MatrixXd*> lwta_parameter_views(LwtaNetwork& net);

struct TrainResult {
  std::vector<double> elbo_trace;  // per optimization step
  bool diverged = false;
  double seconds = 0.0;
};

TrainResult lwta_train(LwtaNetwork& net, const Eigen::MatrixXd& X, const Eigen::VectorXi& y,
                       const TrainConfig& cfg);

struct PruneStats {
  std::vector<double> retained_fraction;  // per layer
  int links_total = 0;
  int links_retained = 0;
};

// Hard-removes links with posterior utility below the cutoff (z set to 0).
PruneStats lwta_prune(LwtaNetwork& net, double tau);

struct BitReport {
  std::vector<Eigen::VectorXi> histogram;  // per layer, bins 0..ceiling
  std::vector<double> mean_bits;           // per layer
  int ceiling = 23;
};

// Smallest mantissa bit count per weight such that the half-ulp quantization
// error stays below half the posterior standard deviation; the readout layer
// is reported last.
BitReport lwta_bit_report(const LwtaNetwork& net, int ceiling = 23);

Eigen::VectorXi lwta_predict(const LwtaNetwork& net, const Eigen::MatrixXd& X, Rng& rng,
                             ForwardMode mode = ForwardMode::TestArgmax);
double lwta_accuracy(const LwtaNetwork& net, const Eigen::MatrixXd& X, const Eigen::VectorXi& y,
                     Rng& rng, ForwardMode mode = ForwardMode::TestArgmax);

void lwta_save(const LwtaNetwork& net, const std::string& path);
LwtaNetwork lwta_load(const std::string& path);

}  // namespace sbtk

#endif  // SBTK_LWTA_HPP_

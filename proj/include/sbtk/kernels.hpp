#ifndef SBTK_KERNELS_HPP_
#define SBTK_KERNELS_HPP_

#include <Eigen/Dense>
#include <string>
#include <variant>
#include <vector>

namespace sbtk {

struct KernelSpec;

// k(x, x') = sigma_s^2 exp(-||x - x'||^2 / (2 ell^2)); any input dimension.
struct SeKernel {
  double sigma2 = 1.0;
  double ell = 1.0;
};

// k(tau) = sigma0^2/Q sum_i cos(2 pi w_i tau); 1-D inputs, w_i in [0, 1/2).
struct SparseSpectrumKernel {
  double sigma0_sq = 1.0;
  Eigen::VectorXd freqs;
};

// k(tau) = sum_i a_i exp(-2 pi^2 tau^2 s2_i) cos(2 pi mu_i tau); 1-D inputs.
// bandwidths holds the component variances s2_i.
struct SpectralMixtureKernel {
  Eigen::VectorXd weights;
  Eigen::VectorXd freqs;
  Eigen::VectorXd bandwidths;
};

// Spectral mixture with frequencies/bandwidths fixed to a grid; only the
// nonnegative weights are learnable.
struct GridSmKernel {
  Eigen::VectorXd weights;
  Eigen::VectorXd grid_freqs;
  Eigen::VectorXd grid_bandwidths;  // variances s2_i
};

struct LinearComboKernel {
  Eigen::VectorXd weights;
  std::vector<KernelSpec> parts;
};

struct KernelSpec {
  std::variant<SeKernel, SparseSpectrumKernel, SpectralMixtureKernel, GridSmKernel,
               LinearComboKernel>
      node;

  void validate() const;
  std::string variant_name() const;
  // Number of learnable linear weights (GridSM / linear combo), 0 otherwise.
  int weight_count() const;
};

double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& xp);

// Entrywise kernel over row-inputs; for X == X2 the result is symmetric PSD
// up to floating-point slack.
Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& X,
                              const Eigen::MatrixXd& X2);
Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& X);

// Symmetric Gaussian-mixture spectral density (spectral_mixture / grid_sm).
double spectral_density(const KernelSpec& spec, double omega);

// GridSM spec with mu_i = lo + (hi-lo) i/Q, all component standard deviations
// equal to sigma (variances sigma^2), and zero weights.
KernelSpec grid_make(int q, double freq_lo, double freq_hi, double sigma);

// Weight access for the linear-in-weights variants (GridSM, linear combo).
Eigen::VectorXd kernel_weights(const KernelSpec& spec);
void set_kernel_weights(KernelSpec& spec, const Eigen::VectorXd& w);

// Per-subkernel Grams K_i with unit weight, in weight order.
std::vector<Eigen::MatrixXd> subkernel_grams(const KernelSpec& spec, const Eigen::MatrixXd& X);

// Self-describing text serialization (JSON); lossless for finite parameters.
std::string kernel_to_json(const KernelSpec& spec);
KernelSpec kernel_from_json(const std::string& text);

// Gram caches for C(eta) = sum_i alpha_i K_i + v I with the jitter policy:
// on Cholesky failure 1e-8 * trace is added to the diagonal once.
struct GramCache {
  std::vector<Eigen::MatrixXd> subgrams;
  Eigen::MatrixXd C;
  Eigen::LLT<Eigen::MatrixXd> chol;
  double jitter_used = 0.0;

  void assemble(const Eigen::VectorXd& weights, double v);
};

// min eigenvalue of a symmetric matrix (PSD checks in tests and validation).
double min_symmetric_eigenvalue(const Eigen::MatrixXd& m);

}  // namespace sbtk

#endif  // SBTK_KERNELS_HPP_

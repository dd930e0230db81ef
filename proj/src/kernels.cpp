#include "sbtk/kernels.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "sbtk/errors.hpp"

namespace sbtk {

namespace {

using json = nlohmann::ordered_json;
constexpr double kTwoPiSq = 2.0 * M_PI * M_PI;

void require_1d(const Eigen::VectorXd& x, const Eigen::VectorXd& xp, const char* variant) {
  if (x.size() != 1 || xp.size() != 1) {
    std::ostringstream msg;
    msg << variant << " kernel is defined for one-dimensional inputs, got dims " << x.size()
        << " and " << xp.size();
    throw DomainError(msg.str());
  }
}

double sm_component(double tau, double weight, double mu, double s2) {
  return weight * std::exp(-kTwoPiSq * tau * tau * s2) * std::cos(2.0 * M_PI * tau * mu);
}

double gaussian_pdf(double x, double mean, double var) {
  return std::exp(-0.5 * (x - mean) * (x - mean) / var) / std::sqrt(2.0 * M_PI * var);
}

void check_nonneg(const Eigen::VectorXd& v, const char* what) {
  if (v.size() > 0 && (!(v.minCoeff() >= 0.0) || !v.allFinite())) {
    throw DomainError(std::string(what) + " must be finite and nonnegative");
  }
}

json vec_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vec_from_json(const json& arr) {
  Eigen::VectorXd v(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) v[static_cast<int>(i)] = arr[i].get<double>();
  return v;
}

json spec_to_json(const KernelSpec& spec);

KernelSpec spec_from_json(const json& j);

json spec_to_json(const KernelSpec& spec) {
  json j;
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, SeKernel>) {
          j["variant"] = "se";
          j["sigma2"] = k.sigma2;
          j["ell"] = k.ell;
        } else if constexpr (std::is_same_v<T, SparseSpectrumKernel>) {
          j["variant"] = "sparse_spectrum";
          j["sigma0_sq"] = k.sigma0_sq;
          j["freqs"] = vec_to_json(k.freqs);
        } else if constexpr (std::is_same_v<T, SpectralMixtureKernel>) {
          j["variant"] = "spectral_mixture";
          j["weights"] = vec_to_json(k.weights);
          j["freqs"] = vec_to_json(k.freqs);
          j["bandwidths"] = vec_to_json(k.bandwidths);
        } else if constexpr (std::is_same_v<T, GridSmKernel>) {
          j["variant"] = "grid_sm";
          j["weights"] = vec_to_json(k.weights);
          j["grid_freqs"] = vec_to_json(k.grid_freqs);
          j["grid_bandwidths"] = vec_to_json(k.grid_bandwidths);
        } else if constexpr (std::is_same_v<T, LinearComboKernel>) {
          j["variant"] = "linear_combo";
          j["weights"] = vec_to_json(k.weights);
          json parts = json::array();
          for (const auto& p : k.parts) parts.push_back(spec_to_json(p));
          j["parts"] = parts;
        }
      },
      spec.node);
  return j;
}

KernelSpec spec_from_json(const json& j) {
  const std::string variant = j.at("variant").get<std::string>();
  KernelSpec spec;
  if (variant == "se") {
    spec.node = SeKernel{j.at("sigma2").get<double>(), j.at("ell").get<double>()};
  } else if (variant == "sparse_spectrum") {
    spec.node = SparseSpectrumKernel{j.at("sigma0_sq").get<double>(), vec_from_json(j.at("freqs"))};
  } else if (variant == "spectral_mixture") {
    spec.node = SpectralMixtureKernel{vec_from_json(j.at("weights")), vec_from_json(j.at("freqs")),
                                      vec_from_json(j.at("bandwidths"))};
  } else if (variant == "grid_sm") {
    spec.node = GridSmKernel{vec_from_json(j.at("weights")), vec_from_json(j.at("grid_freqs")),
                             vec_from_json(j.at("grid_bandwidths"))};
  } else if (variant == "linear_combo") {
    LinearComboKernel combo;
    combo.weights = vec_from_json(j.at("weights"));
    for (const auto& p : j.at("parts")) combo.parts.push_back(spec_from_json(p));
    spec.node = std::move(combo);
  } else {
    throw DomainError("unknown kernel variant: " + variant);
  }
  spec.validate();
  return spec;
}

}  // namespace

void KernelSpec::validate() const {
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, SeKernel>) {
          if (!(k.sigma2 > 0.0) || !(k.ell > 0.0))
            throw DomainError("se kernel requires sigma2 > 0 and ell > 0");
        } else if constexpr (std::is_same_v<T, SparseSpectrumKernel>) {
          if (!(k.sigma0_sq > 0.0)) throw DomainError("sparse_spectrum requires sigma0_sq > 0");
          if (k.freqs.size() < 1) throw DomainError("sparse_spectrum requires Q >= 1");
          for (int i = 0; i < k.freqs.size(); ++i)
            if (!(k.freqs[i] >= 0.0) || !(k.freqs[i] < 0.5))
              throw DomainError("sparse_spectrum frequencies must lie in [0, 1/2)");
        } else if constexpr (std::is_same_v<T, SpectralMixtureKernel>) {
          if (k.weights.size() != k.freqs.size() || k.weights.size() != k.bandwidths.size())
            throw DomainError("spectral_mixture parameter lengths must agree");
          if (k.weights.size() < 1) throw DomainError("spectral_mixture requires Q >= 1");
          check_nonneg(k.weights, "spectral_mixture weights");
          check_nonneg(k.freqs, "spectral_mixture frequencies");
          if (!(k.bandwidths.minCoeff() > 0.0))
            throw DomainError("spectral_mixture bandwidths must be positive");
        } else if constexpr (std::is_same_v<T, GridSmKernel>) {
          if (k.weights.size() != k.grid_freqs.size() ||
              k.weights.size() != k.grid_bandwidths.size())
            throw DomainError("grid_sm parameter lengths must agree");
          if (k.weights.size() < 1) throw DomainError("grid_sm requires Q >= 1");
          check_nonneg(k.weights, "grid_sm weights");
          check_nonneg(k.grid_freqs, "grid_sm frequencies");
          if (!(k.grid_bandwidths.minCoeff() > 0.0))
            throw DomainError("grid_sm bandwidths must be positive");
        } else if constexpr (std::is_same_v<T, LinearComboKernel>) {
          if (k.weights.size() != static_cast<Eigen::Index>(k.parts.size()))
            throw DomainError("linear_combo weight count must match subkernel count");
          if (k.parts.empty()) throw DomainError("linear_combo requires at least one subkernel");
          check_nonneg(k.weights, "linear_combo weights");
          for (const auto& p : k.parts) p.validate();
        }
      },
      node);
}

std::string KernelSpec::variant_name() const {
  return std::visit(
      [&](const auto& k) -> std::string {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, SeKernel>) return "se";
        if constexpr (std::is_same_v<T, SparseSpectrumKernel>) return "sparse_spectrum";
        if constexpr (std::is_same_v<T, SpectralMixtureKernel>) return "spectral_mixture";
        if constexpr (std::is_same_v<T, GridSmKernel>) return "grid_sm";
        if constexpr (std::is_same_v<T, LinearComboKernel>) return "linear_combo";
      },
      node);
}

int KernelSpec::weight_count() const {
  if (const auto* g = std::get_if<GridSmKernel>(&node)) return static_cast<int>(g->weights.size());
  if (const auto* c = std::get_if<LinearComboKernel>(&node))
    return static_cast<int>(c->weights.size());
  return 0;
}

double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& xp) {
  return std::visit(
      [&](const auto& k) -> double {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, SeKernel>) {
          if (x.size() != xp.size()) throw DomainError("se kernel input dimensions must match");
          const double d2 = (x - xp).squaredNorm();
          return k.sigma2 * std::exp(-0.5 * d2 / (k.ell * k.ell));
        } else if constexpr (std::is_same_v<T, SparseSpectrumKernel>) {
          require_1d(x, xp, "sparse_spectrum");
          const double tau = x[0] - xp[0];
          double acc = 0.0;
          for (int i = 0; i < k.freqs.size(); ++i) acc += std::cos(2.0 * M_PI * k.freqs[i] * tau);
          return k.sigma0_sq / static_cast<double>(k.freqs.size()) * acc;
        } else if constexpr (std::is_same_v<T, SpectralMixtureKernel>) {
          require_1d(x, xp, "spectral_mixture");
          const double tau = x[0] - xp[0];
          double acc = 0.0;
          for (int i = 0; i < k.weights.size(); ++i)
            acc += sm_component(tau, k.weights[i], k.freqs[i], k.bandwidths[i]);
          return acc;
        } else if constexpr (std::is_same_v<T, GridSmKernel>) {
          require_1d(x, xp, "grid_sm");
          const double tau = x[0] - xp[0];
          double acc = 0.0;
          for (int i = 0; i < k.weights.size(); ++i)
            acc += sm_component(tau, k.weights[i], k.grid_freqs[i], k.grid_bandwidths[i]);
          return acc;
        } else if constexpr (std::is_same_v<T, LinearComboKernel>) {
          double acc = 0.0;
          for (size_t i = 0; i < k.parts.size(); ++i)
            acc += k.weights[static_cast<int>(i)] * kernel_eval(k.parts[i], x, xp);
          return acc;
        }
      },
      spec.node);
}

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& X,
                              const Eigen::MatrixXd& X2) {
  const int n = static_cast<int>(X.rows());
  const int m = static_cast<int>(X2.rows());
  if (X.cols() != X2.cols()) throw DomainError("kernel_matrix input dimensions must match");
  Eigen::MatrixXd K(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      K(i, j) = kernel_eval(spec, X.row(i).transpose(), X2.row(j).transpose());
  return K;
}

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::MatrixXd& X) {
  const int n = static_cast<int>(X.rows());
  Eigen::MatrixXd K(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double v = kernel_eval(spec, X.row(i).transpose(), X.row(j).transpose());
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

double spectral_density(const KernelSpec& spec, double omega) {
  const Eigen::VectorXd *w = nullptr, *mu = nullptr, *s2 = nullptr;
  if (const auto* sm = std::get_if<SpectralMixtureKernel>(&spec.node)) {
    w = &sm->weights;
    mu = &sm->freqs;
    s2 = &sm->bandwidths;
  } else if (const auto* g = std::get_if<GridSmKernel>(&spec.node)) {
    w = &g->weights;
    mu = &g->grid_freqs;
    s2 = &g->grid_bandwidths;
  } else {
    throw DomainError("spectral_density is defined for spectral_mixture and grid_sm kernels");
  }
  double acc = 0.0;
  for (int i = 0; i < w->size(); ++i) {
    acc += 0.5 * (*w)[i] *
           (gaussian_pdf(omega, (*mu)[i], (*s2)[i]) + gaussian_pdf(omega, -(*mu)[i], (*s2)[i]));
  }
  return acc;
}

KernelSpec grid_make(int q, double freq_lo, double freq_hi, double sigma) {
  if (q < 1) throw DomainError("grid_make requires Q >= 1");
  if (!(freq_lo >= 0.0) || !(freq_hi > freq_lo) || !(freq_hi <= 0.5))
    throw DomainError("grid_make requires 0 <= lo < hi <= 1/2");
  if (!(sigma > 0.0)) throw DomainError("grid_make requires sigma > 0");
  GridSmKernel g;
  g.weights = Eigen::VectorXd::Zero(q);
  g.grid_freqs.resize(q);
  for (int i = 0; i < q; ++i) g.grid_freqs[i] = freq_lo + (freq_hi - freq_lo) * i / q;
  g.grid_bandwidths = Eigen::VectorXd::Constant(q, sigma * sigma);
  KernelSpec spec;
  spec.node = std::move(g);
  return spec;
}

Eigen::VectorXd kernel_weights(const KernelSpec& spec) {
  if (const auto* g = std::get_if<GridSmKernel>(&spec.node)) return g->weights;
  if (const auto* c = std::get_if<LinearComboKernel>(&spec.node)) return c->weights;
  throw DomainError("kernel has no learnable linear weights: " + spec.variant_name());
}

void set_kernel_weights(KernelSpec& spec, const Eigen::VectorXd& w) {
  check_nonneg(w, "kernel weights");
  if (auto* g = std::get_if<GridSmKernel>(&spec.node)) {
    if (w.size() != g->weights.size()) throw DomainError("weight length mismatch");
    g->weights = w;
    return;
  }
  if (auto* c = std::get_if<LinearComboKernel>(&spec.node)) {
    if (w.size() != c->weights.size()) throw DomainError("weight length mismatch");
    c->weights = w;
    return;
  }
  throw DomainError("kernel has no learnable linear weights: " + spec.variant_name());
}

std::vector<Eigen::MatrixXd> subkernel_grams(const KernelSpec& spec, const Eigen::MatrixXd& X) {
  std::vector<Eigen::MatrixXd> out;
  if (const auto* g = std::get_if<GridSmKernel>(&spec.node)) {
    for (int i = 0; i < g->weights.size(); ++i) {
      SpectralMixtureKernel unit;
      unit.weights = Eigen::VectorXd::Ones(1);
      unit.freqs = Eigen::VectorXd::Constant(1, g->grid_freqs[i]);
      unit.bandwidths = Eigen::VectorXd::Constant(1, g->grid_bandwidths[i]);
      KernelSpec sub;
      sub.node = unit;
      out.push_back(kernel_matrix(sub, X));
    }
    return out;
  }
  if (const auto* c = std::get_if<LinearComboKernel>(&spec.node)) {
    for (const auto& p : c->parts) out.push_back(kernel_matrix(p, X));
    return out;
  }
  throw DomainError("subkernel grams are defined for grid_sm and linear_combo kernels");
}

std::string kernel_to_json(const KernelSpec& spec) { return spec_to_json(spec).dump(2); }

KernelSpec kernel_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DomainError(std::string("kernel config parse error: ") + e.what());
  }
  return spec_from_json(j);
}

void GramCache::assemble(const Eigen::VectorXd& weights, double v) {
  if (static_cast<size_t>(weights.size()) != subgrams.size())
    throw DomainError("gram cache weight length mismatch");
  const int n = subgrams.empty() ? 0 : static_cast<int>(subgrams[0].rows());
  C = v * Eigen::MatrixXd::Identity(n, n);
  for (size_t i = 0; i < subgrams.size(); ++i) C.noalias() += weights[static_cast<int>(i)] * subgrams[i];
  chol.compute(C);
  jitter_used = 0.0;
  if (chol.info() != Eigen::Success) {
    jitter_used = 1e-8 * C.trace();
    C.diagonal().array() += jitter_used;
    chol.compute(C);
    if (chol.info() != Eigen::Success)
      throw NumericalError("gram assembly failed even with jitter");
  }
}

double min_symmetric_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace sbtk

#include "sbtk/priors.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "sbtk/errors.hpp"
#include "sbtk/quadrature.hpp"
#include "sbtk/special.hpp"

namespace sbtk {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112353;
constexpr double kInf = std::numeric_limits<double>::infinity();

void require_finite(double theta) {
  if (!std::isfinite(theta)) throw DomainError("gsm density requires finite theta");
}

// Adaptive integration of f over [lo, hi] with an a-priori split so that a
// narrow peak inside a wide window cannot be missed by the first rule
// application.
double integrate_presplit(const std::function<double(double)>& f, double lo, double hi,
                          int presplit, double abs_tol, double rel_tol) {
  double total = 0.0;
  const double h = (hi - lo) / presplit;
  for (int i = 0; i < presplit; ++i) {
    total += integrate(f, lo + i * h, lo + (i + 1) * h, abs_tol / presplit, rel_tol);
  }
  return total;
}

// Int (2 pi zeta)^{-d/2} exp(-s/(2 zeta)) p(zeta) dzeta with zeta = e^t,
// for a generic log mixing density.
double mixture_integral(const std::function<double(double)>& log_mixing, int d, double s,
                        double t_center, double abs_tol, double rel_tol) {
  auto integrand = [&](double t) {
    const double zeta = std::exp(t);
    const double log_f = -0.5 * d * (kLog2Pi + t) - 0.5 * s / zeta + log_mixing(zeta) + t;
    return log_f < -745.0 ? 0.0 : std::exp(log_f);
  };
  const double lo = t_center - 60.0;
  const double hi = t_center + 60.0;
  return integrate_presplit(integrand, lo, hi, 32, abs_tol, rel_tol);
}

double half_cauchy_log_density(double x, double scale) {
  // 2 / (pi * scale * (1 + (x/scale)^2)), x > 0
  return std::log(2.0 / M_PI) - std::log(scale) - std::log1p((x / scale) * (x / scale));
}

// Core evaluator: log Int prod_{i=1..d} N(w_i; 0, zeta) p(zeta) dzeta written
// in terms of d and s = ||w||^2.
double log_group_density(const GsmSpec& spec, int d, double s) {
  switch (spec.kind) {
    case GsmKind::StudentT: {
      // Inverse-Gamma(a, b) mixing -> multivariate Student t.
      const double a = spec.a, b = spec.b;
      return -0.5 * d * kLog2Pi + a * std::log(b) - std::lgamma(a) + std::lgamma(a + 0.5 * d) -
             (a + 0.5 * d) * std::log(b + 0.5 * s);
    }
    case GsmKind::Laplacian: {
      // Gamma(a, rate b) mixing -> Bessel-K (variance gamma) form.
      const double a = spec.a, b = spec.b;
      const double nu = a - 0.5 * d;
      if (s <= 0.0) {
        if (nu <= 0.0) return kInf;  // density diverges at the origin
        return -0.5 * d * kLog2Pi + a * std::log(b) - std::lgamma(a) + std::lgamma(nu) -
               nu * std::log(b);
      }
      const double x = std::sqrt(2.0 * b * s);
      return std::log(2.0) + a * std::log(b) - std::lgamma(a) - 0.5 * d * kLog2Pi +
             0.5 * nu * std::log(s / (2.0 * b)) + log_bessel_k(nu, x);
    }
    case GsmKind::NormalJeffreys: {
      // Int (2 pi zeta)^{-d/2} e^{-s/(2 zeta)} zeta^{-1} dzeta
      //   = Gamma(d/2) / (pi s)^{d/2}, up to the improper mixing constant.
      if (s <= 0.0) return kInf;
      return std::lgamma(0.5 * d) - 0.5 * d * (std::log(M_PI) + std::log(s));
    }
    case GsmKind::GenHyperbolic: {
      const double a = spec.a, b = spec.b, lam = spec.order;
      const double log_norm =
          0.5 * lam * (std::log(a) - std::log(b)) - std::log(2.0) - log_bessel_k(lam, std::sqrt(a * b));
      auto log_mix = [&](double zeta) {
        return log_norm + (lam - 1.0) * std::log(zeta) - 0.5 * (a * zeta + b / zeta);
      };
      const double t_center = 0.5 * (std::log(std::max(s + b, 1e-8)) - std::log(a));
      const double v = mixture_integral(log_mix, d, s, t_center, 1e-12, 1e-9);
      if (!(v > 0.0)) throw NumericalError("gen_hyperbolic density integral underflowed");
      return std::log(v);
    }
    case GsmKind::Horseshoe: {
      // zeta = tau * upsilon, both half-Cauchy; nested quadrature, tolerance
      // 1e-8 relative at both levels.
      const double a = spec.a, b = spec.b;
      if (s <= 0.0 && d >= 2) return kInf;
      auto inner = [&](double upsilon) {
        auto log_mix_tau = [&](double tau) { return half_cauchy_log_density(tau, a); };
        // Int over tau of N_d(w; 0, tau*upsilon) C+(tau; a): reuse the generic
        // evaluator with s scaled by 1/upsilon and the Jacobian absorbed.
        auto integrand = [&](double t) {
          const double tau = std::exp(t);
          const double zeta = tau * upsilon;
          const double log_f =
              -0.5 * d * (kLog2Pi + std::log(zeta)) - 0.5 * s / zeta + log_mix_tau(tau) + t;
          return log_f < -745.0 ? 0.0 : std::exp(log_f);
        };
        const double t_center = 0.5 * (std::log(std::max(s / upsilon, 1e-10)) + std::log(a));
        return integrate_presplit(integrand, t_center - 55.0, t_center + 55.0, 24, 1e-13, 1e-8);
      };
      auto outer = [&](double t) {
        const double upsilon = std::exp(t);
        const double log_w = half_cauchy_log_density(upsilon, b) + t;
        const double inner_v = inner(upsilon);
        return inner_v <= 0.0 ? 0.0 : std::exp(log_w + std::log(inner_v));
      };
      const double t_center = 0.5 * (std::log(std::max(s, 1e-10)) + std::log(b));
      const double v = integrate_presplit(outer, t_center - 45.0, t_center + 45.0, 24, 1e-13, 1e-8);
      if (!(v > 0.0)) throw NumericalError("horseshoe density integral underflowed");
      return std::log(v);
    }
  }
  throw DomainError("unknown GSM kind");
}

}  // namespace

GsmSpec GsmSpec::student_t(double shape, double scale) {
  GsmSpec s;
  s.kind = GsmKind::StudentT;
  s.a = shape;
  s.b = scale;
  s.validate();
  return s;
}

GsmSpec GsmSpec::laplacian(double shape, double rate) {
  GsmSpec s;
  s.kind = GsmKind::Laplacian;
  s.a = shape;
  s.b = rate;
  s.validate();
  return s;
}

GsmSpec GsmSpec::normal_jeffreys() {
  GsmSpec s;
  s.kind = GsmKind::NormalJeffreys;
  return s;
}

GsmSpec GsmSpec::gen_hyperbolic(double a, double b, double order) {
  GsmSpec s;
  s.kind = GsmKind::GenHyperbolic;
  s.a = a;
  s.b = b;
  s.order = order;
  s.validate();
  return s;
}

GsmSpec GsmSpec::horseshoe(double a, double b) {
  GsmSpec s;
  s.kind = GsmKind::Horseshoe;
  s.a = a;
  s.b = b;
  s.validate();
  return s;
}

std::string GsmSpec::name() const {
  switch (kind) {
    case GsmKind::StudentT: return "student_t";
    case GsmKind::Laplacian: return "laplacian";
    case GsmKind::NormalJeffreys: return "normal_jeffreys";
    case GsmKind::GenHyperbolic: return "gen_hyperbolic";
    case GsmKind::Horseshoe: return "horseshoe";
  }
  return "?";
}

void GsmSpec::validate() const {
  if (kind == GsmKind::NormalJeffreys) return;
  if (!(a > 0.0) || !std::isfinite(a) || !(b > 0.0) || !std::isfinite(b)) {
    std::ostringstream msg;
    msg << name() << " requires strictly positive parameters, got a=" << a << " b=" << b;
    throw DomainError(msg.str());
  }
  if (kind == GsmKind::GenHyperbolic && !std::isfinite(order))
    throw DomainError("gen_hyperbolic order must be finite");
}

double gsm_log_density(const GsmSpec& spec, double theta) {
  spec.validate();
  require_finite(theta);
  return log_group_density(spec, 1, theta * theta);
}

double grouped_gsm_log_density(const GsmSpec& spec, const Eigen::VectorXd& w) {
  spec.validate();
  if (w.size() == 0) throw DomainError("grouped gsm density requires a non-empty group");
  if (!w.allFinite()) throw DomainError("grouped gsm density requires finite weights");
  return log_group_density(spec, static_cast<int>(w.size()), w.squaredNorm());
}

double gsm_sample_scale(const GsmSpec& spec, Rng& rng) {
  spec.validate();
  switch (spec.kind) {
    case GsmKind::StudentT: return rng.inverse_gamma(spec.a, spec.b);
    case GsmKind::Laplacian: return rng.gamma(spec.a, spec.b);
    case GsmKind::NormalJeffreys:
      throw DomainError("normal_jeffreys is improper and cannot be sampled");
    case GsmKind::GenHyperbolic: return rng.gig(spec.order, spec.b, spec.a);
    case GsmKind::Horseshoe: return rng.half_cauchy(spec.a) * rng.half_cauchy(spec.b);
  }
  throw DomainError("unknown GSM kind");
}

Eigen::VectorXd gsm_sample(const GsmSpec& spec, int n, Rng& rng) {
  if (n < 1) throw DomainError("gsm_sample requires n >= 1");
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) {
    const double zeta = gsm_sample_scale(spec, rng);
    out[i] = rng.normal(0.0, std::sqrt(zeta));
  }
  return out;
}

void IbpConfig::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("ibp requires alpha > 0");
  if (rows < 1) throw DomainError("ibp requires rows >= 1");
  if (truncation < 1) throw DomainError("ibp requires truncation >= 1");
}

double IbpConfig::truncation_tail() const {
  return std::pow(alpha / (1.0 + alpha), static_cast<double>(truncation));
}

double IbpConfig::mean_row_sum() const { return alpha * (1.0 - truncation_tail()); }

IbpDraw ibp_sample(const IbpConfig& cfg, Rng& rng) {
  cfg.validate();
  IbpDraw draw;
  draw.sticks.resize(cfg.truncation);
  draw.probs.resize(cfg.truncation);
  draw.Z.resize(cfg.rows, cfg.truncation);
  double running = 1.0;
  for (int j = 0; j < cfg.truncation; ++j) {
    const double u = rng.beta(cfg.alpha, 1.0);
    draw.sticks[j] = u;
    running *= u;
    draw.probs[j] = running;
  }
  for (int i = 0; i < cfg.rows; ++i)
    for (int j = 0; j < cfg.truncation; ++j)
      draw.Z(i, j) = rng.bernoulli(draw.probs[j]) ? 1 : 0;
  return draw;
}

}  // namespace sbtk

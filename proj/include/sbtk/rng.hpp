#ifndef SBTK_RNG_HPP_
#define SBTK_RNG_HPP_

#include <cstdint>
#include <random>

namespace sbtk {

// Deterministic random stream. All samplers are hand-rolled on top of
// mt19937_64 so that a given seed reproduces the same draws on every platform
// and toolchain, which the determinism contracts of the fitting routines rely
// on.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform on (0, 1), endpoints excluded.
  double uniform() {
    // 53-bit mantissa, shifted off zero.
    const double u = (static_cast<double>(eng_() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    return u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller without caching: two uniforms per draw, stream position is a
  // pure function of the number of calls.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Marsaglia-Tsang; shape < 1 handled by the boosting identity
  // Ga(a) = Ga(a+1) * U^{1/a}.
  double gamma(double shape, double rate = 1.0) {
    if (shape < 1.0) {
      const double u = uniform();
      return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
    }
  }

  double inverse_gamma(double shape, double scale) { return scale / gamma(shape, 1.0); }

  double beta(double a, double b) {
    const double g1 = gamma(a);
    const double g2 = gamma(b);
    return g1 / (g1 + g2);
  }

  bool bernoulli(double p) { return uniform() < p; }

  double exponential(double rate = 1.0) { return -std::log(uniform()) / rate; }

  double gumbel() { return -std::log(-std::log(uniform())); }

  // Logistic noise log(u) - log(1-u), used by the relaxed-Bernoulli draw.
  double logistic() {
    const double u = uniform();
    return std::log(u) - std::log1p(-u);
  }

  double half_cauchy(double scale) { return scale * std::tan(kPi * 0.5 * uniform()); }

  // Generalized inverse Gaussian, density on (0, inf) proportional to
  //   x^{lambda-1} exp(-(psi*x + chi/x)/2).
  // Exact rejection sampler: with x = sqrt(chi/psi) e^t the log-density in t is
  // lambda*t - omega*cosh(t) + const (omega = sqrt(chi*psi)), concave in t, so
  // a flat cap between the e^{-1} drop-off points plus tangent exponential
  // tails dominates it.
  double gig(double lambda, double chi, double psi);

  // Independent stream derived from (seed, index); used to split per-step /
  // per-sample streams off a run seed.
  static Rng split(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z = z ^ (z >> 31);
    return Rng(z);
  }

 private:
  static constexpr double kPi = 3.141592653589793238462643383279502884;
  std::mt19937_64 eng_;
};

}  // namespace sbtk

#endif  // SBTK_RNG_HPP_

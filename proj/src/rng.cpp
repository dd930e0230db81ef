#include "sbtk/rng.hpp"

#include <cmath>

#include "sbtk/errors.hpp"

namespace sbtk {

double Rng::gig(double lambda, double chi, double psi) {
  if (!(chi > 0.0) || !(psi > 0.0)) throw DomainError("gig requires chi > 0 and psi > 0");
  const double omega = std::sqrt(chi * psi);
  const double scale = std::sqrt(chi / psi);

  // Log-density in t (up to a constant): H(t) = lambda*t - omega*cosh(t).
  const auto H = [&](double t) { return lambda * t - omega * std::cosh(t); };
  const auto Hp = [&](double t) { return lambda - omega * std::sinh(t); };
  const double t_mode = std::asinh(lambda / omega);
  const double h_mode = H(t_mode);

  // Bracket the points where H drops by one from the mode.
  const auto drop_point = [&](double dir) {
    double step = 1.0 / std::sqrt(std::sqrt(lambda * lambda + omega * omega));
    double t = t_mode + dir * step;
    while (H(t) > h_mode - 1.0) {
      step *= 2.0;
      t = t_mode + dir * step;
    }
    double lo = t_mode, hi = t;
    for (int i = 0; i < 60; ++i) {
      const double mid = 0.5 * (lo + hi);
      if (H(mid) > h_mode - 1.0)
        lo = mid;
      else
        hi = mid;
    }
    return hi;
  };
  const double tl = drop_point(-1.0);
  const double tr = drop_point(+1.0);
  const double rl = Hp(tl);    // > 0 (left tail slope)
  const double rr = -Hp(tr);   // > 0 (right tail slope)

  // Piecewise-exponential hat in units of exp(h_mode): flat cap on [tl, tr],
  // tangent exponential tails beyond. Concavity of H makes it dominating.
  const double area_mid = tr - tl;
  const double area_left = std::exp(-1.0) / rl;
  const double area_right = std::exp(-1.0) / rr;
  const double total = area_mid + area_left + area_right;

  for (;;) {
    const double u = uniform() * total;
    double t, log_hat;
    if (u < area_mid) {
      t = tl + u;
      log_hat = 0.0;
    } else if (u < area_mid + area_right) {
      const double e = exponential(rr);
      t = tr + e;
      log_hat = -1.0 - rr * e;
    } else {
      const double e = exponential(rl);
      t = tl - e;
      log_hat = -1.0 - rl * e;
    }
    if (std::log(uniform()) <= (H(t) - h_mode) - log_hat) return scale * std::exp(t);
  }
}

}  // namespace sbtk

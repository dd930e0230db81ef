#include "sbtk/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>
#include <vector>

#include "sbtk/errors.hpp"

namespace sbtk {

namespace {

// Kronrod-15 abscissae on [-1, 1] (non-negative half) and weights; the Gauss-7
// rule reuses every second node.
const double kXgk[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000};

const double kWgk[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};

const double kWg[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

Segment gk15(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double result_g = 0.0, result_k = 0.0;
  for (int i = 0; i < 8; ++i) {
    double fv;
    if (i == 7) {
      fv = f(c);
    } else {
      fv = f(c - h * kXgk[i]) + f(c + h * kXgk[i]);
    }
    result_k += kWgk[i] * fv;
    if (i % 2 == 1) result_g += kWg[i / 2] * fv;
  }
  if (std::isnan(result_k)) result_k = 0.0;  // fully-underflowed segment
  Segment s;
  s.a = a;
  s.b = b;
  s.value = result_k * h;
  s.error = std::fabs((result_k - result_g) * h);
  return s;
}

}  // namespace

QuadResult gk_adaptive(const std::function<double(double)>& f, double a, double b,
                       double abs_tol, double rel_tol, int max_segments) {
  QuadResult out;
  std::priority_queue<Segment> heap;
  Segment first = gk15(f, a, b);
  out.evaluations = 15;
  out.segments = 1;
  heap.push(first);
  double total = first.value;
  double err = first.error;
  while (err > std::max(abs_tol, rel_tol * std::fabs(total)) && out.segments < max_segments) {
    Segment worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (mid <= worst.a || mid >= worst.b) {  // interval exhausted at machine precision
      heap.push(Segment{worst.a, worst.b, worst.value, 0.0});
      err -= worst.error;
      continue;
    }
    Segment left = gk15(f, worst.a, mid);
    Segment right = gk15(f, mid, worst.b);
    out.evaluations += 30;
    out.segments += 1;
    total += left.value + right.value - worst.value;
    err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }
  out.value = total;
  out.error_estimate = err;
  out.converged = err <= std::max(abs_tol, rel_tol * std::fabs(total));
  return out;
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 double abs_tol, double rel_tol, int max_segments) {
  QuadResult r = gk_adaptive(f, a, b, abs_tol, rel_tol, max_segments);
  if (!r.converged) {
    std::ostringstream msg;
    msg << "quadrature failed to converge on [" << a << ", " << b << "]: value=" << r.value
        << " error_estimate=" << r.error_estimate << " segments=" << r.segments
        << " evaluations=" << r.evaluations;
    throw NumericalError(msg.str());
  }
  return r.value;
}

}  // namespace sbtk

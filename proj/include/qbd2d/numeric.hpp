#pragma once

#include <cmath>
#include <functional>
#include <utility>

#include "qbd2d/types.hpp"

namespace qbd2d {

using ScalarFn = std::function<double(double)>;

// Golden-section minimum of a unimodal f on [a,b]. Returns (argmin, min).
inline std::pair<double, double> golden_min(const ScalarFn& f, double a, double b,
                                            double xtol = 1e-12, int max_iter = 400) {
  static const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < max_iter && (b - a) > xtol; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    }
  }
  double xm = 0.5 * (a + b);
  double fm = f(xm);
  if (f1 < fm) { xm = x1; fm = f1; }
  if (f2 < fm) { xm = x2; fm = f2; }
  return {xm, fm};
}

// Expands [x0-step, x0+step] until f increases at both edges, then golden_min.
// Used for minima over the whole real line of functions that blow up at +-inf.
inline std::pair<double, double> line_min(const ScalarFn& f, double x0, double step = 1.0,
                                          double xtol = 1e-12, double limit = 300.0) {
  double a = x0 - step, b = x0 + step;
  double fa = f(a), fb = f(b), fc = f(x0);
  // Walk downhill until the center is no larger than both edges.
  while (fa < fc && a > x0 - limit) {
    b = x0; fb = fc;
    x0 = a; fc = fa;
    a = x0 - (b - x0) * 2.0;
    fa = f(a);
  }
  while (fb < fc && b < x0 + limit) {
    a = x0; fa = fc;
    x0 = b; fc = fb;
    b = x0 + (x0 - a) * 2.0;
    fb = f(b);
  }
  if (fa < fc || fb < fc)
    fail(ErrorCode::OutsideRange, "no interior minimum found within search limits");
  return golden_min(f, a, b, xtol);
}

// Bisection for the root of a continuous f with f(lo)*f(hi) <= 0.
inline double bisect(const ScalarFn& f, double lo, double hi, double flo, double fhi,
                     double xtol = 1e-12, int max_iter = 200) {
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0) == (fhi > 0))
    fail(ErrorCode::NoRealCrossing, "bisection endpoints have the same sign");
  for (int it = 0; it < max_iter && (hi - lo) > xtol; ++it) {
    double mid = 0.5 * (lo + hi);
    double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
      fhi = fm;
    }
  }
  return 0.5 * (lo + hi);
}

// Second derivative by central differences with two Richardson extrapolation levels.
// Error O(h^6) for smooth f; h0 is the base step.
inline double richardson_second_derivative(const ScalarFn& f, double x, double h0 = 1e-4) {
  auto d2 = [&](double h) { return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h); };
  double d_h = d2(h0), d_h2 = d2(h0 / 2.0), d_h4 = d2(h0 / 4.0);
  double r1 = (4.0 * d_h2 - d_h) / 3.0;
  double r2 = (4.0 * d_h4 - d_h2) / 3.0;
  return (16.0 * r2 - r1) / 15.0;
}

}  // namespace qbd2d

#pragma once

#include <cmath>
#include <utility>

#include "qbd2d/model.hpp"
#include "qbd2d/numeric.hpp"
#include "qbd2d/perron.hpp"
#include "qbd2d/qbd_core.hpp"

namespace qbd2d {

// A point in (theta1, theta2) with the Perron root of the exponentially
// weighted interior block generating function and its gradient. On the curve
// chi = 1; the gradient drives implicit differentiation of the branches.
struct CurvePoint {
  double theta1 = 0.0, theta2 = 0.0;
  double chi = 0.0;
  double grad1 = 0.0, grad2 = 0.0;
};

namespace detail {

// d/dtheta_axis of the interior generating function at (x1, x2) = e^theta:
// sum_{i1,i2} i_axis x1^{i1} x2^{i2} A_{i1,i2}.
inline Matrix interior_gf_dtheta(const BlockSet& bs, int axis, double x1, double x2) {
  Matrix m = Matrix::Zero(bs.phases(), bs.phases());
  const double zp[3] = {1.0 / x1, 1.0, x1};
  const double wp[3] = {1.0 / x2, 1.0, x2};
  for (int i1 = -1; i1 <= 1; ++i1)
    for (int i2 = -1; i2 <= 1; ++i2) {
      double weight = double(axis == 1 ? i1 : i2) * zp[i1 + 1] * wp[i2 + 1];
      if (weight != 0.0) m += weight * bs.block(Region::Interior, i1, i2);
    }
  return m;
}

}  // namespace detail

// Perron root of the interior generating function at (e^theta1, e^theta2).
// Log-convex in (theta1, theta2); equals 1 exactly on the spectral curve.
inline double chi(const BlockSet& bs, double theta1, double theta2) {
  return spectral_radius(bs.gf(Region::Interior, std::exp(theta1), std::exp(theta2)));
}

// chi together with its gradient, via first-order eigenvalue perturbation:
// d rho / d p = u (dA/dp) v for the normalized Perron pair u, v.
inline CurvePoint curve_point(const BlockSet& bs, double theta1, double theta2) {
  const double x1 = std::exp(theta1), x2 = std::exp(theta2);
  PerronTriple p = perron(bs.gf(Region::Interior, x1, x2));
  CurvePoint pt;
  pt.theta1 = theta1;
  pt.theta2 = theta2;
  pt.chi = p.rho;
  pt.grad1 = (p.u * detail::interior_gf_dtheta(bs, 1, x1, x2) * p.v).value();
  pt.grad2 = (p.u * detail::interior_gf_dtheta(bs, 2, x1, x2) * p.v).value();
  return pt;
}

// The two real theta2 roots of chi(theta1, theta2) = 1, lower branch first.
// Coincident (within 1e-7) at theta1 = theta1^max or theta1^min.
inline ThetaBounds eta2_branches(const BlockSet& bs, double theta1) {
  try {
    return theta_bounds(bs.interior_triplet(1, std::exp(theta1)));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NoRealCrossing)
      fail(ErrorCode::OutsideRange, "eta2_branches: theta1 outside the curve's range");
    throw;
  }
}

inline ThetaBounds eta1_branches(const BlockSet& bs, double theta2) {
  try {
    return theta_bounds(bs.interior_triplet(2, std::exp(theta2)));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NoRealCrossing)
      fail(ErrorCode::OutsideRange, "eta1_branches: theta2 outside the curve's range");
    throw;
  }
}

// Implicit-function derivative d theta2 / d theta1 along the curve through
// the point: -grad1/grad2. Unbounded where the curve's tangent is vertical.
inline double eta_derivative(const CurvePoint& pt) {
  if (std::abs(pt.grad2) < 1e-9)
    fail(ErrorCode::VerticalTangent, "eta_derivative: curve tangent is vertical here");
  return -pt.grad1 / pt.grad2;
}

inline double eta_derivative(const BlockSet& bs, double theta1, double theta2) {
  return eta_derivative(curve_point(bs, theta1, theta2));
}

// Second derivative d^2/dw^2 of the larger real root z = zeta(w) of
// chi(log z, log w) = 1, by Richardson-extrapolated central differences.
// Strictly negative at the branch point w where the two z-roots coincide;
// feeds the square-root prefactor of the tangency regime.
inline double curve_second_derivative_z_of_w(const BlockSet& bs, double w, double h0 = 1e-4) {
  if (!(w - h0 > 0.0))
    fail(ErrorCode::StepUnderflow, "curve_second_derivative_z_of_w: step reaches w <= 0");
  auto zbar = [&](double ww) { return std::exp(eta1_branches(bs, std::log(ww)).bar); };
  return richardson_second_derivative(zbar, w, h0);
}

}  // namespace qbd2d

#pragma once

#include <cmath>
#include <limits>
#include <utility>

#include "qbd2d/model.hpp"
#include "qbd2d/numeric.hpp"
#include "qbd2d/qbd_core.hpp"
#include "qbd2d/spectral.hpp"

namespace qbd2d {

// Classification of the curve geometry by where the boundary-induced points
// Q1, Q2 sit relative to each other's branch values.
enum class ModelType { Type1 = 1, Type2 = 2, Type3 = 3, Type4 = 4 };

inline const char* model_type_name(ModelType t) {
  switch (t) {
    case ModelType::Type1: return "type1";
    case ModelType::Type2: return "type2";
    case ModelType::Type3: return "type3";
    case ModelType::Type4: return "type4";
  }
  return "?";
}

struct Extremes {
  double theta1_min = 0.0, theta1_max = 0.0;
  double theta2_min = 0.0, theta2_max = 0.0;
};

// Global minimizer of chi over the whole plane; its value < 1 iff the
// feasibility region has nonempty interior.
struct CurveMinimum {
  double theta1 = 0.0, theta2 = 0.0;
  double value = 0.0;
};

// sup{theta_axis : spr of the censored face matrix < 1}; saturated when the
// supremum is only capped by the curve's own extreme.
struct StarValue {
  double value = 0.0;
  bool saturated = false;
};

// Support point of the curve in direction c, with a tangency certificate.
struct TangencyPoint {
  Direction c;
  double theta_c_max = 0.0;
  double eta1 = 0.0, eta2 = 0.0;  // maximizer of c . theta on the curve
  double gradient_ratio = 1.0;    // (grad1 c2)/(grad2 c1); 1 when grad is parallel to c
};

struct GammaGeometry {
  double theta1_min = 0.0, theta1_max = 0.0;
  double theta2_min = 0.0, theta2_max = 0.0;
  double theta1_star = 0.0, theta2_star = 0.0;
  bool saturated1 = false, saturated2 = false;
  double q1_theta1 = 0.0, q1_theta2 = 0.0;  // Q1 = (theta1_star, eta_bar_2(theta1_star))
  double q2_theta1 = 0.0, q2_theta2 = 0.0;  // Q2 = (eta_bar_1(theta2_star), theta2_star)
  double slope_q1 = 0.0;                    // d theta2 / d theta1 at Q1
  double slope_q2 = 0.0;                    // d theta1 / d theta2 at Q2
  ModelType model_type = ModelType::Type1;
};

namespace detail {

// Minimum of chi over the level-direction exponent at a fixed value of the
// other coordinate's exponent. Returns (argmin, min).
inline std::pair<double, double> slice_min(const BlockSet& bs, int axis, double th_fixed) {
  Triplet t = bs.interior_triplet(axis, std::exp(th_fixed));
  return line_min([&t](double th) { return spr_weighted(t, th); }, 0.0, 0.5, 1e-10);
}

}  // namespace detail

inline CurveMinimum global_curve_min(const BlockSet& bs) {
  auto outer = [&](double th1) { return detail::slice_min(bs, 1, th1).second; };
  auto [t1, val] = line_min(outer, 0.0, 0.25, 1e-10);
  CurveMinimum m;
  m.theta1 = t1;
  m.theta2 = detail::slice_min(bs, 1, t1).first;
  m.value = val;
  return m;
}

// Extreme exponents of the curve per coordinate: the outermost theta_i where
// the slice minimum still reaches 1. The slice minimum is convex in theta_i,
// so each crossing is bracketed by doubling and then bisected.
inline Extremes theta_extremes(const BlockSet& bs) {
  Extremes e;
  for (int axis : {1, 2}) {
    auto f = [&](double th) { return detail::slice_min(bs, axis, th).second; };
    auto [t0, m0] = line_min(f, 0.0, 0.25, 1e-10);
    if (m0 > 1.0 - 1e-9)
      fail(ErrorCode::EmptyDomain, "theta_extremes: feasibility region has empty interior");
    auto g = [&](double th) { return f(th) - 1.0; };
    double hi = t0 + 0.5, ghi = g(hi);
    while (ghi <= 0.0) {
      hi = t0 + 2.0 * (hi - t0);
      if (hi > t0 + 64.0)
        fail(ErrorCode::NoRealCrossing, "theta_extremes: no finite upper extreme");
      ghi = g(hi);
    }
    double tmax = bisect(g, t0, hi, m0 - 1.0, ghi, 1e-12);
    double lo = t0 - 0.5, glo = g(lo);
    while (glo <= 0.0) {
      lo = t0 - 2.0 * (t0 - lo);
      if (lo < t0 - 64.0)
        fail(ErrorCode::NoRealCrossing, "theta_extremes: no finite lower extreme");
      glo = g(lo);
    }
    double tmin = bisect(g, lo, t0, glo, m0 - 1.0, 1e-12);
    if (axis == 1) {
      e.theta1_min = tmin;
      e.theta1_max = tmax;
    } else {
      e.theta2_min = tmin;
      e.theta2_max = tmax;
    }
  }
  return e;
}

// Maximum of c1 theta1 + c2 theta2 over the region chi <= 1. Feasibility of a
// target value s is decided by minimizing chi along the line c . theta = s
// (convex); the target is then bisected between the global-minimum value and
// an infeasible cap. The maximizer is polished by zeroing the tangential
// gradient component, which certifies grad chi parallel to c.
inline TangencyPoint theta_c_max(const BlockSet& bs, Direction c) {
  if (c.c1 <= 0 || c.c2 <= 0)
    fail(ErrorCode::InvalidArgument, "theta_c_max: direction components must be positive");
  const double c1 = c.c1, c2 = c.c2;
  const double nn = c1 * c1 + c2 * c2;
  CurveMinimum g0 = global_curve_min(bs);
  if (g0.value > 1.0 - 1e-9)
    fail(ErrorCode::EmptyDomain, "theta_c_max: feasibility region has empty interior");

  auto point_on_line = [&](double s, double t) {
    return std::make_pair(s * c1 / nn + t * c2, s * c2 / nn - t * c1);
  };
  auto slice = [&](double s) {
    return line_min(
        [&](double t) {
          auto [th1, th2] = point_on_line(s, t);
          return chi(bs, th1, th2);
        },
        0.0, 0.5, 1e-10);
  };

  double lo = c1 * g0.theta1 + c2 * g0.theta2;
  double flo = slice(lo).second - 1.0;
  double hi = lo + 1.0, fhi = slice(hi).second - 1.0;
  while (fhi <= 0.0) {
    hi = lo + 2.0 * (hi - lo);
    if (hi > lo + 128.0) fail(ErrorCode::NoRealCrossing, "theta_c_max: unbounded direction");
    fhi = slice(hi).second - 1.0;
  }
  auto g = [&](double s) { return slice(s).second - 1.0; };
  double s = bisect(g, lo, hi, flo, fhi, 1e-12);

  // tangential derivative of chi along the support line vanishes at the
  // tangency point; bisect it for a sharp maximizer
  double t = slice(s).first;
  auto tangential = [&](double tt) {
    auto [th1, th2] = point_on_line(s, tt);
    CurvePoint cp = curve_point(bs, th1, th2);
    return cp.grad1 * c2 - cp.grad2 * c1;
  };
  double wlo = t - 0.01, whi = t + 0.01;
  double ulo = tangential(wlo), uhi = tangential(whi);
  for (int k = 0; k < 16 && (ulo > 0.0) == (uhi > 0.0); ++k) {
    wlo = t - 2.0 * (t - wlo);
    whi = t + 2.0 * (whi - t);
    ulo = tangential(wlo);
    uhi = tangential(whi);
  }
  if ((ulo > 0.0) != (uhi > 0.0)) t = bisect(tangential, wlo, whi, ulo, uhi, 1e-13);

  TangencyPoint tp;
  tp.c = c;
  tp.theta_c_max = s;
  std::tie(tp.eta1, tp.eta2) = point_on_line(s, t);
  CurvePoint cp = curve_point(bs, tp.eta1, tp.eta2);
  tp.gradient_ratio = (cp.grad1 * c2) / (cp.grad2 * c1);
  return tp;
}

namespace detail {

// Face transitions censored onto level 0 of the removed coordinate: the z-th
// weighted face blocks that stay, plus the ones that step up and come back
// down through the interior first-passage matrix G(z).
inline Matrix face_censored_matrix(const MAKernel1D& k, double z, const Matrix& G) {
  Matrix C = Matrix::Zero(k.s0, k.s0);
  const double zp[3] = {1.0 / z, 1.0, z};
  for (int i = 0; i < 3; ++i)
    C += zp[size_t(i)] * (k.boundary[size_t(i)][0] + k.boundary[size_t(i)][1] * G);
  return C;
}

}  // namespace detail

// Largest theta in (0, theta_axis_max] where the censored face matrix still
// contracts. Its spectral radius equals 1 at theta = 0, is log-convex, and
// under stability dips below 1 before rising through it again; the rising
// crossing is theta_star. When it never rises back above 1 the value
// saturates at the curve extreme.
inline StarValue theta_star(const BlockSet& bs, int axis, double theta_axis_max) {
  MAKernel1D k = build_ma_kernel(bs, axis);
  auto sprC = [&](double th) {
    double z = std::exp(th);
    Matrix G = solve_G(bs.interior_triplet(axis, z));
    return spectral_radius(detail::face_censored_matrix(k, z, G));
  };
  double vmax = sprC(theta_axis_max);
  if (vmax < 1.0) return {theta_axis_max, true};
  auto [tmin, vmin] = golden_min(sprC, 0.0, theta_axis_max, 1e-10);
  if (vmin >= 1.0 - 1e-12)
    fail(ErrorCode::Unstable, "theta_star: censored face matrix never contracts");
  double star = bisect([&](double th) { return sprC(th) - 1.0; }, tmin, theta_axis_max,
                       vmin - 1.0, vmax - 1.0, 1e-12);
  return {star, false};
}

// The four-type split on the positions of Q1 = (t1s, eta_bar_2(t1s)) and
// Q2 = (eta_bar_1(t2s), t2s). Ties within tol land on the non-strict side,
// which belongs to Type 1 in both inequalities.
inline ModelType classify_type(double theta1_star, double eta1bar_at_t2s, double eta2bar_at_t1s,
                               double theta2_star, double tol = 1e-9) {
  bool first = theta1_star >= eta1bar_at_t2s - tol;
  bool second = eta2bar_at_t1s <= theta2_star + tol;
  if (first && second) return ModelType::Type1;
  if (!first && !second) return ModelType::Type2;
  if (first) return ModelType::Type3;
  return ModelType::Type4;
}

inline GammaGeometry analyze_geometry(const BlockSet& bs) {
  Extremes e = theta_extremes(bs);
  StarValue s1 = theta_star(bs, 1, e.theta1_max);
  StarValue s2 = theta_star(bs, 2, e.theta2_max);

  GammaGeometry g;
  g.theta1_min = e.theta1_min;
  g.theta1_max = e.theta1_max;
  g.theta2_min = e.theta2_min;
  g.theta2_max = e.theta2_max;
  g.theta1_star = s1.value;
  g.theta2_star = s2.value;
  g.saturated1 = s1.saturated;
  g.saturated2 = s2.saturated;

  g.q1_theta1 = s1.value;
  g.q1_theta2 = eta2_branches(bs, s1.value).bar;
  g.q2_theta2 = s2.value;
  g.q2_theta1 = eta1_branches(bs, s2.value).bar;

  // branch slopes at the Q points. A Q point at (or within bisection
  // resolution of) the curve extreme sits on the branch point, where the
  // transverse gradient is numerical noise with arbitrary sign; the slope is
  // minus infinity there by the square-root shape of the branch.
  auto slope = [&](double th1, double th2, int axis) {
    CurvePoint cp = curve_point(bs, th1, th2);
    double num = (axis == 1) ? cp.grad1 : cp.grad2;
    double den = (axis == 1) ? cp.grad2 : cp.grad1;
    if (std::abs(den) < 1e-9) return -std::numeric_limits<double>::infinity();
    return -num / den;
  };
  const double inf = std::numeric_limits<double>::infinity();
  g.slope_q1 =
      (e.theta1_max - s1.value <= 1e-9) ? -inf : slope(g.q1_theta1, g.q1_theta2, 1);
  g.slope_q2 =
      (e.theta2_max - s2.value <= 1e-9) ? -inf : slope(g.q2_theta1, g.q2_theta2, 2);

  g.model_type = classify_type(g.theta1_star, g.q2_theta1, g.q1_theta2, g.theta2_star);
  return g;
}

}  // namespace qbd2d

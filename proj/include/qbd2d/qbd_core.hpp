#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "qbd2d/numeric.hpp"
#include "qbd2d/perron.hpp"
#include "qbd2d/types.hpp"

namespace qbd2d {

// One-step blocks of a level-homogeneous skip-free chain, indexed by the level
// increment: down = A_{-1}, stay = A_0, up = A_{+1}.
struct Triplet {
  Matrix down, stay, up;

  Eigen::Index size() const { return stay.rows(); }
  Triplet swapped() const { return Triplet{up, stay, down}; }
  // A_*(x) = x^{-1} down + stay + x up, x > 0.
  Matrix weighted(double x) const { return down / x + stay + x * up; }
};

// z-indexed family of triplets (e.g. level blocks weighted by z along the
// other coordinate).
using TripletFamily = std::function<Triplet(double)>;

namespace detail {

inline void check_triplet(const Triplet& t) {
  auto m = t.stay.rows();
  if (t.stay.cols() != m || t.down.rows() != m || t.down.cols() != m || t.up.rows() != m ||
      t.up.cols() != m)
    fail(ErrorCode::InvalidArgument, "triplet blocks must be square and same size");
  if ((t.down.array() < 0).any() || (t.stay.array() < 0).any() || (t.up.array() < 0).any())
    fail(ErrorCode::InvalidArgument, "triplet blocks must be nonnegative");
}

// spr(A_*(e^theta)) and its theta-derivative via eigenvalue perturbation.
inline double spr_weighted(const Triplet& t, double theta) {
  return spectral_radius(t.weighted(std::exp(theta)));
}

inline double spr_weighted_dtheta(const Triplet& t, double theta) {
  double x = std::exp(theta);
  PerronTriple p = perron(t.weighted(x));
  Matrix d = -t.down / x + x * t.up;  // d/dtheta of A_*(e^theta)
  return (p.u * d * p.v).value();
}

}  // namespace detail

// Logarithmic-reduction solve of G = down + stay*G + up*G^2 (minimal
// nonnegative solution): with L = (I-stay)^{-1} down, H = (I-stay)^{-1} up,
//   M_k = H_k L_k + L_k H_k,   L_{k+1} = (I-M_k)^{-1} L_k^2,
//   H_{k+1} = (I-M_k)^{-1} H_k^2,   G = sum_k H_0...H_{k-1} L_k.
// Quadratically convergent away from the critical point, linear with ratio
// 1/2 at it.
//
// Two numerical hazards drive the bookkeeping below. Non-substochastic
// triplets (z-weighted families) make the true L_k explode and H_k vanish
// doubly exponentially, so the pair is stored in a balanced gauge
// ell = L*gamma, h = H/gamma with per-step rebalancing; gauges cancel in
// M_k, and the increment scale obeys the stable recursion w -= log(rho).
// Second, at a critical (tangent) triplet the gauged fixed point is
// repelling, so rounding noise grows ~3^k and caps the attainable accuracy
// near 1e-8; increments are tracked and the best accumulated sum is returned
// once they stop shrinking, provided the floor is small enough to certify.
inline Matrix solve_G_logred(const Triplet& t, double tol = 1e-14, int max_iter = 160) {
  const Eigen::Index m = t.size();
  const Matrix I = Matrix::Identity(m, m);
  Eigen::PartialPivLU<Matrix> lu0(I - t.stay);
  Matrix L = lu0.solve(t.down);
  Matrix H = lu0.solve(t.up);
  Matrix G = L;
  if (!G.allFinite() || !H.allFinite())
    fail(ErrorCode::NotInvertible, "logarithmic reduction: I - stay singular");
  double nl = L.lpNorm<Eigen::Infinity>(), nh = H.lpNorm<Eigen::Infinity>();
  if (nl == 0.0 || nh == 0.0) return G;  // one-sided: series has a single term
  double gamma0 = std::sqrt(nh / nl);
  Matrix ell = L * gamma0;
  Matrix h = H / gamma0;
  Matrix P = h;  // normalized product h_0 h_1 ... h_k
  double lp = 0.0, w = -std::log(gamma0);
  {
    double n = P.lpNorm<Eigen::Infinity>();
    P /= n;
    lp = std::log(n);
  }
  Matrix best = G;
  double min_inc = std::numeric_limits<double>::infinity();
  auto certify_floor = [&](double scale) -> Matrix {
    if (min_inc <= 1e-6 * scale) return best;
    fail(ErrorCode::NotConverged, "logarithmic reduction stalled above its noise floor");
  };
  for (int k = 0; k < max_iter; ++k) {
    Matrix M = h * ell + ell * h;
    if (!M.allFinite()) fail(ErrorCode::NotInvertible, "logarithmic reduction diverged");
    Eigen::PartialPivLU<Matrix> lu(I - M);
    Matrix ellraw = lu.solve(ell * ell);
    Matrix hraw = lu.solve(h * h);
    double nraw_l = ellraw.lpNorm<Eigen::Infinity>(), nraw_h = hraw.lpNorm<Eigen::Infinity>();
    if (!std::isfinite(nraw_l) || !std::isfinite(nraw_h))
      fail(ErrorCode::NotInvertible, "logarithmic reduction diverged");
    if (nraw_l == 0.0) return G;
    if (nraw_h == 0.0) {
      // last H factor vanished; one final increment ends the series
      G += (P * ellraw) * std::exp(lp + w);
      return G;
    }
    double rho = std::sqrt(nraw_h / nraw_l);
    ell = ellraw * rho;
    h = hraw / rho;
    w -= std::log(rho);
    Matrix inc = (P * ell) * std::exp(lp + w);
    double n_inc = inc.lpNorm<Eigen::Infinity>();
    double scale = 1.0 + best.lpNorm<Eigen::Infinity>();
    if (!std::isfinite(n_inc)) return certify_floor(scale);
    if (n_inc <= tol * scale) return G + inc;
    if (n_inc > 4.0 * min_inc) return certify_floor(scale);
    G += inc;
    if (n_inc < min_inc) {
      min_inc = n_inc;
      best = G;
    }
    P = P * h;
    double n = P.lpNorm<Eigen::Infinity>();
    if (n == 0.0) return G;
    P /= n;
    lp += std::log(n);
  }
  return certify_floor(1.0 + best.lpNorm<Eigen::Infinity>());
}

// Minimal nonnegative solution of G = down + stay*G + up*G^2 by the monotone
// fixed point from G_0 = 0; switches to logarithmic reduction at the
// iteration cap (near-critical triplets converge too slowly otherwise).
// The observer, when set, sees each iterate and can be used to check
// monotonicity from outside.
inline Matrix solve_G(const Triplet& t, double tol = 1e-13, int cap = 50000,
                      const std::function<void(int, const Matrix&)>& observer = nullptr) {
  detail::check_triplet(t);
  const Eigen::Index m = t.size();
  Matrix G = Matrix::Zero(m, m);
  for (int it = 0; it < cap; ++it) {
    Matrix next = t.down + t.stay * G + t.up * (G * G);
    double diff = (next - G).lpNorm<Eigen::Infinity>();
    G = next;
    if (observer) observer(it, G);
    if (G.lpNorm<Eigen::Infinity>() > 1e8)
      fail(ErrorCode::OutsideRange, "fixed point diverges; no minimal nonnegative solution");
    if (diff <= tol) return G;
  }
  return solve_G_logred(t, tol < 1e-14 ? tol : 1e-14);
}

// Minimal nonnegative solution of R = up + R*stay + R^2*down, monotone from 0.
// Falls back to R = up*(I - stay - up*G)^{-1} via logarithmic reduction.
inline Matrix solve_R(const Triplet& t, double tol = 1e-13, int cap = 50000) {
  detail::check_triplet(t);
  const Eigen::Index m = t.size();
  Matrix R = Matrix::Zero(m, m);
  for (int it = 0; it < cap; ++it) {
    Matrix next = t.up + R * t.stay + (R * R) * t.down;
    double diff = (next - R).lpNorm<Eigen::Infinity>();
    R = next;
    if (R.lpNorm<Eigen::Infinity>() > 1e8)
      fail(ErrorCode::OutsideRange, "fixed point diverges; no minimal nonnegative solution");
    if (diff <= tol) return R;
  }
  Matrix G = solve_G_logred(t);
  Matrix H = t.stay + t.up * G;
  if (spectral_radius(H) >= 1.0 - 1e-12)
    fail(ErrorCode::NotConverged, "solve_R: local return matrix not substochastic");
  Eigen::PartialPivLU<Matrix> lu(Matrix::Identity(m, m) - H);
  return t.up * lu.solve(Matrix::Identity(m, m));
}

// The two real points where spr(A_*(e^theta)) = 1. Requires up and down
// nonzero; coincident within 1e-7 marks the critical (tangent) case.
struct ThetaBounds {
  double under = 0.0, bar = 0.0;
  bool coincident = false;
};

inline ThetaBounds theta_bounds(const Triplet& t, double xtol = 1e-12) {
  if (t.up.isZero(0.0) || t.down.isZero(0.0))
    fail(ErrorCode::InvalidArgument, "theta_bounds: one-sided triplet has no finite crossing");
  auto f = [&](double th) { return detail::spr_weighted(t, th); };
  auto [th0, m0] = line_min(f, 0.0, 0.5, 1e-10);
  ThetaBounds b;
  if (m0 > 1.0 + 1e-9) fail(ErrorCode::NoRealCrossing, "spectral minimum exceeds one");
  if (m0 >= 1.0 - 1e-12) {
    b.under = b.bar = th0;
    b.coincident = true;
    return b;
  }
  auto g = [&](double th) { return f(th) - 1.0; };
  // expand right
  double hi = th0 + 0.5, ghi = g(hi);
  while (ghi <= 0.0) {
    hi = th0 + 2.0 * (hi - th0);
    if (hi > 300.0) fail(ErrorCode::NoRealCrossing, "no upper crossing before overflow guard");
    ghi = g(hi);
  }
  double bar = bisect(g, th0, hi, m0 - 1.0, ghi, xtol);
  double lo = th0 - 0.5, glo = g(lo);
  while (glo <= 0.0) {
    lo = th0 - 2.0 * (th0 - lo);
    if (lo < -300.0) fail(ErrorCode::NoRealCrossing, "no lower crossing before overflow guard");
    glo = g(lo);
  }
  double under = bisect(g, lo, th0, glo, m0 - 1.0, xtol);
  // Newton polish with the analytic eigenvalue derivative.
  for (int k = 0; k < 4; ++k) {
    double d = detail::spr_weighted_dtheta(t, bar);
    if (std::abs(d) < 1e-14) break;
    bar -= (f(bar) - 1.0) / d;
  }
  for (int k = 0; k < 4; ++k) {
    double d = detail::spr_weighted_dtheta(t, under);
    if (std::abs(d) < 1e-14) break;
    under -= (f(under) - 1.0) / d;
  }
  b.under = under;
  b.bar = bar;
  b.coincident = (bar - under) <= 1e-7;
  return b;
}

// Bundle of first-passage and rate matrices for one triplet, plus the same
// for the level-reversed chain. Satisfies
//   I - A_*(z) = (I - zR)(I - H)(I - z^{-1}G),  spr(G) = e^{theta_under},
//   spr(R) = e^{-theta_bar}; the reversed pair swaps the roles.
struct GRHSolution {
  Matrix G, R, H, N;
  Matrix Gr, Rr, Hr;
  double theta_under = 0.0, theta_bar = 0.0;
};

inline GRHSolution solve_all(const Triplet& t, double tol = 1e-13) {
  detail::check_triplet(t);
  const Eigen::Index m = t.size();
  GRHSolution s;
  s.G = solve_G(t, tol);
  s.R = solve_R(t, tol);
  s.H = t.stay + t.up * s.G;
  if (spectral_radius(s.H) >= 1.0 - 1e-12)
    fail(ErrorCode::NotInvertible, "solve_all: I - H is singular");
  s.N = Eigen::PartialPivLU<Matrix>(Matrix::Identity(m, m) - s.H).solve(Matrix::Identity(m, m));
  Triplet r = t.swapped();
  s.Gr = solve_G(r, tol);
  s.Rr = solve_R(r, tol);
  s.Hr = r.stay + r.up * s.Gr;
  ThetaBounds b = theta_bounds(t);
  s.theta_under = b.under;
  s.theta_bar = b.bar;
  return s;
}

// Sup-norm of (I - A_*(z)) - (I - zR)(I - H)(I - z^{-1}G) at a real z > 0.
inline double factorization_residual(const Triplet& t, const GRHSolution& s, double z) {
  const Eigen::Index m = t.size();
  Matrix I = Matrix::Identity(m, m);
  Matrix lhs = I - t.weighted(z);
  Matrix rhs = (I - z * s.R) * (I - s.H) * (I - s.G / z);
  return (lhs - rhs).lpNorm<Eigen::Infinity>();
}

// Partial sum of the first-passage series G = sum_n D_n, where D_n collects
// the products over skip-free paths of length n that stay at nonnegative
// relative level and end one level down. Computed by dynamic programming over
// (step, relative level); the level index never needs to exceed the number of
// remaining steps.
inline Matrix g_series_partial(const Triplet& t, int n_max) {
  detail::check_triplet(t);
  if (n_max < 1) fail(ErrorCode::InvalidArgument, "g_series_partial: n_max must be >= 1");
  const Eigen::Index m = t.size();
  // level[h] = sum over admissible prefixes of length k ending at relative level h
  std::vector<Matrix> level(1, Matrix::Identity(m, m));
  Matrix S = Matrix::Identity(m, m);  // sum over k of level-0 prefix weights
  for (int k = 1; k < n_max; ++k) {
    int hmax = std::min<int>(k, n_max - 1 - k);  // must return to 0 by step n_max-1
    std::vector<Matrix> next(hmax + 1, Matrix::Zero(m, m));
    int prev_hmax = int(level.size()) - 1;
    for (int h = 0; h <= hmax; ++h) {
      if (h - 1 >= 0 && h - 1 <= prev_hmax) next[h] += level[h - 1] * t.up;
      if (h <= prev_hmax) next[h] += level[h] * t.stay;
      if (h + 1 <= prev_hmax) next[h] += level[h + 1] * t.down;
    }
    level = std::move(next);
    if (level.empty()) break;
    S += level[0];
  }
  return S * t.down;
}

inline Matrix g_series_oracle(const TripletFamily& fam, double z, int n_max) {
  return g_series_partial(fam(z), n_max);
}

// First-order behavior of z -> G(z) at the branch point z_max of a triplet
// family: (G(z_max) - G(z)) / sqrt(z_max - z) -> -G1, with
// G1 = alpha * N(z_max) * vR * uG and alpha = -sqrt(2)/sqrt(-zeta''),
// zeta(w) being the larger z-root of spr(sum_j w^j A_j(z)) = 1 near the
// coincident eigenvalue w_star = spr(G(z_max)).
struct BranchLimit {
  double alpha = 0.0;        // negative
  Matrix G1;                 // entrywise <= 0, rank one
  double w_star = 0.0;       // coincident spr(G) = e^{theta_under} = e^{theta_bar}
  double zeta_second = 0.0;  // d^2 zeta / dw^2 at w_star, negative
};

namespace detail {

// Larger z-root of spr(sum_j w^j fam(z)_j) = 1 for fixed w > 0.
inline double larger_z_root(const TripletFamily& fam, double w, double theta_seed) {
  auto f = [&](double th) {
    Triplet t = fam(std::exp(th));
    return spectral_radius(t.down / w + t.stay + w * t.up);
  };
  auto [th0, m0] = line_min(f, theta_seed, 0.25, 1e-10);
  if (m0 > 1.0 + 1e-11) fail(ErrorCode::NoRealCrossing, "larger_z_root: minimum exceeds one");
  if (m0 >= 1.0 - 1e-13) return std::exp(th0);
  auto g = [&](double th) { return f(th) - 1.0; };
  double hi = th0 + 0.25, ghi = g(hi);
  while (ghi <= 0.0) {
    hi = th0 + 2.0 * (hi - th0);
    if (hi > 300.0) fail(ErrorCode::NoRealCrossing, "larger_z_root: no crossing");
    ghi = g(hi);
  }
  double th = bisect(g, th0, hi, m0 - 1.0, ghi, 1e-11);
  // secant polish in theta
  double th_prev = th - 1e-7, g_prev = g(th_prev), g_cur = g(th);
  for (int k = 0; k < 4 && g_cur != g_prev; ++k) {
    double th_next = th - g_cur * (th - th_prev) / (g_cur - g_prev);
    th_prev = th;
    g_prev = g_cur;
    th = th_next;
    g_cur = g(th);
  }
  return std::exp(th);
}

}  // namespace detail

inline BranchLimit branch_limit_matrices(const TripletFamily& fam, double theta_max) {
  const double x_max = std::exp(theta_max);
  Triplet t = fam(x_max);
  GRHSolution s = solve_all(t);
  if (std::abs(s.theta_bar - s.theta_under) > 1e-7)
    fail(ErrorCode::NotTangent, "branch_limit_matrices: eigenvalues not coincident at z_max");
  BranchLimit bl;
  bl.w_star = std::exp(0.5 * (s.theta_bar + s.theta_under));

  auto zeta = [&](double w) { return detail::larger_z_root(fam, w, theta_max); };
  double h0 = 1e-4 * (bl.w_star > 1.0 ? bl.w_star : 1.0);
  bl.zeta_second = richardson_second_derivative(zeta, bl.w_star, h0);
  if (!(bl.zeta_second < -1e-12))
    fail(ErrorCode::NotTangent, "branch_limit_matrices: flat curve at branch point");
  bl.alpha = -std::sqrt(2.0) / std::sqrt(-bl.zeta_second);

  PerronTriple pg = perron(s.G);
  PerronTriple pr = perron(s.R);
  RowVector uG = pg.u / pg.u.sum();       // left eigenvector of G at w_star
  Vector vR = pr.v;                       // right eigenvector of R at 1/w_star
  double scale = (uG * s.N * vR).value();
  if (!(scale > 0.0)) fail(ErrorCode::NonPositive, "branch_limit_matrices: bad normalization");
  vR /= scale;  // now uG * N * vR = 1
  bl.G1 = bl.alpha * (s.N * vR) * uG;
  return bl;
}

// Sine of the angle between the Perron right eigenvectors of G and of the
// reversed chain's G^r; the two directions coincide exactly at a tangency
// point, so this is a tangency diagnostic.
inline double eigenvector_coincidence_sine(const Triplet& t) {
  Matrix G = solve_G(t);
  Matrix Gr = solve_G(t.swapped());
  Vector v = perron(G).v.normalized();
  Vector vr = perron(Gr).v.normalized();
  double c = std::abs(v.dot(vr));
  if (c > 1.0) c = 1.0;
  return std::sqrt(1.0 - c * c);
}

}  // namespace qbd2d

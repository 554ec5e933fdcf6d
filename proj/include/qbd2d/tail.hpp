#pragma once

#include <cmath>
#include <optional>

#include "qbd2d/geometry.hpp"
#include "qbd2d/model.hpp"
#include "qbd2d/qbd_core.hpp"

namespace qbd2d {

// Which singularity of the directional generating function sets the tail:
// one of the face Q-points, or the tangency point of the support line. The
// two boundary labels mark ties between the tangency point and a Q-point;
// they keep the plain exponential form.
enum class Regime {
  Face1Dominant,
  Face2Dominant,
  TangencyInterior,
  TangencyBoundary1,
  TangencyBoundary2,
};

inline const char* regime_name(Regime r) {
  switch (r) {
    case Regime::Face1Dominant: return "face1-dominant";
    case Regime::Face2Dominant: return "face2-dominant";
    case Regime::TangencyInterior: return "tangency-interior";
    case Regime::TangencyBoundary1: return "tangency-boundary1";
    case Regime::TangencyBoundary2: return "tangency-boundary2";
  }
  return "unknown";
}

// Tail law of nu_{k c} along a lattice direction c: nu_{k c} decays like
// k^{power_exponent} e^{-xi_c k}. power_exponent is -1/2 exactly in the
// strict tangency regime and 0 otherwise. prefactor, when present, is the
// limit direction of k^{1/2} e^{xi_c k} nu_{k c} (computed only for c=(1,1)).
struct TailAsymptotics {
  Direction c;
  double xi_c = 0.0;
  double power_exponent = 0.0;
  Regime regime = Regime::TangencyInterior;
  std::optional<RowVector> prefactor;
};

// Blocks of the diagonal-direction reduction of the free process: level is
// x1, the second additive coordinate is the quotient of (x2 - x1) / 2 and the
// remainder extends the phase, so each hat block is 2*s0 x 2*s0 with the
// remainder-0 block first. hat_A12 rearranges the interior family, hat_A2
// the face-2 family (whose i1 = -1 members are structurally zero).
struct HatModel {
  int s0 = 0;
  Matrix hat_A12[3][3];  // [i1 + 1][i2 + 1]
  Matrix hat_A2[3][3];

  const Matrix& A12(int i1, int i2) const { return hat_A12[i1 + 1][i2 + 1]; }
  const Matrix& A2(int i1, int i2) const { return hat_A2[i1 + 1][i2 + 1]; }

  // {sum_i z^i hat_A12[i][l] : l = -1, 0, 1} as a skip-free level triplet.
  Triplet triplet12(double z) const {
    Triplet t;
    const double zp[3] = {1.0 / z, 1.0, z};
    t.down = Matrix::Zero(2 * s0, 2 * s0);
    t.stay = t.down;
    t.up = t.down;
    for (int a = 0; a < 3; ++a) {
      t.down += zp[a] * hat_A12[a][0];
      t.stay += zp[a] * hat_A12[a][1];
      t.up += zp[a] * hat_A12[a][2];
    }
    return t;
  }
};

// A one-step move (i1, i2) of the original walk takes remainder r to
// r' = (r + i2 - i1) mod 2 and the quotient level up by
// (r + i2 - i1 - r') / 2, so hat block (i1, j) holds A_{i1, i2} at sub-block
// (r, r') exactly when i2 = 2 j + r' - r + i1 lands in {-1, 0, 1}.
inline HatModel build_hat_model(const BlockSet& bs) {
  const int s0 = bs.phases();
  HatModel hm;
  hm.s0 = s0;
  for (int i1 = -1; i1 <= 1; ++i1)
    for (int j = -1; j <= 1; ++j) {
      Matrix m12 = Matrix::Zero(2 * s0, 2 * s0);
      Matrix m2 = m12;
      for (int r = 0; r < 2; ++r)
        for (int rp = 0; rp < 2; ++rp) {
          int i2 = 2 * j + rp - r + i1;
          if (i2 < -1 || i2 > 1) continue;
          m12.block(r * s0, rp * s0, s0, s0) = bs.block(Region::Interior, i1, i2);
          m2.block(r * s0, rp * s0, s0, s0) = bs.block(Region::Face2, i1, i2);
        }
      hm.hat_A12[i1 + 1][j + 1] = m12;
      hm.hat_A2[i1 + 1][j + 1] = m2;
    }
  return hm;
}

// U(z) = hat_A_{*,-1}(z) G^r(z) + hat_A_{*,0}(z) + hat_A_{*,1}(z) G(z) for
// the hat triplet; its Neumann series is the return generating function of
// the hat walk to level 0. spr(U(e^theta)) reaches 1 exactly at the
// diagonal support value theta = theta_c_max(1,1).
inline Matrix hat_U(const BlockSet& bs, double z) {
  if (!(z > 0.0)) fail(ErrorCode::InvalidArgument, "hat_U: argument must be positive");
  HatModel hm = build_hat_model(bs);
  Triplet t = hm.triplet12(z);
  Matrix G = solve_G(t);
  Matrix Gr = solve_G(t.swapped());
  return t.down * Gr + t.stay + t.up * G;
}

// (I - U(z))^{-1}, valid strictly inside the convergence disk.
inline Matrix hat_Phi00(const BlockSet& bs, double z) {
  Matrix U = hat_U(bs, z);
  if (spectral_radius(U) >= 1.0 - 1e-8)
    fail(ErrorCode::SpectralRadiusAtLeastOne, "hat_Phi00: spr(U(z)) too close to one");
  const Eigen::Index m = U.rows();
  return Eigen::PartialPivLU<Matrix>(Matrix::Identity(m, m) - U)
      .solve(Matrix::Identity(m, m));
}

// Scalar residue factor of (I - U(z))^{-1} at the branch point: with
// U1 = hat_A_{*,-1} Gr_1 + hat_A_{*,1} G_1 (the sqrt-coefficients of the two
// hat G-matrices), sqrt(z_max - z) * Phi00(z) -> -(u U1 v)^{-1} * v u.
inline double prefactor_ghat_phi(const BlockSet& bs) {
  TangencyPoint tp = theta_c_max(bs, Direction{1, 1});
  HatModel hm = build_hat_model(bs);
  TripletFamily fam = [hm](double z) { return hm.triplet12(z); };
  TripletFamily fam_rev = [hm](double z) { return hm.triplet12(z).swapped(); };
  BranchLimit bg = branch_limit_matrices(fam, tp.theta_c_max);
  BranchLimit bgr = branch_limit_matrices(fam_rev, tp.theta_c_max);

  Triplet t = hm.triplet12(std::exp(tp.theta_c_max));
  Matrix U = t.down * solve_G(t.swapped()) + t.stay + t.up * solve_G(t);
  PerronTriple pu = perron(U);
  double c0 = (pu.u * (t.down * bgr.G1 + t.up * bg.G1) * pu.v).value();
  if (!(c0 < 0.0))
    fail(ErrorCode::NonPositive, "prefactor_ghat_phi: branch coefficient has wrong sign");
  return -1.0 / c0;
}

namespace detail {

inline double direction_ratio(Direction c) {
  if (c.c1 < 1 || c.c2 < 1)
    fail(ErrorCode::InvalidArgument, "direction components must be positive integers");
  return -double(c.c1) / double(c.c2);
}

}  // namespace detail

// Decay rate xi_c of nu_{k c} together with the regime that attains it. The
// four-type case split compares the direction slope -c1/c2 with the curve
// slopes at the Q points; within tie_tol of a tangency tie the boundary
// regime (plain exponential) is reported.
inline TailAsymptotics decay_rate(const BlockSet& bs, const GammaGeometry& g, Direction c,
                                  double tie_tol = 1e-7) {
  const double lhs = detail::direction_ratio(c);
  const double xi_q1 = c.c1 * g.q1_theta1 + c.c2 * g.q1_theta2;
  const double xi_q2 = c.c1 * g.q2_theta1 + c.c2 * g.q2_theta2;

  TailAsymptotics ta;
  ta.c = c;
  switch (g.model_type) {
    case ModelType::Type1: {
      const double d1 = g.slope_q1;           // branch slope at Q1
      const double d2i = 1.0 / g.slope_q2;    // inverse branch slope at Q2
      if (lhs < d1 - tie_tol) {
        ta.regime = Regime::Face1Dominant;
        ta.xi_c = xi_q1;
      } else if (lhs > d2i + tie_tol) {
        ta.regime = Regime::Face2Dominant;
        ta.xi_c = xi_q2;
      } else {
        ta.xi_c = theta_c_max(bs, c).theta_c_max;
        if (lhs - d1 > tie_tol && d2i - lhs > tie_tol)
          ta.regime = Regime::TangencyInterior;
        else if (lhs - d1 <= tie_tol)
          ta.regime = Regime::TangencyBoundary1;
        else
          ta.regime = Regime::TangencyBoundary2;
      }
      break;
    }
    case ModelType::Type2: {
      const double chord =
          (g.theta2_star - g.q1_theta2) / (g.q2_theta1 - g.theta1_star);
      if (lhs <= chord) {
        ta.regime = Regime::Face1Dominant;
        ta.xi_c = xi_q1;
      } else {
        ta.regime = Regime::Face2Dominant;
        ta.xi_c = xi_q2;
      }
      break;
    }
    case ModelType::Type3:
      ta.regime = Regime::Face2Dominant;
      ta.xi_c = xi_q2;
      break;
    case ModelType::Type4:
      ta.regime = Regime::Face1Dominant;
      ta.xi_c = xi_q1;
      break;
  }
  if (!(ta.xi_c > 0.0))
    fail(ErrorCode::NonPositive, "decay_rate: nonpositive rate, geometry inconsistent");
  ta.power_exponent = (ta.regime == Regime::TangencyInterior) ? -0.5 : 0.0;
  return ta;
}

// Full decay-function form: nu_{k c} ~ const * k^{power_exponent} e^{-xi_c k}.
// The power term is -1/2 exactly when the support line touches the curve
// strictly between the Q points; every tie and every face-dominant case is a
// plain exponential.
inline TailAsymptotics decay_function(const BlockSet& bs, const GammaGeometry& g, Direction c,
                                      double tie_tol = 1e-7) {
  return decay_rate(bs, g, c, tie_tol);
}

// Boundary data entering the prefactor: the two face generating functions
// evaluated at the tangency coordinates, phi1 = sum_{k>=1} e^{k eta1}
// nu_{(k,0)} and phi2 = sum_{k>=1} e^{k eta2} nu_{(0,k)}, plus nu_{(0,0)}.
// tail_bound carries the truncation error of whoever produced the sums.
struct BoundaryGF {
  RowVector nu00;
  RowVector phi1;
  RowVector phi2;
  double tail_bound = 0.0;
};

// Limit direction of k^{1/2} e^{xi k} nu_{k(1,1)} in the strict tangency
// regime: ghat_phi * (g_row v1) * u1, where g_row is the boundary inflow
// vector at the tangency coordinates, and (u1, v1) are the leading s0-blocks
// of the Perron pair of U(e^{theta_c_max}).
inline RowVector prefactor_vector(const BlockSet& bs, const BoundaryGF& data) {
  const int s0 = bs.phases();
  auto usable = [s0](const RowVector& v) {
    return v.size() == s0 && v.allFinite() && v.minCoeff() >= 0.0;
  };
  if (!usable(data.nu00) || !usable(data.phi1) || !usable(data.phi2) ||
      !std::isfinite(data.tail_bound))
    fail(ErrorCode::BoundaryGFNotConverged, "prefactor_vector: unusable boundary data");

  GammaGeometry g = analyze_geometry(bs);
  TailAsymptotics ta = decay_function(bs, g, Direction{1, 1});
  if (ta.regime != Regime::TangencyInterior)
    fail(ErrorCode::NotTangencyRegime, "prefactor_vector: regime is not strict tangency");

  TangencyPoint tp = theta_c_max(bs, Direction{1, 1});
  const double z = std::exp(tp.eta1), w = std::exp(tp.eta2);
  const Matrix id = Matrix::Identity(s0, s0);
  RowVector g_row = data.phi1 * (bs.gf(Region::Face1, z, w) - id) +
                    data.phi2 * (bs.gf(Region::Face2, z, w) - id) +
                    data.nu00 * (bs.gf(Region::Origin, z, w) - id);

  double ghat = prefactor_ghat_phi(bs);
  PerronTriple pu = perron(hat_U(bs, std::exp(tp.theta_c_max)));
  Vector v1 = pu.v.head(s0);
  RowVector u1 = pu.u.head(s0);
  RowVector pf = ghat * (g_row * v1).value() * u1;
  if (!(pf.minCoeff() > 0.0))
    fail(ErrorCode::NonPositive, "prefactor_vector: nonpositive component");
  return pf;
}

}  // namespace qbd2d

#pragma once

// Numerical ground truth on finite truncations of the lattice chain:
// exact stationary solves, least-squares tail fits, boundary generating
// functions, a stationarity identity residual, and a counter-based
// simulator. Nothing here depends on the spectral machinery, so these
// routines can arbitrate it.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "model.hpp"
#include "tail.hpp"
#include "types.hpp"

namespace qbd2d {

enum class SolveMethod { Auto, Elimination, Sweeps };

// Stationary distribution of the chain truncated to [0, N]^2. Jumps that
// would cross a truncation face keep their phase transition but return to
// the pre-jump lattice point, so the truncated chain stays stochastic.
struct TruncatedStationary {
  BlockSet blocks;
  int N = 0;
  std::vector<double> nu;        // (N+1)^2 * s0 entries, lexicographic in (x1, x2, phase)
  double residual = 0.0;         // l1 norm of nu P - nu on the truncated chain
  double tail_mass_bound = 0.0;  // mass within three levels of the truncation faces

  int phases() const { return blocks.phases(); }
  std::size_t index(int x1, int x2, int j) const {
    return (std::size_t(x1) * std::size_t(N + 1) + std::size_t(x2)) * std::size_t(phases()) +
           std::size_t(j);
  }
  double at(int x1, int x2, int j) const { return nu[index(x1, x2, j)]; }
  RowVector vec(int x1, int x2) const {
    const int m = phases();
    RowVector v(m);
    for (int j = 0; j < m; ++j) v(j) = nu[index(x1, x2, j)];
    return v;
  }
};

namespace detail {

// Visit every jump of the truncated chain out of (x1, x2). Moves below the
// axes carry structurally zero blocks and are skipped outright.
template <class F>
inline void for_each_jump(const BlockSet& bs, int N, int x1, int x2, F&& f) {
  Region r = BlockSet::region_of(x1, x2);
  for (int i1 = -1; i1 <= 1; ++i1)
    for (int i2 = -1; i2 <= 1; ++i2) {
      int y1 = x1 + i1, y2 = x2 + i2;
      if (y1 < 0 || y2 < 0) continue;
      if (y1 > N || y2 > N) {
        y1 = x1;
        y2 = x2;
      }
      f(y1, y2, bs.block(r, i1, i2));
    }
}

inline std::vector<double> apply_transition(const BlockSet& bs, int N,
                                            const std::vector<double>& nu) {
  const int m = bs.phases();
  const std::size_t S = std::size_t(N + 1);
  std::vector<double> out(nu.size(), 0.0);
  for (int x1 = 0; x1 <= N; ++x1)
    for (int x2 = 0; x2 <= N; ++x2) {
      const std::size_t src = (std::size_t(x1) * S + std::size_t(x2)) * std::size_t(m);
      for_each_jump(bs, N, x1, x2, [&](int y1, int y2, const Matrix& B) {
        const std::size_t dst = (std::size_t(y1) * S + std::size_t(y2)) * std::size_t(m);
        for (int j = 0; j < m; ++j) {
          const double v = nu[src + std::size_t(j)];
          if (v == 0.0) continue;
          for (int jp = 0; jp < m; ++jp) out[dst + std::size_t(jp)] += v * B(j, jp);
        }
      });
    }
  return out;
}

inline double l1_residual(const BlockSet& bs, int N, const std::vector<double>& nu) {
  std::vector<double> out = apply_transition(bs, N, nu);
  double acc = 0.0;
  for (std::size_t i = 0; i < nu.size(); ++i) acc += std::abs(out[i] - nu[i]);
  return acc;
}

// Grassmann-Taksar-Heyman elimination in banded storage. The algorithm is
// subtraction free: every pivot is a sum of current off-diagonal row
// entries, so each stationary weight comes out with full relative accuracy
// no matter how small it is. Diagonal entries are never read and never
// stored.
inline void solve_gth(const BlockSet& bs, int N, std::vector<double>& nu) {
  const int m = bs.phases();
  const std::size_t S = std::size_t(N + 1);
  const std::size_t n = S * S * std::size_t(m);
  const long b = long(N + 3) * m;  // |column - row| bound over all jumps
  const long W = 2 * b + 1;
  std::vector<double> band(n * std::size_t(W), 0.0);
  auto at = [&](std::size_t i, std::size_t j) -> double& {
    return band[i * std::size_t(W) + std::size_t(long(j) - long(i) + b)];
  };

  for (int x1 = 0; x1 <= N; ++x1)
    for (int x2 = 0; x2 <= N; ++x2) {
      const std::size_t row0 = (std::size_t(x1) * S + std::size_t(x2)) * std::size_t(m);
      for_each_jump(bs, N, x1, x2, [&](int y1, int y2, const Matrix& B) {
        const std::size_t col0 = (std::size_t(y1) * S + std::size_t(y2)) * std::size_t(m);
        for (int j = 0; j < m; ++j)
          for (int jp = 0; jp < m; ++jp) {
            if (row0 + std::size_t(j) == col0 + std::size_t(jp)) continue;
            const double p = B(j, jp);
            if (p != 0.0) at(row0 + std::size_t(j), col0 + std::size_t(jp)) += p;
          }
      });
    }

  std::vector<double> scale(n, 0.0);
  for (std::size_t i = n - 1; i >= 1; --i) {
    const std::size_t lo = i > std::size_t(b) ? i - std::size_t(b) : 0;
    double s = 0.0;
    for (std::size_t j = lo; j < i; ++j) s += at(i, j);
    if (!(s > 0.0)) fail(ErrorCode::InvalidArgument, "truncated chain is not irreducible");
    scale[i] = s;
    for (std::size_t j = lo; j < i; ++j) {
      const double pji = at(j, i);
      if (pji == 0.0) continue;
      const double f = pji / s;
      for (std::size_t k = lo; k < i; ++k) {
        if (k == j) continue;
        const double pik = at(i, k);
        if (pik != 0.0) at(j, k) += f * pik;
      }
    }
  }

  nu.assign(n, 0.0);
  nu[0] = 1.0;
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t lo = i > std::size_t(b) ? i - std::size_t(b) : 0;
    double acc = 0.0;
    for (std::size_t j = lo; j < i; ++j) acc += nu[j] * at(j, i);
    nu[i] = acc / scale[i];
  }
}

// Gauss-Seidel over x1 stripes. Each stripe is solved exactly through a
// block tridiagonal factorization in x2, so information crosses a stripe
// in one update and crosses the lattice at one stripe per half sweep.
// The stripe operators do not change between sweeps and are factored once.
class StripeSolver {
 public:
  StripeSolver(const BlockSet& bs, int N) : bs_(bs), N_(N), m_(bs.phases()) {
    const int S = N + 1;
    const Matrix I = Matrix::Identity(m_, m_);
    cinv_.resize(std::size_t(S));
    lcoef_.resize(std::size_t(S));
    ucoef_.resize(std::size_t(S));
    for (int k = 0; k <= N; ++k) {
      std::vector<Matrix> M0, Mm, Mp;
      M0.resize(std::size_t(S));
      Mm.resize(std::size_t(S));
      Mp.resize(std::size_t(S));
      for (int x = 0; x <= N; ++x) {
        Region r = BlockSet::region_of(k, x);
        Matrix self = bs.block(r, 0, 0);
        for (int i1 = -1; i1 <= 1; ++i1)
          for (int i2 = -1; i2 <= 1; ++i2) {
            if (i1 == 0 && i2 == 0) continue;
            const int y1 = k + i1, y2 = x + i2;
            if (y1 < 0 || y2 < 0) continue;
            if (y1 > N || y2 > N) self += bs.block(r, i1, i2);
          }
        M0[std::size_t(x)] = self;
        Mm[std::size_t(x)] = x >= 1 ? bs.block(r, 0, -1) : Matrix::Zero(m_, m_);
        Mp[std::size_t(x)] = x + 1 <= N ? bs.block(r, 0, 1) : Matrix::Zero(m_, m_);
      }
      // factor (I - M)^T for this stripe; sub and super blocks carry signs
      auto& Cinv = cinv_[std::size_t(k)];
      auto& LC = lcoef_[std::size_t(k)];
      auto& Up = ucoef_[std::size_t(k)];
      Cinv.resize(std::size_t(S));
      LC.resize(std::size_t(S));
      Up.resize(std::size_t(S));
      Cinv[0] = (I - M0[0].transpose()).inverse();
      for (int x = 1; x <= N; ++x) {
        Up[std::size_t(x - 1)] = -Mm[std::size_t(x)].transpose();
        LC[std::size_t(x)] = -Mp[std::size_t(x - 1)].transpose() * Cinv[std::size_t(x - 1)];
        Matrix C = I - M0[std::size_t(x)].transpose() - LC[std::size_t(x)] * Up[std::size_t(x - 1)];
        Cinv[std::size_t(x)] = C.inverse();
      }
      Up[std::size_t(N)] = Matrix::Zero(m_, m_);
    }
    rhs_.resize(m_, S);
    phi_.resize(m_, S);
    sol_.resize(m_, S);
  }

  // One full sweep; returns the largest per-entry relative change.
  double sweep(std::vector<double>& nu, bool ascending) {
    double worst = 0.0;
    for (int t = 0; t <= N_; ++t)
      worst = std::max(worst, update_stripe(ascending ? t : N_ - t, nu));
    return worst;
  }

 private:
  double update_stripe(int k, std::vector<double>& nu) {
    const int S = N_ + 1;
    rhs_.setZero();
    for (int s : {k - 1, k + 1}) {
      if (s < 0 || s > N_) continue;
      const int i1 = k - s;
      for (int y = 0; y <= N_; ++y) {
        Region reg = BlockSet::region_of(s, y);
        Eigen::Map<const RowVector> src(nu.data() + idx(s, y), m_);
        for (int i2 = -1; i2 <= 1; ++i2) {
          const int x = y + i2;
          if (x < 0 || x > N_) continue;
          rhs_.col(x).noalias() += bs_.block(reg, i1, i2).transpose() * src.transpose();
        }
      }
    }
    const auto& Cinv = cinv_[std::size_t(k)];
    const auto& LC = lcoef_[std::size_t(k)];
    const auto& Up = ucoef_[std::size_t(k)];
    phi_.col(0) = rhs_.col(0);
    for (int x = 1; x <= N_; ++x)
      phi_.col(x).noalias() = rhs_.col(x) - LC[std::size_t(x)] * phi_.col(x - 1);
    sol_.col(N_).noalias() = Cinv[std::size_t(N_)] * phi_.col(N_);
    for (int x = N_ - 1; x >= 0; --x)
      sol_.col(x).noalias() =
          Cinv[std::size_t(x)] * (phi_.col(x) - Up[std::size_t(x)] * sol_.col(x + 1));

    double worst = 0.0;
    for (int x = 0; x < S; ++x)
      for (int j = 0; j < m_; ++j) {
        double& slot = nu[idx(k, x) + std::size_t(j)];
        const double next = std::max(sol_(j, x), 0.0);
        const double mag = std::max(std::abs(next), std::abs(slot));
        if (mag >= 1e-250) worst = std::max(worst, std::abs(next - slot) / mag);
        slot = next;
      }
    return worst;
  }

  std::size_t idx(int x1, int x2) const {
    return (std::size_t(x1) * std::size_t(N_ + 1) + std::size_t(x2)) * std::size_t(m_);
  }

  const BlockSet& bs_;
  int N_;
  int m_;
  std::vector<std::vector<Matrix>> cinv_, lcoef_, ucoef_;
  Matrix rhs_, phi_, sol_;
};

inline void normalize_l1(std::vector<double>& nu) {
  double total = 0.0;
  for (double v : nu) total += v;
  for (double& v : nu) v /= total;
}

inline double solve_sweeps(const BlockSet& bs, int N, std::vector<double>& nu) {
  const int m = bs.phases();
  const std::size_t S = std::size_t(N + 1);
  nu.assign(S * S * std::size_t(m), 0.0);
  for (int x1 = 0; x1 <= N; ++x1)
    for (int x2 = 0; x2 <= N; ++x2)
      for (int j = 0; j < m; ++j)
        nu[(std::size_t(x1) * S + std::size_t(x2)) * std::size_t(m) + std::size_t(j)] =
            std::pow(0.5, x1 + x2);
  normalize_l1(nu);

  StripeSolver solver(bs, N);
  bool ascending = true;
  const int cap = 30000;
  for (int it = 0; it < cap; ++it) {
    const double change = solver.sweep(nu, ascending);
    ascending = !ascending;
    normalize_l1(nu);
    if (change <= 1e-13 || (it + 1) % 512 == 0) {
      const double res = l1_residual(bs, N, nu);
      if (res <= 1e-12 && change <= 1e-12) {
        // polish to push the deep tail to its relative fixed point
        for (int extra = 0; extra < 32; ++extra) {
          solver.sweep(nu, ascending);
          ascending = !ascending;
          normalize_l1(nu);
        }
        return l1_residual(bs, N, nu);
      }
    }
  }
  fail(ErrorCode::NotConverged, "stripe sweeps did not reach the residual target");
}

}  // namespace detail

inline TruncatedStationary solve_truncated(const BlockSet& bs, int N,
                                           SolveMethod method = SolveMethod::Auto) {
  if (N < 30) fail(ErrorCode::InvalidArgument, "truncation level must be at least 30");
  DriftReport rep = mean_drifts(bs);
  if (rep.stability != Stability::PositiveRecurrent)
    fail(ErrorCode::Unstable, "truncated solve requires a positive recurrent model");

  TruncatedStationary ts;
  ts.blocks = bs;
  ts.N = N;
  const std::size_t n = std::size_t(N + 1) * std::size_t(N + 1) * std::size_t(bs.phases());
  SolveMethod pick = method;
  if (pick == SolveMethod::Auto)
    pick = n <= 20000 ? SolveMethod::Elimination : SolveMethod::Sweeps;

  if (pick == SolveMethod::Elimination) {
    detail::solve_gth(bs, N, ts.nu);
    detail::normalize_l1(ts.nu);
    ts.residual = detail::l1_residual(bs, N, ts.nu);
  } else {
    ts.residual = detail::solve_sweeps(bs, N, ts.nu);
  }

  double edge = 0.0;
  for (int x1 = 0; x1 <= N; ++x1)
    for (int x2 = 0; x2 <= N; ++x2) {
      if (x1 < N - 2 && x2 < N - 2) continue;
      for (int j = 0; j < bs.phases(); ++j) edge += ts.at(x1, x2, j);
    }
  ts.tail_mass_bound = edge;
  return ts;
}

// ---------------------------------------------------------------------------
// tail fits

struct TailFit {
  Direction c;
  int k_lo = 0, k_hi = 0;
  double xi_hat = 0.0;
  double beta_hat = 0.0;
  double r_squared = 0.0;
};

// Window placement: start past the boundary layer, stop before truncation
// effects and before the ray leaves the solved box.
inline std::pair<int, int> default_fit_window(int N, Direction c) {
  const int maxc = std::max(c.c1, c.c2);
  const int minc = std::min(c.c1, c.c2);
  const int lo = std::max(10, N / 10);
  const int hi = std::min({N / 3, (60 * minc) / maxc, (N - 3) / maxc});
  return {lo, hi};
}

// Pooled least squares for log nu_{kc} = a_j - xi k + beta log k with one
// intercept per phase and slopes shared across phases.
inline TailFit fit_decay(const TruncatedStationary& ts, Direction c, int k_lo, int k_hi) {
  if (c.c1 < 1 || c.c2 < 1)
    fail(ErrorCode::InvalidArgument, "direction components must be positive integers");
  const int maxc = std::max(c.c1, c.c2);
  if (k_lo < 1 || k_hi < k_lo || k_hi * maxc + 3 > ts.N)
    fail(ErrorCode::InvalidArgument,
         "fit window must keep three levels of clearance from the truncation faces");
  const int npts = k_hi - k_lo + 1;
  if (npts < 8) fail(ErrorCode::WindowTooSmall, "decay fit needs at least eight ray points");

  const int m = ts.phases();
  const int p = m + 2;
  Matrix ata = Matrix::Zero(p, p);
  Vector aty = Vector::Zero(p);
  double sy = 0.0, syy = 0.0;
  long nobs = 0;
  for (int k = k_lo; k <= k_hi; ++k) {
    for (int j = 0; j < m; ++j) {
      const double v = ts.at(k * c.c1, k * c.c2, j);
      if (!(v > 0.0) || !std::isfinite(v))
        fail(ErrorCode::ZeroProbability, "ray probability vanishes inside the fit window");
      const double y = std::log(v);
      Vector row = Vector::Zero(p);
      row(j) = 1.0;
      row(m) = double(k);
      row(m + 1) = std::log(double(k));
      ata.noalias() += row * row.transpose();
      aty.noalias() += row * y;
      sy += y;
      syy += y * y;
      ++nobs;
    }
  }
  Vector x = ata.ldlt().solve(aty);
  TailFit fit;
  fit.c = c;
  fit.k_lo = k_lo;
  fit.k_hi = k_hi;
  fit.xi_hat = -x(m);
  fit.beta_hat = x(m + 1);
  const double sst = syy - sy * sy / double(nobs);
  const double ssr = std::max(syy - x.dot(aty), 0.0);
  fit.r_squared = sst > 0.0 ? std::clamp(1.0 - ssr / sst, 0.0, 1.0) : 1.0;
  return fit;
}

inline TailFit fit_decay(const TruncatedStationary& ts, Direction c) {
  auto [lo, hi] = default_fit_window(ts.N, c);
  return fit_decay(ts, c, lo, hi);
}

// ---------------------------------------------------------------------------
// boundary generating functions and the stationarity identity

namespace detail {

// z^i v computed through logs so that large powers of z against tiny
// weights neither overflow nor underflow pairwise.
inline double scaled_term(int i, double lz, double v) {
  if (!(v > 0.0)) return 0.0;
  return std::exp(double(i) * lz + std::log(v));
}

inline double axis_decay_ratio(const TruncatedStationary& ts, int axis) {
  const int N = ts.N;
  const int d = std::max(5, N / 10);
  // measured one decade back from the face: the redirected jumps pile mass
  // into the last few levels and would inflate an edge-anchored ratio
  const double hi = (axis == 1 ? ts.vec(N - d, 0) : ts.vec(0, N - d)).sum();
  const double lo = (axis == 1 ? ts.vec(N - 2 * d, 0) : ts.vec(0, N - 2 * d)).sum();
  if (!(hi > 0.0) || !(lo > 0.0))
    fail(ErrorCode::ZeroProbability, "axis mass vanishes near the truncation face");
  return std::pow(hi / lo, 1.0 / double(d));
}

}  // namespace detail

// Truncated boundary sums with a geometric tail bound extrapolated from the
// last decade of solved levels.
inline BoundaryGF eval_boundary_gf(const TruncatedStationary& ts, double z, double w) {
  if (!(z >= 0.0) || !(w >= 0.0))
    fail(ErrorCode::InvalidArgument, "generating function arguments must be nonnegative");
  const int m = ts.phases();
  const int N = ts.N;
  BoundaryGF out;
  out.nu00 = ts.vec(0, 0);
  out.phi1 = RowVector::Zero(m);
  out.phi2 = RowVector::Zero(m);
  out.tail_bound = 0.0;

  for (int side = 1; side <= 2; ++side) {
    const double arg = side == 1 ? z : w;
    if (arg == 0.0) continue;  // empty sum, zero tail
    const double ratio = detail::axis_decay_ratio(ts, side);
    const double q = arg * ratio;
    if (q >= 1.0 - 1e-6)
      fail(ErrorCode::DivergentAtArgument, "argument reaches the axis radius of convergence");
    const double la = std::log(arg);
    RowVector& phi = side == 1 ? out.phi1 : out.phi2;
    for (int i = 1; i <= N; ++i) {
      const RowVector v = side == 1 ? ts.vec(i, 0) : ts.vec(0, i);
      for (int j = 0; j < m; ++j) phi(j) += detail::scaled_term(i, la, v(j));
    }
    const double mass_n = (side == 1 ? ts.vec(N, 0) : ts.vec(0, N)).sum();
    const double t_n = detail::scaled_term(N, la, mass_n);
    out.tail_bound += t_n * q / (1.0 - q);
  }
  return out;
}

// Sup-norm gap in the balance identity linking the interior transform to
// the boundary transforms. Exact for the untruncated chain on its domain
// of convergence; on a truncation it is small inside the domain and grows
// with N outside it.
inline double stationary_identity_residual(const TruncatedStationary& ts, double z, double w) {
  if (!(z > 0.0) || !(w > 0.0))
    fail(ErrorCode::InvalidArgument, "identity arguments must be positive");
  const int m = ts.phases();
  const int N = ts.N;
  const double lz = std::log(z), lw = std::log(w);

  RowVector phip = RowVector::Zero(m), phi1 = RowVector::Zero(m), phi2 = RowVector::Zero(m);
  for (int i = 1; i <= N; ++i) {
    const double wz = double(i) * lz, ww = double(i) * lw;
    for (int j = 0; j < m; ++j) {
      const double a = ts.at(i, 0, j);
      if (a > 0.0) phi1(j) += std::exp(wz + std::log(a));
      const double b = ts.at(0, i, j);
      if (b > 0.0) phi2(j) += std::exp(ww + std::log(b));
    }
  }
  for (int x1 = 1; x1 <= N; ++x1)
    for (int x2 = 1; x2 <= N; ++x2) {
      const double base = double(x1) * lz + double(x2) * lw;
      for (int j = 0; j < m; ++j) {
        const double v = ts.at(x1, x2, j);
        if (v > 0.0) phip(j) += std::exp(base + std::log(v));
      }
    }

  const Matrix I = Matrix::Identity(m, m);
  const RowVector lhs = phip * (I - ts.blocks.gf(Region::Interior, z, w));
  const RowVector rhs = phi1 * (ts.blocks.gf(Region::Face1, z, w) - I) +
                        phi2 * (ts.blocks.gf(Region::Face2, z, w) - I) +
                        ts.vec(0, 0) * (ts.blocks.gf(Region::Origin, z, w) - I);
  return (lhs - rhs).cwiseAbs().maxCoeff();
}

// A-priori estimate of the truncation error in the balance identity: the
// boundary extrapolation bound plus the scaled mass of the outer interior
// shell, continued geometrically past the box with the local diagonal decade
// ratio. The interior part matters for models whose diagonal decay is slower
// than their axis decay at the probe argument.
inline double identity_truncation_bound(const TruncatedStationary& ts, double z, double w) {
  if (!(z > 0.0) || !(w > 0.0))
    fail(ErrorCode::InvalidArgument, "identity arguments must be positive");
  const int m = ts.phases();
  const int N = ts.N;
  const int d = std::max(5, N / 10);
  const double lz = std::log(z), lw = std::log(w);

  double shell = 0.0;
  auto add = [&](int x1, int x2) {
    const double base = double(x1) * lz + double(x2) * lw;
    for (int j = 0; j < m; ++j) {
      const double v = ts.at(x1, x2, j);
      if (v > 0.0) shell += std::exp(base + std::log(v));
    }
  };
  for (int x1 = N - d + 1; x1 <= N; ++x1)
    for (int x2 = 0; x2 <= N; ++x2) add(x1, x2);
  for (int x2 = N - d + 1; x2 <= N; ++x2)
    for (int x1 = 0; x1 <= N - d; ++x1) add(x1, x2);

  const double hi = ts.vec(N - d, N - d).sum();
  const double lo = ts.vec(N - 2 * d, N - 2 * d).sum();
  double cont = 1.0;
  if (hi > 0.0 && lo > 0.0) {
    const double q = z * w * std::pow(hi / lo, 1.0 / double(d));
    if (q >= 1.0 - 1e-6)
      fail(ErrorCode::DivergentAtArgument, "argument reaches the diagonal radius of convergence");
    cont = 1.0 / (1.0 - q);
  }
  return eval_boundary_gf(ts, z, w).tail_bound + shell * cont;
}

// Relative spread of nu_{kc+x} / nu_{kc} over the back half of the default
// fit window, maximized over phases. Near zero when the tail is already a
// product of a direction profile and a scalar decay.
inline double homogeneity_check(const TruncatedStationary& ts, Direction c, int dx1, int dx2) {
  if (c.c1 < 1 || c.c2 < 1)
    fail(ErrorCode::InvalidArgument, "direction components must be positive integers");
  auto [lo, hi] = default_fit_window(ts.N, c);
  const int start = lo + (hi - lo + 1) / 2;
  if (hi - start + 1 < 4) fail(ErrorCode::WindowTooSmall, "homogeneity check needs four ray points");
  const int m = ts.phases();
  double spread = 0.0;
  for (int j = 0; j < m; ++j) {
    double rmin = 0.0, rmax = 0.0, rsum = 0.0;
    int count = 0;
    for (int k = start; k <= hi; ++k) {
      const int b1 = k * c.c1, b2 = k * c.c2;
      const int s1 = b1 + dx1, s2 = b2 + dx2;
      if (s1 < 0 || s2 < 0 || s1 > ts.N || s2 > ts.N)
        fail(ErrorCode::InvalidArgument, "offset leaves the solved box inside the window");
      const double base = ts.at(b1, b2, j);
      if (!(base > 0.0)) fail(ErrorCode::ZeroProbability, "ray probability vanishes in the window");
      const double r = ts.at(s1, s2, j) / base;
      rmin = count == 0 ? r : std::min(rmin, r);
      rmax = count == 0 ? r : std::max(rmax, r);
      rsum += r;
      ++count;
    }
    const double mean = rsum / double(count);
    if (!(mean > 0.0)) fail(ErrorCode::ZeroProbability, "shifted ray vanishes in the window");
    spread = std::max(spread, (rmax - rmin) / mean);
  }
  return spread;
}

// ---------------------------------------------------------------------------
// simulation

struct Simulation {
  std::int64_t steps = 0;
  int s0 = 1;
  int x1 = 0, x2 = 0, phase = 0;  // final state
  std::map<std::array<int, 3>, std::int64_t> counts;

  double box_mass(int mbox) const {
    double acc = 0.0;
    for (const auto& [state, cnt] : counts)
      if (state[0] <= mbox && state[1] <= mbox) acc += double(cnt);
    return acc / double(steps);
  }
};

namespace detail {

inline std::uint64_t mix64(std::uint64_t t) {
  t ^= t >> 30;
  t *= 0xBF58476D1CE4E5B9ULL;
  t ^= t >> 27;
  t *= 0x94D049BB133111EBULL;
  t ^= t >> 31;
  return t;
}

}  // namespace detail

// Single trajectory from the origin with a counter-based generator: the
// variate at step k depends only on (seed, k), so runs are reproducible
// independent of platform or call order.
inline Simulation simulate(const BlockSet& bs, std::int64_t steps, std::uint64_t seed) {
  if (steps < 1) fail(ErrorCode::InvalidArgument, "simulation needs at least one step");
  const int m = bs.phases();

  struct Move {
    double cum;
    std::int8_t d1, d2;
    std::int16_t jn;
  };
  std::array<std::vector<std::vector<Move>>, 4> tables;
  for (int r = 0; r < 4; ++r) {
    tables[std::size_t(r)].resize(std::size_t(m));
    for (int j = 0; j < m; ++j) {
      auto& cdf = tables[std::size_t(r)][std::size_t(j)];
      double acc = 0.0;
      for (int i1 = -1; i1 <= 1; ++i1)
        for (int i2 = -1; i2 <= 1; ++i2) {
          const Matrix& B = bs.block(static_cast<Region>(r), i1, i2);
          for (int jp = 0; jp < m; ++jp) {
            const double p = B(j, jp);
            if (p > 0.0) {
              acc += p;
              cdf.push_back({acc, std::int8_t(i1), std::int8_t(i2), std::int16_t(jp)});
            }
          }
        }
      for (auto& mv : cdf) mv.cum /= acc;  // row sums are 1 up to roundoff
    }
  }

  Simulation sim;
  sim.steps = steps;
  sim.s0 = m;
  int x1 = 0, x2 = 0, j = 0;
  for (std::int64_t s = 0; s < steps; ++s) {
    const std::uint64_t t =
        detail::mix64(seed + 0x9E3779B97F4A7C15ULL * std::uint64_t(s + 1));
    const double u = double(t >> 11) * 0x1.0p-53;
    const auto& cdf = tables[std::size_t(static_cast<int>(BlockSet::region_of(x1, x2)))]
                            [std::size_t(j)];
    const Move* pick = &cdf.back();
    for (const Move& mv : cdf)
      if (u < mv.cum) {
        pick = &mv;
        break;
      }
    x1 += pick->d1;
    x2 += pick->d2;
    j = pick->jn;
    ++sim.counts[{x1, x2, j}];
  }
  sim.x1 = x1;
  sim.x2 = x2;
  sim.phase = j;
  return sim;
}

}  // namespace qbd2d

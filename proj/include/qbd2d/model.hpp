#pragma once

#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "qbd2d/perron.hpp"
#include "qbd2d/qbd_core.hpp"
#include "qbd2d/types.hpp"

namespace qbd2d {

// Transition blocks of a two-dimensional skip-free reflecting random walk
// with a phase. block(r, i1, i2)(p, q) is the probability of jumping by
// (i1, i2) while moving from phase p to phase q, when the current position
// lies in region r. Regions whose structure forbids a jump keep zero blocks:
// from Origin only i >= 0, from Face1 only i2 >= 0, from Face2 only i1 >= 0.
class BlockSet {
 public:
  BlockSet() = default;
  explicit BlockSet(int s0) : s0_(s0) {
    for (auto& reg : blocks_)
      for (auto& row : reg)
        for (auto& b : row) b = Matrix::Zero(s0, s0);
  }

  int phases() const { return s0_; }

  const Matrix& block(Region r, int i1, int i2) const {
    return blocks_[size_t(r)][size_t(i1 + 1)][size_t(i2 + 1)];
  }
  Matrix& block(Region r, int i1, int i2) {
    return blocks_[size_t(r)][size_t(i1 + 1)][size_t(i2 + 1)];
  }

  static bool jump_allowed(Region r, int i1, int i2) {
    switch (r) {
      case Region::Origin: return i1 >= 0 && i2 >= 0;
      case Region::Face1: return i2 >= 0;
      case Region::Face2: return i1 >= 0;
      case Region::Interior: return true;
    }
    return false;
  }

  static Region region_of(long x1, long x2) {
    if (x1 > 0 && x2 > 0) return Region::Interior;
    if (x1 > 0) return Region::Face1;
    if (x2 > 0) return Region::Face2;
    return Region::Origin;
  }

  // Generating function sum_{i1,i2} z^{ i1} w^{ i2} block(r, i1, i2).
  Matrix gf(Region r, double z, double w) const {
    Matrix m = Matrix::Zero(s0_, s0_);
    const double zp[3] = {1.0 / z, 1.0, z};
    const double wp[3] = {1.0 / w, 1.0, w};
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) m += zp[a] * wp[b] * blocks_[size_t(r)][size_t(a)][size_t(b)];
    return m;
  }

  // Interior triplet along one coordinate, with the other weighted by x:
  // axis = 1 keeps x1 as the series variable (level = x2),
  // axis = 2 keeps x2 (level = x1).
  Triplet interior_triplet(int axis, double x) const {
    Triplet t;
    const Eigen::Index m = s0_;
    t.down = Matrix::Zero(m, m);
    t.stay = Matrix::Zero(m, m);
    t.up = Matrix::Zero(m, m);
    const double xp[3] = {1.0 / x, 1.0, x};
    for (int a = -1; a <= 1; ++a)
      for (int l = -1; l <= 1; ++l) {
        const Matrix& B = (axis == 1) ? block(Region::Interior, a, l)
                                      : block(Region::Interior, l, a);
        Matrix& dst = (l < 0) ? t.down : (l == 0 ? t.stay : t.up);
        dst += xp[a + 1] * B;
      }
    return t;
  }

 private:
  int s0_ = 0;
  // region x (i1+1) x (i2+1)
  std::array<std::array<std::array<Matrix, 3>, 3>, 4> blocks_;
};

// ---------------------------------------------------------------------------
// validation

enum class Verdict { Pass, Fail, Unknown };

inline const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Unknown: return "unknown";
  }
  return "?";
}

struct Violation {
  std::string kind;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  Verdict irreducibility = Verdict::Unknown;
  bool ok() const { return violations.empty() && irreducibility != Verdict::Fail; }
};

namespace detail {

// Strong connectivity + cycle-length gcd on the (position, phase) digraph
// restricted to the window [0, w-1]^2; edges leaving the window are dropped
// for connectivity but counted when testing whether a class is closed.
inline Verdict irreducibility_window_check(const BlockSet& bs, int w = 5) {
  const int s0 = bs.phases();
  const int n = w * w * s0;
  auto id = [&](int x1, int x2, int p) { return (x1 * w + x2) * s0 + p; };
  std::vector<std::vector<int>> adj(n), radj(n);
  std::vector<bool> exits(n, false);  // has positive-probability edge out of the window
  for (int x1 = 0; x1 < w; ++x1)
    for (int x2 = 0; x2 < w; ++x2) {
      Region r = BlockSet::region_of(x1, x2);
      for (int i1 = -1; i1 <= 1; ++i1)
        for (int i2 = -1; i2 <= 1; ++i2) {
          const Matrix& B = bs.block(r, i1, i2);
          bool inside = (x1 + i1 >= 0 && x1 + i1 < w && x2 + i2 >= 0 && x2 + i2 < w);
          for (int p = 0; p < s0; ++p)
            for (int q = 0; q < s0; ++q) {
              if (B(p, q) <= 0.0) continue;
              if (!inside) {
                exits[id(x1, x2, p)] = true;
                continue;
              }
              int u = id(x1, x2, p), v = id(x1 + i1, x2 + i2, q);
              if (u == v) continue;  // self-loops recorded through gcd step below
              adj[u].push_back(v);
              radj[v].push_back(u);
            }
        }
    }

  auto bfs = [&](const std::vector<std::vector<int>>& g, int src) {
    std::vector<int> depth(n, -1);
    std::vector<int> queue{src};
    depth[src] = 0;
    for (size_t head = 0; head < queue.size(); ++head) {
      int u = queue[head];
      for (int v : g[u])
        if (depth[v] < 0) {
          depth[v] = depth[u] + 1;
          queue.push_back(v);
        }
    }
    return depth;
  };

  std::vector<int> fwd = bfs(adj, 0), back = bfs(radj, 0);
  bool strongly_connected = true;
  for (int i = 0; i < n; ++i)
    if (fwd[i] < 0 || back[i] < 0) strongly_connected = false;

  // Closed-class detection: a strongly connected component with no edge
  // leaving it (not even out of the window) that misses part of the window
  // proves reducibility of the full chain.
  {
    std::vector<int> comp(n, -1);
    int nc = 0;
    for (int i = 0; i < n; ++i) {
      if (comp[i] >= 0) continue;
      std::vector<int> f = bfs(adj, i), b = bfs(radj, i);
      for (int j = 0; j < n; ++j)
        if (f[j] >= 0 && b[j] >= 0 && comp[j] < 0) comp[j] = nc;
      ++nc;
    }
    for (int c = 0; c < nc; ++c) {
      bool closed = true, nonempty = false;
      int members = 0;
      for (int i = 0; i < n; ++i) {
        if (comp[i] != c) continue;
        nonempty = true;
        ++members;
        if (exits[i]) closed = false;
        for (int v : adj[i])
          if (comp[v] != c) closed = false;
        // a self-loop-only state with no other outgoing mass is closed
      }
      if (nonempty && closed && members < n) return Verdict::Fail;
    }
  }

  if (!strongly_connected) return Verdict::Unknown;

  // gcd of cycle lengths through state 0; any self-loop gives gcd 1.
  int g = 0;
  for (int x1 = 0; x1 < w && g != 1; ++x1)
    for (int x2 = 0; x2 < w && g != 1; ++x2) {
      Region r = BlockSet::region_of(x1, x2);
      const Matrix& B = bs.block(r, 0, 0);
      for (int p = 0; p < s0; ++p)
        if (B(p, p) > 0.0) g = 1;
    }
  if (g != 1) {
    for (int u = 0; u < n && g != 1; ++u)
      for (int v : adj[u]) {
        g = std::gcd(g, std::abs(fwd[u] + 1 - fwd[v]));
        if (g == 1) break;
      }
  }
  return g == 1 ? Verdict::Pass : Verdict::Unknown;
}

}  // namespace detail

inline ValidationReport validate(const BlockSet& bs, double row_tol = 1e-12) {
  ValidationReport rep;
  const int s0 = bs.phases();
  if (s0 <= 0) {
    rep.violations.push_back({"EmptyModel", "phase count must be positive"});
    return rep;
  }
  for (int r = 0; r < 4; ++r) {
    Region reg = Region(r);
    Matrix rowsum = Matrix::Zero(s0, s0);
    for (int i1 = -1; i1 <= 1; ++i1)
      for (int i2 = -1; i2 <= 1; ++i2) {
        const Matrix& B = bs.block(reg, i1, i2);
        if ((B.array() < 0.0).any())
          rep.violations.push_back({"NegativeEntry",
                                    std::string(region_name(reg)) + " block (" +
                                        std::to_string(i1) + "," + std::to_string(i2) + ")"});
        if (!BlockSet::jump_allowed(reg, i1, i2) && !B.isZero(0.0))
          rep.violations.push_back({"ForbiddenSupport",
                                    std::string(region_name(reg)) + " block (" +
                                        std::to_string(i1) + "," + std::to_string(i2) + ")"});
        rowsum += B;
      }
    for (int p = 0; p < s0; ++p) {
      double s = rowsum.row(p).sum();
      if (std::abs(s - 1.0) > row_tol)
        rep.violations.push_back({"NonStochasticRow",
                                  std::string(region_name(reg)) + " phase " + std::to_string(p) +
                                      " row sum " + std::to_string(s)});
    }
  }
  if (rep.violations.empty()) rep.irreducibility = detail::irreducibility_window_check(bs);
  return rep;
}

// Exact renormalization: divides every row by its total across the region's
// blocks, so sums become exactly 1 in floating point. Call after validate.
inline BlockSet normalized(const BlockSet& in) {
  BlockSet out = in;
  const int s0 = in.phases();
  for (int r = 0; r < 4; ++r) {
    Region reg = Region(r);
    Vector rowsum = Vector::Zero(s0);
    for (int i1 = -1; i1 <= 1; ++i1)
      for (int i2 = -1; i2 <= 1; ++i2) rowsum += in.block(reg, i1, i2).rowwise().sum();
    for (int i1 = -1; i1 <= 1; ++i1)
      for (int i2 = -1; i2 <= 1; ++i2) {
        Matrix& B = out.block(reg, i1, i2);
        for (int p = 0; p < s0; ++p)
          if (rowsum(p) > 0.0) B.row(p) /= rowsum(p);
      }
  }
  return out;
}

// ---------------------------------------------------------------------------
// one-dimensional Markov-additive kernels obtained by removing one boundary

// Kernel of the chain that keeps coordinate `axis` unbounded (the additive
// part, increment d) and watches the other coordinate as a reflected level
// (shift l). boundary[d+1][l] applies at level 0 (l in {0,1}), interior blocks
// at levels >= 1 (l in {-1,0,1}).
struct MAKernel1D {
  int axis = 1;
  int s0 = 0;
  std::array<std::array<Matrix, 2>, 3> boundary;
  std::array<std::array<Matrix, 3>, 3> interior;
};

inline MAKernel1D build_ma_kernel(const BlockSet& bs, int axis) {
  if (axis != 1 && axis != 2) fail(ErrorCode::InvalidArgument, "axis must be 1 or 2");
  MAKernel1D k;
  k.axis = axis;
  k.s0 = bs.phases();
  Region face = (axis == 1) ? Region::Face1 : Region::Face2;
  for (int d = -1; d <= 1; ++d) {
    for (int l = 0; l <= 1; ++l)
      k.boundary[size_t(d + 1)][size_t(l)] =
          (axis == 1) ? bs.block(face, d, l) : bs.block(face, l, d);
    for (int l = -1; l <= 1; ++l)
      k.interior[size_t(d + 1)][size_t(l + 1)] =
          (axis == 1) ? bs.block(Region::Interior, d, l) : bs.block(Region::Interior, l, d);
  }
  return k;
}

// ---------------------------------------------------------------------------
// mean drifts and the stability trichotomy

enum class Stability { PositiveRecurrent, Transient, Inconclusive };

inline const char* stability_name(Stability s) {
  switch (s) {
    case Stability::PositiveRecurrent: return "positive_recurrent";
    case Stability::Transient: return "transient";
    case Stability::Inconclusive: return "inconclusive";
  }
  return "?";
}

struct DriftReport {
  double a12_1 = 0.0, a12_2 = 0.0;  // interior mean drift vector
  RowVector varpi;                  // stationary phase distribution of the interior kernel
  std::optional<double> a1, a2;     // boundary drifts, defined when the background is ergodic
  Stability stability = Stability::Inconclusive;
};

namespace detail {

// Mean drift of the additive part for the kernel with one reflecting level
// coordinate: stationary distribution of the level QBD in geometric R-matrix
// form, contracted against the per-level additive drift.
inline std::optional<double> boundary_drift(const MAKernel1D& k, double vertical_drift,
                                            double tol0 = 1e-9) {
  if (!(vertical_drift < -tol0)) return std::nullopt;  // background chain not ergodic
  const int m = k.s0;
  Matrix B0 = k.boundary[0][0] + k.boundary[1][0] + k.boundary[2][0];
  Matrix B1 = k.boundary[0][1] + k.boundary[1][1] + k.boundary[2][1];
  Triplet c;
  c.down = k.interior[0][0] + k.interior[1][0] + k.interior[2][0];
  c.stay = k.interior[0][1] + k.interior[1][1] + k.interior[2][1];
  c.up = k.interior[0][2] + k.interior[1][2] + k.interior[2][2];
  Matrix R = solve_R(c);
  Matrix inv = Eigen::PartialPivLU<Matrix>(Matrix::Identity(m, m) - c.stay - R * c.down)
                   .solve(Matrix::Identity(m, m));
  Matrix K = B0 + B1 * inv * c.down;  // chain censored on level 0
  PerronTriple pk = perron(K);
  RowVector pi0 = pk.u / pk.u.sum();
  RowVector pi1 = pi0 * B1 * inv;

  Vector drift_bdry = Vector::Zero(m), drift_int = Vector::Zero(m);
  for (int d = -1; d <= 1; ++d) {
    for (int l = 0; l <= 1; ++l)
      drift_bdry += double(d) * k.boundary[size_t(d + 1)][size_t(l)].rowwise().sum();
    for (int l = -1; l <= 1; ++l)
      drift_int += double(d) * k.interior[size_t(d + 1)][size_t(l + 1)].rowwise().sum();
  }

  double total = pi0.sum();
  double acc = (pi0 * drift_bdry).value();
  RowVector pik = pi1;
  for (int i = 0; i < 200000; ++i) {
    double mass = pik.sum();
    if (mass < 1e-14) break;
    total += mass;
    acc += (pik * drift_int).value();
    pik = pik * R;
  }
  return acc / total;
}

inline int sgn_tol(double x, double tol = 1e-9) { return x > tol ? 1 : (x < -tol ? -1 : 0); }

}  // namespace detail

inline DriftReport mean_drifts(const BlockSet& bs) {
  DriftReport rep;
  const int m = bs.phases();
  Matrix P = bs.gf(Region::Interior, 1.0, 1.0);
  PerronTriple pp = perron(P);
  rep.varpi = pp.u / pp.u.sum();
  Vector d1 = Vector::Zero(m), d2 = Vector::Zero(m);
  for (int i1 = -1; i1 <= 1; ++i1)
    for (int i2 = -1; i2 <= 1; ++i2) {
      Vector rs = bs.block(Region::Interior, i1, i2).rowwise().sum();
      d1 += double(i1) * rs;
      d2 += double(i2) * rs;
    }
  rep.a12_1 = (rep.varpi * d1).value();
  rep.a12_2 = (rep.varpi * d2).value();

  rep.a1 = detail::boundary_drift(build_ma_kernel(bs, 1), rep.a12_2);
  rep.a2 = detail::boundary_drift(build_ma_kernel(bs, 2), rep.a12_1);

  // Stability trichotomy on drift signs. Signs inside the zero tolerance are
  // ambiguous; every case compatible with the ambiguity is evaluated and a
  // verdict is returned only when all of them agree.
  int s1 = detail::sgn_tol(rep.a12_1), s2 = detail::sgn_tol(rep.a12_2);
  auto sign_of = [](const std::optional<double>& v) {
    return v ? detail::sgn_tol(*v) : 2;  // 2 = unavailable
  };
  int sa1 = sign_of(rep.a1), sa2 = sign_of(rep.a2);

  std::vector<Stability> cases;
  if (s1 <= 0 && s2 <= 0) {  // both interior drifts negative
    if (sa1 == -1 && sa2 == -1)
      cases.push_back(Stability::PositiveRecurrent);
    else if (sa1 == 1 || sa2 == 1)
      cases.push_back(Stability::Transient);
    else
      cases.push_back(Stability::Inconclusive);
  }
  if (s1 >= 0 && s2 <= 0) {  // horizontal >= 0, vertical < 0: decided by a1
    cases.push_back(sa1 == -1 ? Stability::PositiveRecurrent
                              : (sa1 == 1 ? Stability::Transient : Stability::Inconclusive));
  }
  if (s2 >= 0 && s1 <= 0) {
    cases.push_back(sa2 == -1 ? Stability::PositiveRecurrent
                              : (sa2 == 1 ? Stability::Transient : Stability::Inconclusive));
  }
  if (s1 >= 0 && s2 >= 0 && (s1 == 1 || s2 == 1)) cases.push_back(Stability::Transient);

  if (cases.empty())
    rep.stability = Stability::Inconclusive;
  else {
    rep.stability = cases.front();
    for (Stability c : cases)
      if (c != rep.stability) {
        rep.stability = Stability::Inconclusive;
        break;
      }
  }
  return rep;
}

}  // namespace qbd2d

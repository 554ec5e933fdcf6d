#pragma once

#include <cmath>

#include "qbd2d/types.hpp"

namespace qbd2d {

// Perron root and eigenvector pair of an entrywise nonnegative matrix.
// u is the left (row) eigenvector, v the right one, normalized so that
// v sums to 1 and u*v = 1. Irreducibility is the caller's responsibility.
struct PerronTriple {
  double rho = 0.0;
  RowVector u;
  Vector v;
  int iterations = 0;
};

// Power iteration on M and M^T simultaneously. A diagonal shift keeps the
// iteration convergent when the matrix may be periodic; the shift moves the
// Perron root by exactly the shift amount and leaves eigenvectors unchanged.
inline PerronTriple perron(const Matrix& M, double tol = 1e-13, int max_iter = 100000) {
  const Eigen::Index m = M.rows();
  if (m != M.cols()) fail(ErrorCode::InvalidArgument, "perron: matrix must be square");
  if ((M.array() < 0.0).any()) fail(ErrorCode::InvalidArgument, "perron: negative entry");

  double scale = M.cwiseAbs().rowwise().sum().maxCoeff();
  if (scale == 0.0) fail(ErrorCode::ZeroMatrix, "perron: zero matrix");

  if (m == 1) {
    PerronTriple t;
    t.rho = M(0, 0);
    t.u = RowVector::Ones(1);
    t.v = Vector::Ones(1);
    return t;
  }

  const double eps = 0.05 * scale;
  Matrix A = M;
  A.diagonal().array() += eps;

  Vector v = Vector::Ones(m) / double(m);
  RowVector u = RowVector::Ones(m) / double(m);
  double rho = 0.0;
  int it = 0;
  for (; it < max_iter; ++it) {
    Vector av = A * v;
    RowVector ua = u * A;
    double sv = av.sum(), su = ua.sum();
    if (sv <= 0.0 || su <= 0.0) fail(ErrorCode::ZeroMatrix, "perron: iteration collapsed");
    v = av / sv;
    u = ua / su;
    double uv = (u * v).value();
    rho = (u * (A * v)).value() / uv;
    double res = (A * v - rho * v).lpNorm<Eigen::Infinity>() +
                 (u * A - rho * u).lpNorm<Eigen::Infinity>();
    if (res <= tol * (rho > scale ? rho : scale)) break;
  }
  if (it >= max_iter) fail(ErrorCode::NotConverged, "perron: iteration cap reached");

  PerronTriple t;
  t.iterations = it;
  t.rho = rho - eps;
  t.v = v / v.sum();
  t.u = u / (u * t.v).value();
  return t;
}

// Spectral radius shortcut.
inline double spectral_radius(const Matrix& M, double tol = 1e-13) {
  return perron(M, tol).rho;
}

}  // namespace qbd2d

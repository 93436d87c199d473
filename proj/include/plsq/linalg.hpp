#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "plsq/matrix.hpp"
#include "plsq/svd.hpp"

namespace plsq {

enum class ProjectorKind { RangeXt, KerX, RangeX, KerXt };

inline Matrix pinv(const SvdFactors& f) {
  const std::size_t n = f.n_rows(), p = f.n_cols();
  Matrix out(p, n);
  for (std::size_t j = 0; j < f.rank; ++j) {
    const double inv_s = 1.0 / f.singular_values[j];
    for (std::size_t a = 0; a < p; ++a) {
      const double va = f.v(a, j) * inv_s;
      if (va == 0.0) continue;
      for (std::size_t b = 0; b < n; ++b) out(a, b) += va * f.u(b, j);
    }
  }
  return out;
}

inline Matrix pinv(const Matrix& m, double tol = 0.0) { return pinv(svd(m, tol)); }

inline Matrix projector(const SvdFactors& f, ProjectorKind kind) {
  const bool onto_v = kind == ProjectorKind::RangeXt || kind == ProjectorKind::KerX;
  const Matrix& basis = onto_v ? f.v : f.u;
  const std::size_t d = basis.rows();
  Matrix proj(d, d);
  for (std::size_t j = 0; j < f.rank; ++j) {
    for (std::size_t a = 0; a < d; ++a) {
      const double ba = basis(a, j);
      if (ba == 0.0) continue;
      for (std::size_t b = 0; b < d; ++b) proj(a, b) += ba * basis(b, j);
    }
  }
  if (kind == ProjectorKind::KerX || kind == ProjectorKind::KerXt) {
    Matrix eye = Matrix::identity(d);
    eye -= proj;
    return eye;
  }
  return proj;
}

inline Matrix projector(const Matrix& m, ProjectorKind kind, double tol = 0.0) {
  return projector(svd(m, tol), kind);
}

// Minimum l2-norm element of argmin ||A theta - b||: A^+ b, assembled from the
// factorization without forming the pseudoinverse.
inline Vector min_norm_solve(const SvdFactors& f, const Vector& b) {
  if (b.size() != f.n_rows())
    throw ValidationError("min_norm_solve: rhs length " + std::to_string(b.size()) +
                          " does not match rows " + std::to_string(f.n_rows()));
  Vector x(f.n_cols(), 0.0);
  for (std::size_t j = 0; j < f.rank; ++j) {
    double ub = 0.0;
    for (std::size_t t = 0; t < f.n_rows(); ++t) ub += f.u(t, j) * b[t];
    const double coef = ub / f.singular_values[j];
    for (std::size_t t = 0; t < f.n_cols(); ++t) x[t] += coef * f.v(t, j);
  }
  return x;
}

inline Vector min_norm_solve(const Matrix& a, const Vector& b, double tol = 0.0) {
  require_finite(b, "min_norm_solve");
  return min_norm_solve(svd(a, tol), b);
}

// Cholesky factor L (lower) of a symmetric positive definite matrix.
// Throws NumericalError when a pivot is not strictly positive.
inline Matrix cholesky(const Matrix& a) {
  if (a.rows() != a.cols()) throw ValidationError("cholesky: matrix not square");
  const std::size_t n = a.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) throw NumericalError("cholesky: matrix not positive definite");
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = a(i, j);
      for (std::size_t k = 0; k < j; ++k) v -= l(i, k) * l(j, k);
      l(i, j) = v / l(j, j);
    }
  }
  return l;
}

inline Vector cholesky_solve(const Matrix& l, Vector b) {
  const std::size_t n = l.rows();
  for (std::size_t i = 0; i < n; ++i) {  // forward: L z = b
    double v = b[i];
    for (std::size_t k = 0; k < i; ++k) v -= l(i, k) * b[k];
    b[i] = v / l(i, i);
  }
  for (std::size_t ii = n; ii-- > 0;) {  // backward: L' x = z
    double v = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) v -= l(k, ii) * b[k];
    b[ii] = v / l(ii, ii);
  }
  return b;
}

// Solve (SPD) A x = b directly.
inline Vector spd_solve(const Matrix& a, const Vector& b) { return cholesky_solve(cholesky(a), b); }

inline bool is_positive_semidefinite(const Matrix& a, double slack) {
  if (a.rows() != a.cols()) return false;
  Matrix shifted = a;
  for (std::size_t i = 0; i < a.rows(); ++i) shifted(i, i) += slack;
  try {
    cholesky(shifted);
    return true;
  } catch (const NumericalError&) {
    return false;
  }
}

}  // namespace plsq

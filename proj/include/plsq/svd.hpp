#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "plsq/matrix.hpp"

namespace plsq {

// Full factorization M = U S V' with U (n×n) and V (p×p) orthogonal and the
// singular values sorted non-increasing. `rank` counts values strictly above
// `tol`, the resolved truncation threshold.
struct SvdFactors {
  Matrix u;
  Vector singular_values;
  Matrix v;
  std::size_t rank = 0;
  double tol = 0.0;

  std::size_t n_rows() const { return u.rows(); }
  std::size_t n_cols() const { return v.rows(); }
};

namespace detail {

// Orthogonalizes the columns of w in place by plane rotations, accumulating
// them into v. Columns of w end up pairwise orthogonal; their norms are the
// singular values. Quadratic convergence once nearly diagonal.
inline void one_sided_jacobi(Matrix& w, Matrix& v, std::size_t n, std::size_t k) {
  constexpr double kOrthTol = 1e-15;
  constexpr int kMaxSweeps = 60;
  int sweep = 0;
  for (; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t i = 0; i + 1 < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        double a = 0.0, b = 0.0, c = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
          const double wi = w(t, i), wj = w(t, j);
          a += wi * wi;
          b += wj * wj;
          c += wi * wj;
        }
        if (a == 0.0 || b == 0.0) continue;
        if (std::abs(c) <= kOrthTol * std::sqrt(a * b)) continue;
        rotated = true;
        const double zeta = (b - a) / (2.0 * c);
        const double t_rot = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double cs = 1.0 / std::sqrt(1.0 + t_rot * t_rot);
        const double sn = cs * t_rot;
        for (std::size_t t = 0; t < n; ++t) {
          const double wi = w(t, i), wj = w(t, j);
          w(t, i) = cs * wi - sn * wj;
          w(t, j) = sn * wi + cs * wj;
        }
        for (std::size_t t = 0; t < k; ++t) {
          const double vi = v(t, i), vj = v(t, j);
          v(t, i) = cs * vi - sn * vj;
          v(t, j) = sn * vi + cs * vj;
        }
      }
    }
    if (!rotated) break;
  }
  if (sweep == kMaxSweeps) {
    throw NumericalError("svd: one-sided Jacobi did not converge for a " + std::to_string(n) +
                         "x" + std::to_string(k) + " matrix");
  }
}

// Fills columns [have, n) of u with an orthonormal completion, drawing
// candidates from the identity basis (twice-reorthogonalized Gram-Schmidt).
inline void complete_basis(Matrix& u, std::size_t have) {
  const std::size_t n = u.rows();
  std::size_t next = have;
  for (std::size_t cand = 0; cand < n && next < n; ++cand) {
    Vector e(n, 0.0);
    e[cand] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < next; ++j) {
        double proj = 0.0;
        for (std::size_t t = 0; t < n; ++t) proj += u(t, j) * e[t];
        for (std::size_t t = 0; t < n; ++t) e[t] -= proj * u(t, j);
      }
    }
    const double nrm = norm2(e);
    if (nrm > 0.5) {
      for (std::size_t t = 0; t < n; ++t) u(t, next) = e[t] / nrm;
      ++next;
    }
  }
}

inline int first_significant_sign(const Matrix& m, std::size_t col) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double x = m(i, col);
    if (std::abs(x) > 1e-12) return x < 0.0 ? -1 : 1;
  }
  return 1;
}

inline void flip_col(Matrix& m, std::size_t col) {
  for (std::size_t i = 0; i < m.rows(); ++i) m(i, col) = -m(i, col);
}

}  // namespace detail

// tol = 0 requests the default threshold s_1 * max(n,p) * 2^-45.
inline SvdFactors svd(const Matrix& m, double tol = 0.0) {
  require_finite(m, "svd");
  if (tol < 0.0) throw ValidationError("svd: tol must be >= 0");
  if (m.rows() == 0 || m.cols() == 0) throw ValidationError("svd: empty matrix");

  const std::size_t n = m.rows(), p = m.cols();
  const bool transposed = n < p;
  Matrix w = transposed ? m.transpose() : m;  // tall orientation: rows >= cols
  const std::size_t big = w.rows(), small = w.cols();

  Matrix vsmall = Matrix::identity(small);
  detail::one_sided_jacobi(w, vsmall, big, small);

  Vector s(small);
  for (std::size_t j = 0; j < small; ++j) {
    double acc = 0.0;
    for (std::size_t t = 0; t < big; ++t) acc += w(t, j) * w(t, j);
    s[j] = std::sqrt(acc);
  }

  std::vector<std::size_t> order(small);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });

  const double s1 = small == 0 ? 0.0 : s[order[0]];
  // Columns below rounding noise are rebuilt by basis completion instead of
  // normalizing numerical residue.
  const double normalizable = s1 * static_cast<double>(std::max(n, p)) * std::ldexp(1.0, -52);

  Matrix ubig(big, big);
  Vector s_sorted(small);
  Matrix vout(small, small);
  std::size_t kept = 0;
  for (std::size_t jj = 0; jj < small; ++jj) {
    const std::size_t j = order[jj];
    s_sorted[jj] = s[j];
    for (std::size_t t = 0; t < small; ++t) vout(t, jj) = vsmall(t, j);
    if (s[j] > normalizable) {
      for (std::size_t t = 0; t < big; ++t) ubig(t, jj) = w(t, j) / s[j];
      kept = jj + 1;
    }
  }
  detail::complete_basis(ubig, kept);

  SvdFactors f;
  f.singular_values = std::move(s_sorted);
  if (transposed) {
    f.u = std::move(vout);
    f.v = std::move(ubig);
  } else {
    f.u = std::move(ubig);
    f.v = std::move(vout);
  }

  // Deterministic orientation: first significant entry of each right singular
  // vector is nonnegative; paired left vectors flip with it.
  const std::size_t paired = std::min(n, p);
  for (std::size_t j = 0; j < f.v.cols(); ++j) {
    if (j < paired && f.singular_values[j] > normalizable) {
      if (detail::first_significant_sign(f.v, j) < 0) {
        detail::flip_col(f.v, j);
        detail::flip_col(f.u, j);
      }
    } else if (detail::first_significant_sign(f.v, j) < 0) {
      detail::flip_col(f.v, j);
    }
  }
  for (std::size_t j = 0; j < f.u.cols(); ++j) {
    const bool tied = j < paired && f.singular_values[j] > normalizable;
    if (!tied && detail::first_significant_sign(f.u, j) < 0) detail::flip_col(f.u, j);
  }

  f.tol = tol > 0.0 ? tol : s1 * static_cast<double>(std::max(n, p)) * std::ldexp(1.0, -45);
  f.rank = 0;
  for (double sv : f.singular_values)
    if (sv > f.tol) ++f.rank;
  return f;
}

}  // namespace plsq

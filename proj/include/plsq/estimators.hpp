#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "plsq/dataset.hpp"
#include "plsq/linalg.hpp"
#include "plsq/matrix.hpp"
#include "plsq/svd.hpp"

namespace plsq {

enum class FitKind { Ls, Ridgeless, Ridge, Lasso, L0Brute };

inline const char* to_string(FitKind k) {
  switch (k) {
    case FitKind::Ls: return "ls";
    case FitKind::Ridgeless: return "ridgeless";
    case FitKind::Ridge: return "ridge";
    case FitKind::Lasso: return "lasso";
    case FitKind::L0Brute: return "l0";
  }
  return "?";
}

// Objective conventions per kind:
//   ls / ridgeless / l0   ||y - X theta||^2 / 2
//   ridge                 ||y - X theta||^2 / 2 + (lambda/2) ||theta||^2
//   lasso                 ||y - X theta||^2 / (2n) + lambda ||theta||_1
// (lasso absorbs the 1/n into its penalty scale; ridge does not.)
struct FitResult {
  FitKind kind = FitKind::Ls;
  Vector theta;
  std::optional<double> intercept;
  std::optional<double> lambda;
  std::optional<std::size_t> l0_radius;
  std::size_t iterations = 0;
  bool converged = true;
  double objective = 0.0;

  std::size_t nonzeros() const {
    std::size_t k = 0;
    for (double t : theta)
      if (t != 0.0) ++k;
    return k;
  }
};

inline double squared_loss(const Dataset& d, const Vector& theta) {
  Vector r = d.y - d.x * theta;
  return 0.5 * norm2_sq(r);
}

// Minimum-norm least squares X^+ y.
inline FitResult fit_ridgeless(const Dataset& d) {
  d.validate("fit_ridgeless");
  FitResult out;
  out.kind = FitKind::Ridgeless;
  out.theta = min_norm_solve(svd(d.x), d.y);
  out.objective = squared_loss(d, out.theta);
  return out;
}

inline Vector ridge_theta(const SvdFactors& f, const Vector& y, double lambda) {
  Vector theta(f.n_cols(), 0.0);
  for (std::size_t j = 0; j < f.rank; ++j) {
    const double s = f.singular_values[j];
    double uy = 0.0;
    for (std::size_t t = 0; t < f.n_rows(); ++t) uy += f.u(t, j) * y[t];
    const double coef = s / (s * s + lambda) * uy;
    for (std::size_t t = 0; t < f.n_cols(); ++t) theta[t] += coef * f.v(t, j);
  }
  return theta;
}

// Solves (X'X + lambda I) theta = X'y through the spectral form, which stays
// accurate down to vanishing lambda on rank-deficient designs.
inline FitResult fit_ridge(const Dataset& d, double lambda) {
  d.validate("fit_ridge");
  if (!(lambda > 0.0)) throw ValidationError("fit_ridge: lambda must be > 0");
  FitResult out;
  out.kind = FitKind::Ridge;
  out.lambda = lambda;
  out.theta = ridge_theta(svd(d.x), d.y, lambda);
  out.objective = squared_loss(d, out.theta) + 0.5 * lambda * norm2_sq(out.theta);
  return out;
}

// Transfer identity (X'X + lambda I)^{-1} X'X theta_rl; an independent route
// to the ridge solution, solved via the normal equations.
inline Vector ridge_from_ridgeless(const Dataset& d, const Vector& ridgeless_theta, double lambda) {
  d.validate("ridge_from_ridgeless");
  if (!(lambda > 0.0)) throw ValidationError("ridge_from_ridgeless: lambda must be > 0");
  if (ridgeless_theta.size() != d.p())
    throw ValidationError("ridge_from_ridgeless: coefficient length mismatch");
  Matrix g = gram(d.x);
  Vector rhs = g * ridgeless_theta;
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) += lambda;
  return spd_solve(g, rhs);
}

inline double soft_threshold(double eta, double lambda) {
  if (eta > lambda) return eta - lambda;
  if (eta < -lambda) return eta + lambda;
  return 0.0;
}

// Smallest penalty with an all-zero lasso solution: max_j |X_j'y / n|.
inline double lambda_max(const Dataset& d) {
  d.validate("lambda_max");
  Vector xty = transpose_times(d.x, d.y);
  double m = 0.0;
  for (double v : xty) m = std::max(m, std::abs(v));
  return m / static_cast<double>(d.n());
}

struct CdOptions {
  std::size_t max_iterations = 10000;  // full coordinate cycles
  double tol = 1e-10;                  // max coordinate change per cycle
  enum class Init { Zeros, Ridge, Warm } init = Init::Zeros;
  double init_ridge_lambda = 1.0;  // when init == Ridge
  Vector warm_start;               // when init == Warm
};

namespace detail {

constexpr double kKktTol = 1e-8;

inline bool lasso_kkt_ok(const Dataset& d, const Vector& theta, const Vector& residual,
                         double lambda) {
  const double n = static_cast<double>(d.n());
  Vector grad = transpose_times(d.x, residual);
  for (std::size_t j = 0; j < theta.size(); ++j) {
    const double g = grad[j] / n;
    if (theta[j] == 0.0) {
      if (std::abs(g) > lambda + kKktTol) return false;
    } else if (std::abs(g - lambda * (theta[j] > 0.0 ? 1.0 : -1.0)) > kKktTol) {
      return false;
    }
  }
  return true;
}

}  // namespace detail

// Cyclical coordinate descent on ||y - X theta||^2/(2n) + lambda ||theta||_1.
// Coordinates are visited in natural order; a cycle that moves no coordinate
// by more than opts.tol triggers a subgradient check, and only both together
// count as convergence. Non-convergence is reported, not thrown.
inline FitResult fit_lasso_cd(const Dataset& d, double lambda, const CdOptions& opts = {}) {
  d.validate("fit_lasso_cd");
  if (!(lambda > 0.0)) throw ValidationError("fit_lasso_cd: lambda must be > 0");
  if (opts.max_iterations < 1) throw ValidationError("fit_lasso_cd: max_iterations must be >= 1");
  if (!(opts.tol > 0.0)) throw ValidationError("fit_lasso_cd: tol must be > 0");
  const std::size_t n = d.n(), p = d.p();
  const double dn = static_cast<double>(n);

  Vector col_sq(p);
  for (std::size_t j = 0; j < p; ++j) {
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += d.x(i, j) * d.x(i, j);
    if (!(ss > 0.0))
      throw ValidationError("fit_lasso_cd: column " + std::to_string(j + 1) + " has zero norm");
    col_sq[j] = ss / dn;
  }

  Vector theta;
  switch (opts.init) {
    case CdOptions::Init::Zeros: theta.assign(p, 0.0); break;
    case CdOptions::Init::Ridge: theta = fit_ridge(d, opts.init_ridge_lambda).theta; break;
    case CdOptions::Init::Warm:
      if (opts.warm_start.size() != p)
        throw ValidationError("fit_lasso_cd: warm start length mismatch");
      theta = opts.warm_start;
      break;
  }

  Vector residual = d.y - d.x * theta;

  FitResult out;
  out.kind = FitKind::Lasso;
  out.lambda = lambda;
  out.converged = false;
  for (std::size_t cycle = 1; cycle <= opts.max_iterations; ++cycle) {
    double max_delta = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      const double old = theta[j];
      double xr = 0.0;
      for (std::size_t i = 0; i < n; ++i) xr += d.x(i, j) * residual[i];
      const double eta = xr * inv_n + col_sq[j] * old;
      const double next = soft_threshold(eta, lambda) / col_sq[j];
      const double delta = next - old;
      if (delta != 0.0) {
        for (std::size_t i = 0; i < n; ++i) residual[i] -= d.x(i, j) * delta;
        theta[j] = next;
      }
      max_delta = std::max(max_delta, std::abs(delta));
    }
    out.iterations = cycle;
    if (max_delta < opts.tol && detail::lasso_kkt_ok(d, theta, residual, lambda)) {
      out.converged = true;
      break;
    }
  }

  out.theta = std::move(theta);
  out.objective = 0.5 * inv_n * norm2_sq(residual) + lambda * norm1(out.theta);
  return out;
}

struct LambdaPath {
  Vector grid;                  // strictly decreasing, grid[0] = lambda_max
  std::vector<FitResult> fits;  // one per grid point, warm-started
  double lambda_max = 0.0;
};

inline LambdaPath lasso_path(const Dataset& d, std::size_t n_lambda, double ratio,
                             const CdOptions& opts = {}) {
  if (n_lambda < 2) throw ValidationError("lasso_path: n_lambda must be >= 2");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ValidationError("lasso_path: ratio must be in (0,1)");
  const double lmax = plsq::lambda_max(d);
  if (!(lmax > 0.0))
    throw ValidationError("lasso_path: lambda_max is zero (response orthogonal to all columns)");

  LambdaPath path;
  path.lambda_max = lmax;
  path.grid.resize(n_lambda);
  for (std::size_t k = 0; k < n_lambda; ++k)
    path.grid[k] = lmax * std::pow(ratio, static_cast<double>(k) / static_cast<double>(n_lambda - 1));

  CdOptions step = opts;
  for (std::size_t k = 0; k < n_lambda; ++k) {
    path.fits.push_back(fit_lasso_cd(d, path.grid[k], step));
    step.init = CdOptions::Init::Warm;
    step.warm_start = path.fits.back().theta;
  }
  return path;
}

// Exhaustive best-subset search over supports of size <= radius; each support
// is solved by minimum-norm least squares. Equal objectives (within rounding)
// resolve to the lexicographically smallest support.
inline FitResult fit_l0_brute(const Dataset& d, std::size_t radius) {
  d.validate("fit_l0_brute");
  const std::size_t p = d.p();
  if (p > 15) throw ValidationError("fit_l0_brute: p > 15 not supported (exhaustive search)");
  if (radius > p) throw ValidationError("fit_l0_brute: radius exceeds column count");

  FitResult best;
  best.kind = FitKind::L0Brute;
  best.l0_radius = radius;
  best.theta.assign(p, 0.0);
  best.objective = 0.5 * norm2_sq(d.y);
  std::vector<std::size_t> best_support;

  const std::uint32_t n_masks = 1u << p;
  for (std::uint32_t mask = 1; mask < n_masks; ++mask) {
    const std::size_t k = static_cast<std::size_t>(__builtin_popcount(mask));
    if (k > radius) continue;
    std::vector<std::size_t> support;
    support.reserve(k);
    for (std::size_t j = 0; j < p; ++j)
      if (mask & (1u << j)) support.push_back(j);

    Matrix xs(d.n(), k);
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t i = 0; i < d.n(); ++i) xs(i, c) = d.x(i, support[c]);
    Vector theta_s = min_norm_solve(xs, d.y);
    const double obj = 0.5 * norm2_sq(d.y - xs * theta_s);

    const double tie = 1e-12 * (1.0 + std::abs(best.objective));
    const bool better = obj < best.objective - tie;
    const bool tied = std::abs(obj - best.objective) <= tie;
    if (better || (tied && std::lexicographical_compare(support.begin(), support.end(),
                                                        best_support.begin(), best_support.end()))) {
      best.objective = obj;
      best_support = support;
      best.theta.assign(p, 0.0);
      for (std::size_t c = 0; c < k; ++c) best.theta[support[c]] = theta_s[c];
    }
  }
  return best;
}

// Recursive least squares state: inv = (X'X)^{-1} of the rows seen so far.
struct OnlineLsState {
  Matrix inv;
  Vector theta;
};

// Requires the initial block to have full column rank.
inline OnlineLsState online_ls_init(const Dataset& d) {
  d.validate("online_ls_init");
  Matrix g = gram(d.x);
  Matrix l;
  try {
    l = cholesky(g);
  } catch (const NumericalError&) {
    throw NumericalError("online_ls_init: X'X is singular (need full column rank)");
  }
  const std::size_t p = d.p();
  OnlineLsState s;
  s.inv = Matrix(p, p);
  for (std::size_t j = 0; j < p; ++j) {
    Vector e(p, 0.0);
    e[j] = 1.0;
    s.inv.set_col(j, cholesky_solve(l, e));
  }
  s.theta = cholesky_solve(l, transpose_times(d.x, d.y));
  return s;
}

// Sherman-Morrison rank-one update for one appended observation.
inline OnlineLsState online_ls_update(const OnlineLsState& state, const Vector& x_new,
                                      double y_new) {
  if (x_new.size() != state.theta.size())
    throw ValidationError("online_ls_update: predictor length mismatch");
  require_finite(x_new, "online_ls_update");
  const Vector eta = state.inv * x_new;
  const double a = dot(x_new, eta);
  if (1.0 + a <= 1e-12) throw NumericalError("online_ls_update: update denominator vanishes");
  const double gain = 1.0 / (1.0 + a);
  const double innovation = y_new - dot(x_new, state.theta);

  OnlineLsState next = state;
  for (std::size_t i = 0; i < eta.size(); ++i) {
    next.theta[i] += gain * innovation * eta[i];
    for (std::size_t j = 0; j < eta.size(); ++j) next.inv(i, j) -= gain * eta[i] * eta[j];
  }
  return next;
}

// Standardize, fit on the centered/rescaled data, then map coefficients back
// to the original column scale and attach the intercept. Solver diagnostics
// (objective, iterations) refer to the standardized problem.
template <typename FitFn>
FitResult fit_standardized(const Dataset& d, FitFn&& fit) {
  auto [std_data, transform] = standardize(d);
  FitResult res = fit(std_data);
  for (std::size_t j = 0; j < res.theta.size(); ++j) res.theta[j] /= transform.scales[j];
  res.intercept = recover_intercept(res.theta, transform);
  return res;
}

}  // namespace plsq

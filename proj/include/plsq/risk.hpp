#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "plsq/estimators.hpp"
#include "plsq/linalg.hpp"
#include "plsq/matrix.hpp"
#include "plsq/svd.hpp"

namespace plsq {

// Bias / variance / MSE / MPR for one estimator configuration. Theoretical
// reports satisfy mse = bias_norm_sq + trace_var exactly as assembled;
// empirical reports carry Monte Carlo standard errors.
struct RiskReport {
  FitKind kind = FitKind::Ls;
  double bias_norm_sq = 0.0;
  double trace_var = 0.0;
  double mse = 0.0;
  double mpr = 0.0;

  enum class Source { Theoretical, Empirical } source = Source::Theoretical;
  std::size_t replications = 0;
  double mse_se = 0.0;
  double mpr_se = 0.0;
};

// Population quantities the closed forms are evaluated against.
struct Estimand {
  Vector theta0_rl;
  double sigma = 1.0;     // error standard deviation (Var[eps] = sigma^2 I)
  Matrix second_moment;   // E[x x'], symmetric PSD
  std::size_t rank0 = 0;  // Rank(E[x x'])

  void validate() const {
    if (!(sigma > 0.0)) throw ValidationError("estimand: sigma must be > 0");
    const std::size_t p = second_moment.rows();
    if (second_moment.cols() != p || theta0_rl.size() != p)
      throw ValidationError("estimand: dimensions disagree");
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = i + 1; j < p; ++j)
        if (std::abs(second_moment(i, j) - second_moment(j, i)) > 1e-10)
          throw ValidationError("estimand: second moment not symmetric");
    double scale = 0.0;
    for (std::size_t i = 0; i < p; ++i) scale = std::max(scale, std::abs(second_moment(i, i)));
    if (!is_positive_semidefinite(second_moment, 1e-9 * (1.0 + scale)))
      throw ValidationError("estimand: second moment not positive semidefinite");
    const SvdFactors f = svd(second_moment);
    Vector resid = theta0_rl;
    for (std::size_t j = 0; j < f.rank; ++j) {
      double c = 0.0;
      for (std::size_t t = 0; t < resid.size(); ++t) c += f.v(t, j) * theta0_rl[t];
      for (std::size_t t = 0; t < resid.size(); ++t) resid[t] -= c * f.v(t, j);
    }
    if (norm2(resid) > 1e-9 * (1.0 + norm2(theta0_rl)))
      throw ValidationError("estimand: theta0_rl not in the range of the second moment");
  }
};

inline std::pair<double, double> empirical_risks(const Vector& theta_hat, const Vector& theta0,
                                                 const Matrix& x) {
  if (theta_hat.size() != theta0.size() || x.cols() != theta0.size())
    throw ValidationError("empirical_risks: dimensions disagree");
  Vector diff = theta_hat - theta0;
  const double est = norm2_sq(diff);
  const double pred = norm2_sq(x * diff) / static_cast<double>(x.rows());
  return {est, pred};
}

// E[xx']^+ E[xy]; flags the case where the cross moment leaves the range of
// the second moment, in which no coefficient reproduces the moments.
struct RidgelessEstimand {
  Vector theta;
  bool empty_solution_set = false;
};

inline RidgelessEstimand ridgeless_estimand(const Matrix& second_moment,
                                            const Vector& cross_moment) {
  const std::size_t p = second_moment.rows();
  if (second_moment.cols() != p || cross_moment.size() != p)
    throw ValidationError("ridgeless_estimand: dimensions disagree");
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i + 1; j < p; ++j)
      if (std::abs(second_moment(i, j) - second_moment(j, i)) > 1e-10)
        throw ValidationError("ridgeless_estimand: second moment not symmetric");

  const SvdFactors f = svd(second_moment);
  RidgelessEstimand out;
  out.theta = min_norm_solve(f, cross_moment);
  Vector proj(p, 0.0);
  for (std::size_t j = 0; j < f.rank; ++j) {
    double c = 0.0;
    for (std::size_t t = 0; t < p; ++t) c += f.u(t, j) * cross_moment[t];
    for (std::size_t t = 0; t < p; ++t) proj[t] += c * f.u(t, j);
  }
  out.empty_solution_set = norm2(cross_moment - proj) > 1e-8 * norm2(cross_moment);
  return out;
}

// Exact moments of the linear estimator theta_hat = A y under y = X theta0 + eps,
// Var[eps] = sigma^2 I:
//   bias = A X theta0 - theta0         trace_var = sigma^2 tr(A A')
//   mpr  = ||X bias||^2/n + sigma^2 tr(X'X A A')/n
inline RiskReport linear_estimator_moments(const Matrix& a, const Matrix& x, const Vector& theta0,
                                           double sigma, FitKind kind = FitKind::Ls) {
  if (a.rows() != x.cols() || a.cols() != x.rows() || theta0.size() != x.cols())
    throw ValidationError("linear_estimator_moments: dimensions disagree");
  if (!(sigma > 0.0)) throw ValidationError("linear_estimator_moments: sigma must be > 0");
  const double n = static_cast<double>(x.rows());

  Vector bias = a * (x * theta0) - theta0;
  double a_frob_sq = 0.0;
  for (double v : a.data()) a_frob_sq += v * v;

  const Matrix xa = x * a;  // tr(X'X AA') = ||XA||_F^2
  double xa_frob_sq = 0.0;
  for (double v : xa.data()) xa_frob_sq += v * v;

  RiskReport r;
  r.kind = kind;
  r.source = RiskReport::Source::Theoretical;
  r.bias_norm_sq = norm2_sq(bias);
  r.trace_var = sigma * sigma * a_frob_sq;
  r.mse = r.bias_norm_sq + r.trace_var;
  r.mpr = norm2_sq(x * bias) / n + sigma * sigma * xa_frob_sq / n;
  return r;
}

enum class RiskEstimator { Lse, Ridgeless, Ridge };

// Closed-form finite-sample risks. Eigenvalues of X'X/n are s_j^2/n from the
// SVD; no separate eigensolver. The lambda for Ridge uses the unscaled ridge
// convention (the penalty added to ||y-X theta||^2/2).
inline RiskReport theoretical_risk(RiskEstimator kind, const Matrix& x, const Estimand& est,
                                   double lambda = 0.0) {
  est.validate();
  if (est.theta0_rl.size() != x.cols())
    throw ValidationError("theoretical_risk: estimand dimension does not match design");
  const SvdFactors f = svd(x);
  const double n = static_cast<double>(x.rows());
  const std::size_t p = x.cols();
  const double sig_sq = est.sigma * est.sigma;

  RiskReport r;
  r.source = RiskReport::Source::Theoretical;
  switch (kind) {
    case RiskEstimator::Lse: {
      if (f.rank != p) throw ValidationError("theoretical_risk: LSE requires Rank(X) = p");
      r.kind = FitKind::Ls;
      double inv_sum = 0.0;
      for (std::size_t j = 0; j < p; ++j) {
        const double lam_j = f.singular_values[j] * f.singular_values[j] / n;
        inv_sum += 1.0 / lam_j;
      }
      r.trace_var = sig_sq / n * inv_sum;
      r.bias_norm_sq = 0.0;
      r.mse = r.trace_var;
      r.mpr = static_cast<double>(p) * sig_sq / n;
      break;
    }
    case RiskEstimator::Ridgeless: {
      r.kind = FitKind::Ridgeless;
      double inv_sum = 0.0;
      for (std::size_t j = 0; j < f.rank; ++j) {
        const double lam_j = f.singular_values[j] * f.singular_values[j] / n;
        inv_sum += 1.0 / lam_j;
      }
      Vector kernel_part = est.theta0_rl;
      for (std::size_t j = 0; j < f.rank; ++j) {
        double c = 0.0;
        for (std::size_t t = 0; t < p; ++t) c += f.v(t, j) * est.theta0_rl[t];
        for (std::size_t t = 0; t < p; ++t) kernel_part[t] -= c * f.v(t, j);
      }
      r.trace_var = sig_sq / n * inv_sum;
      r.bias_norm_sq = norm2_sq(kernel_part);
      r.mse = r.trace_var + r.bias_norm_sq;
      r.mpr = static_cast<double>(f.rank) * sig_sq / n;
      break;
    }
    case RiskEstimator::Ridge: {
      if (!(lambda > 0.0)) throw ValidationError("theoretical_risk: ridge requires lambda > 0");
      r.kind = FitKind::Ridge;
      double var_sum = 0.0, mpr_sum = 0.0;
      for (std::size_t j = 0; j < f.rank; ++j) {
        const double lam_j = f.singular_values[j] * f.singular_values[j] / n;
        const double denom = (lam_j + lambda / n) * (lam_j + lambda / n);
        var_sum += lam_j / denom;
        mpr_sum += lam_j * lam_j / denom;
      }
      // (I - Q(lambda)) theta0 with Q = V diag(s^2/(s^2+lambda)) V'.
      Vector biased = est.theta0_rl;
      for (std::size_t j = 0; j < f.rank; ++j) {
        const double s = f.singular_values[j];
        double c = 0.0;
        for (std::size_t t = 0; t < p; ++t) c += f.v(t, j) * est.theta0_rl[t];
        const double shrink = s * s / (s * s + lambda);
        for (std::size_t t = 0; t < p; ++t) biased[t] -= shrink * c * f.v(t, j);
      }
      r.trace_var = sig_sq / n * var_sum;
      r.bias_norm_sq = norm2_sq(biased);
      r.mse = r.trace_var + r.bias_norm_sq;
      r.mpr = sig_sq / n * mpr_sum;
      break;
    }
  }
  return r;
}

// Grid scan for a penalty whose theoretical ridge MSE beats ridgeless.
inline std::optional<double> find_lambda_star(const Matrix& x, const Estimand& est,
                                              const Vector& grid) {
  if (grid.empty()) throw ValidationError("find_lambda_star: empty grid");
  for (double l : grid)
    if (!(l > 0.0)) throw ValidationError("find_lambda_star: grid values must be > 0");
  const double ridgeless_mse = theoretical_risk(RiskEstimator::Ridgeless, x, est).mse;
  double best_lambda = grid.front();
  double best_mse = theoretical_risk(RiskEstimator::Ridge, x, est, grid.front()).mse;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double mse = theoretical_risk(RiskEstimator::Ridge, x, est, grid[k]).mse;
    if (mse < best_mse) {
      best_mse = mse;
      best_lambda = grid[k];
    }
  }
  if (best_mse < ridgeless_mse) return best_lambda;
  return std::nullopt;
}

}  // namespace plsq

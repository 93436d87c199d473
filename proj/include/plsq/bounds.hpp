#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "plsq/dataset.hpp"
#include "plsq/estimators.hpp"
#include "plsq/matrix.hpp"
#include "plsq/rng.hpp"

namespace plsq {

// The cone C_alpha(S) = { v : ||v_{S^c}||_1 <= alpha ||v_S||_1 }.
struct ConeSpec {
  std::vector<std::size_t> support;  // zero-based, distinct
  double alpha = 3.0;

  void validate(std::size_t p) const {
    if (alpha < 1.0) throw ValidationError("cone: alpha must be >= 1");
    std::vector<bool> seen(p, false);
    for (std::size_t j : support) {
      if (j >= p) throw ValidationError("cone: support index out of range");
      if (seen[j]) throw ValidationError("cone: duplicate support index");
      seen[j] = true;
    }
  }
};

// Penalty level that dominates the empirical process: 2 ||X'eps / n||_inf.
inline double lambda_oracle(const Matrix& x, const Vector& eps) {
  if (eps.size() != x.rows()) throw ValidationError("lambda_oracle: eps length mismatch");
  Vector xte = transpose_times(x, eps);
  return 2.0 * norm_inf(xte) / static_cast<double>(x.rows());
}

inline bool cone_membership(const Vector& v, const ConeSpec& cone) {
  cone.validate(v.size());
  std::vector<bool> in_s(v.size(), false);
  for (std::size_t j : cone.support) in_s[j] = true;
  double on = 0.0, off = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) (in_s[j] ? on : off) += std::abs(v[j]);
  return off <= cone.alpha * on + 1e-12;
}

namespace detail {

inline double cone_rayleigh(const Matrix& x, const Vector& eta) {
  return norm2_sq(x * eta) / (static_cast<double>(x.rows()) * norm2_sq(eta));
}

// Rescales eta_{S^c} onto the cone when the constraint is violated.
inline bool project_to_cone(Vector& eta, const std::vector<bool>& in_s, double alpha) {
  double on = 0.0, off = 0.0;
  for (std::size_t j = 0; j < eta.size(); ++j) (in_s[j] ? on : off) += std::abs(eta[j]);
  if (on == 0.0) return false;
  if (off > alpha * on) {
    const double shrink = alpha * on / off;
    for (std::size_t j = 0; j < eta.size(); ++j)
      if (!in_s[j]) eta[j] *= shrink;
  }
  return true;
}

}  // namespace detail

// Sampled UPPER bound on the cone-restricted minimum of ||X eta||^2 / (n ||eta||^2).
// Draws eta_S Gaussian, puts a uniform fraction of the allowed l1 budget on S^c,
// then polishes the best candidate by projected coordinate perturbation.
// An upper bound only: the true restricted eigenvalue may be smaller.
inline double re_constant_bound(const Matrix& x, const ConeSpec& cone, std::size_t n_samples,
                                std::size_t refine_steps, std::uint64_t seed) {
  const std::size_t p = x.cols();
  cone.validate(p);
  if (cone.support.empty())
    throw ValidationError("re_constant_bound: empty support makes the cone degenerate ({0})");
  if (n_samples < 1) throw ValidationError("re_constant_bound: n_samples must be >= 1");
  require_finite(x, "re_constant_bound");

  std::vector<bool> in_s(p, false);
  for (std::size_t j : cone.support) in_s[j] = true;

  Rng rng(seed);
  double best = std::numeric_limits<double>::infinity();
  Vector best_eta;
  for (std::size_t k = 0; k < n_samples; ++k) {
    Vector eta(p, 0.0);
    double on_l1 = 0.0;
    for (std::size_t j : cone.support) {
      eta[j] = rng.normal();
      on_l1 += std::abs(eta[j]);
    }
    if (on_l1 == 0.0) continue;
    const double budget = rng.uniform01() * cone.alpha * on_l1;
    double off_l1 = 0.0;
    for (std::size_t j = 0; j < p; ++j)
      if (!in_s[j]) {
        eta[j] = rng.normal();
        off_l1 += std::abs(eta[j]);
      }
    if (off_l1 > 0.0) {
      const double scale = budget / off_l1;
      for (std::size_t j = 0; j < p; ++j)
        if (!in_s[j]) eta[j] *= scale;
    }
    const double q = detail::cone_rayleigh(x, eta);
    if (q < best) {
      best = q;
      best_eta = eta;
    }
  }
  if (best_eta.empty()) throw NumericalError("re_constant_bound: sampling produced no candidate");

  // Greedy polish; step halves after each full coordinate pass.
  const double nrm = norm2(best_eta);
  for (double& v : best_eta) v /= nrm;
  double step = 0.25;
  for (std::size_t pass = 0; pass < refine_steps; ++pass) {
    for (std::size_t j = 0; j < p; ++j) {
      for (double sgn : {1.0, -1.0}) {
        Vector cand = best_eta;
        cand[j] += sgn * step;
        if (!detail::project_to_cone(cand, in_s, cone.alpha)) continue;
        if (norm2_sq(cand) == 0.0) continue;
        const double q = detail::cone_rayleigh(x, cand);
        if (q < best) {
          best = q;
          const double cn = norm2(cand);
          for (double& v : cand) v /= cn;
          best_eta = cand;
        }
      }
    }
    step *= 0.5;
  }
  return best;
}

enum class KappaSource { Exact, Sampled };

inline const char* to_string(KappaSource s) {
  return s == KappaSource::Exact ? "exact" : "sampled";
}

enum class BoundMode { Deterministic, SubGaussian };

struct BoundInputs {
  double lambda = 0.0;  // ignored in SubGaussian mode, where it is derived
  std::size_t s0 = 0;
  double kappa = 0.0;
  double theta0_l1 = 0.0;
  double column_bound = 0.0;  // C with max_j ||X_j||_2 / sqrt(n) <= C
  double sigma = 0.0;         // sub-Gaussian variance proxy scale
  double delta = 0.0;
  std::size_t p = 0;
  std::size_t n = 0;
  KappaSource kappa_source = KappaSource::Sampled;

  void validate(BoundMode mode) const {
    if (!(kappa > 0.0)) throw ValidationError("bounds: kappa must be > 0");
    if (theta0_l1 < 0.0) throw ValidationError("bounds: ||theta0||_1 must be >= 0");
    if (n == 0 || p == 0) throw ValidationError("bounds: n and p must be positive");
    if (mode == BoundMode::Deterministic) {
      if (!(lambda > 0.0)) throw ValidationError("bounds: lambda must be > 0");
    } else {
      if (!(column_bound > 0.0)) throw ValidationError("bounds: column bound C must be > 0");
      if (!(sigma > 0.0)) throw ValidationError("bounds: sigma must be > 0");
      if (!(delta > 0.0)) throw ValidationError("bounds: delta must be > 0");
    }
  }
};

struct BoundObserved {
  double est_risk = 0.0;
  double pred_risk = 0.0;
  bool cone_ok = false;
  bool est_satisfied = false;
  bool pr_satisfied = false;
  bool lemma_pr_satisfied = false;
};

struct BoundReport {
  double lambda = 0.0;
  double lemma_pr_bound = 0.0;      // 12 lambda ||theta0||_1
  double est_bound = 0.0;           // 9 s0 lambda^2 / kappa^2 (or fast-rate form)
  double pr_bound = 0.0;            // 9 s0 lambda^2 / kappa  (or fast-rate form)
  double probability_floor = 1.0;   // 1 - 2 exp(-n delta^2 / 2) in SubGaussian mode
  double kappa = 0.0;
  KappaSource kappa_source = KappaSource::Sampled;
  std::optional<BoundObserved> observed;
};

inline BoundReport lasso_bound_report(const BoundInputs& in, BoundMode mode) {
  in.validate(mode);
  BoundReport r;
  r.kappa = in.kappa;
  r.kappa_source = in.kappa_source;
  const double s0 = static_cast<double>(in.s0);
  if (mode == BoundMode::Deterministic) {
    r.lambda = in.lambda;
    r.lemma_pr_bound = 12.0 * r.lambda * in.theta0_l1;
    r.est_bound = 9.0 * s0 * r.lambda * r.lambda / (in.kappa * in.kappa);
    r.pr_bound = 9.0 * s0 * r.lambda * r.lambda / in.kappa;
    r.probability_floor = 1.0;
  } else {
    const double n = static_cast<double>(in.n);
    const double rate = std::sqrt(2.0 * std::log(static_cast<double>(in.p)) / n) + in.delta;
    const double rate_sq = 2.0 * std::log(static_cast<double>(in.p)) / n + in.delta * in.delta;
    const double c = in.column_bound;
    r.lambda = 2.0 * c * in.sigma * rate;
    r.lemma_pr_bound = 24.0 * c * in.theta0_l1 * in.sigma * rate;
    r.est_bound = 72.0 * c * c * in.sigma * in.sigma * s0 / (in.kappa * in.kappa) * rate_sq;
    r.pr_bound = 72.0 * c * c * in.sigma * in.sigma * s0 / in.kappa * rate_sq;
    r.probability_floor = 1.0 - 2.0 * std::exp(-n * in.delta * in.delta / 2.0);
  }
  return r;
}

struct LemmaCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
};

struct LemmaAuditRecord {
  double lambda = 0.0;
  double oracle = 0.0;
  std::vector<LemmaCheck> checks;  // five deterministic consequences
  bool all_pass = false;
};

// Audits the deterministic consequences of a converged lasso fit at
// lambda >= 2||X'eps/n||_inf > 0 on data generated as y = X theta0 + eps.
inline LemmaAuditRecord lemma_audit(const Dataset& d, const FitResult& fit, const Vector& theta0,
                                    const Vector& eps) {
  d.validate("lemma_audit");
  if (fit.kind != FitKind::Lasso || !fit.lambda)
    throw ValidationError("lemma_audit: fit is not a lasso fit");
  if (!fit.converged) throw ValidationError("lemma_audit: fit did not converge");
  if (theta0.size() != d.p()) throw ValidationError("lemma_audit: theta0 length mismatch");

  const double oracle = lambda_oracle(d.x, eps);
  if (!(oracle > 0.0))
    throw ValidationError("lemma_audit: lambda oracle is zero (eps orthogonal to all columns)");
  const double lambda = *fit.lambda;
  if (lambda < oracle)
    throw ValidationError("lemma_audit: lambda below the oracle level; audit not applicable");

  Vector model = d.x * theta0 + eps;
  double mismatch = 0.0;
  for (std::size_t i = 0; i < d.n(); ++i) mismatch = std::max(mismatch, std::abs(model[i] - d.y[i]));
  if (mismatch > 1e-10 * (1.0 + norm_inf(d.y)))
    throw ValidationError("lemma_audit: y != X theta0 + eps for the supplied triple");

  const double n = static_cast<double>(d.n());
  Vector eta = fit.theta - theta0;
  std::vector<std::size_t> supp;
  for (std::size_t j = 0; j < theta0.size(); ++j)
    if (theta0[j] != 0.0) supp.push_back(j);
  const double s0 = static_cast<double>(supp.size());
  const double theta0_l1 = norm1(theta0);
  const double x_eta_sq_n = norm2_sq(d.x * eta) / n;

  LemmaAuditRecord rec;
  rec.lambda = lambda;
  rec.oracle = oracle;
  auto push = [&rec](std::string name, double lhs, double rhs) {
    const bool pass = lhs <= rhs + 1e-12 * (1.0 + std::abs(rhs));
    rec.checks.push_back({std::move(name), lhs, rhs, pass});
  };
  push("predictive_risk", x_eta_sq_n, 12.0 * lambda * theta0_l1);
  push("theta_l1", norm1(fit.theta), 3.0 * theta0_l1);
  push("eta_l1", norm1(eta), 4.0 * theta0_l1);
  ConeSpec cone{supp, 3.0};
  rec.checks.push_back({"cone_membership", 0.0, 0.0, cone_membership(eta, cone)});
  push("pr_vs_estimation", x_eta_sq_n, 3.0 * std::sqrt(s0) * lambda * norm2(eta));

  rec.all_pass = std::all_of(rec.checks.begin(), rec.checks.end(),
                             [](const LemmaCheck& c) { return c.pass; });
  return rec;
}

}  // namespace plsq

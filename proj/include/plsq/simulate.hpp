#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "plsq/bounds.hpp"
#include "plsq/dataset.hpp"
#include "plsq/estimators.hpp"
#include "plsq/matrix.hpp"
#include "plsq/risk.hpp"
#include "plsq/rng.hpp"
#include "plsq/svd.hpp"

namespace plsq {

// Sub-Gaussian error families. `variance()` is the true second moment used by
// the closed-form risk formulas; `proxy_sigma()` is the variance-proxy scale
// used by the concentration bounds (conservative for Uniform, by boundedness).
struct ErrorSpec {
  enum class Family { Gaussian, SymmetricBernoulli, Uniform } family = Family::Gaussian;
  double scale = 1.0;  // sigma | +-scale | half-width

  double variance() const {
    switch (family) {
      case Family::Gaussian: return scale * scale;
      case Family::SymmetricBernoulli: return scale * scale;
      case Family::Uniform: return scale * scale / 3.0;
    }
    return 0.0;
  }

  double proxy_sigma() const { return scale; }

  double sample(Rng& rng) const {
    switch (family) {
      case Family::Gaussian: return scale * rng.normal();
      case Family::SymmetricBernoulli: return scale * rng.rademacher();
      case Family::Uniform: return rng.uniform(-scale, scale);
    }
    return 0.0;
  }
};

struct DesignSpec {
  enum class Kind { Fixed, RandomGaussian, RandomCollinear } kind = Kind::Fixed;
  Matrix fixed;      // Fixed: reused across replications
  Vector mean;       // RandomGaussian
  Matrix covariance; // RandomGaussian: rows drawn N(mean, covariance)
  Matrix loading;    // RandomCollinear: x = loading z with z ~ N(0, I_k)

  std::size_t cols() const {
    switch (kind) {
      case Kind::Fixed: return fixed.cols();
      case Kind::RandomGaussian: return covariance.rows();
      case Kind::RandomCollinear: return loading.rows();
    }
    return 0;
  }
};

struct DgpSpec {
  DesignSpec design;
  Vector theta0;
  ErrorSpec error;
  std::size_t n = 0;
  std::uint64_t seed = 0;

  void validate() const {
    const std::size_t p = design.cols();
    if (p == 0 || n == 0) throw ValidationError("dgp: empty design");
    if (theta0.size() != p) throw ValidationError("dgp: theta0 length does not match design");
    if (!(error.scale > 0.0) && error.scale != 0.0)
      throw ValidationError("dgp: error scale must be >= 0");
    if (design.kind == DesignSpec::Kind::Fixed) {
      require_finite(design.fixed, "dgp");
      if (design.fixed.rows() != n) throw ValidationError("dgp: fixed design row count != n");
    } else if (design.kind == DesignSpec::Kind::RandomGaussian) {
      const Matrix& c = design.covariance;
      if (c.rows() != c.cols() || design.mean.size() != c.rows())
        throw ValidationError("dgp: covariance/mean dimensions disagree");
      for (std::size_t i = 0; i < c.rows(); ++i)
        for (std::size_t j = i + 1; j < c.cols(); ++j)
          if (std::abs(c(i, j) - c(j, i)) > 1e-10)
            throw ValidationError("dgp: covariance not symmetric");
      double scale = 0.0;
      for (std::size_t i = 0; i < c.rows(); ++i) scale = std::max(scale, std::abs(c(i, i)));
      if (!is_positive_semidefinite(c, 1e-9 * (1.0 + scale)))
        throw ValidationError("dgp: covariance not positive semidefinite");
    } else {
      if (design.loading.rows() == 0 || design.loading.cols() == 0)
        throw ValidationError("dgp: empty loading matrix");
    }
  }

  // E[x x'] implied by the design (X'X/n for a fixed design).
  Matrix second_moment() const {
    switch (design.kind) {
      case DesignSpec::Kind::Fixed: {
        Matrix m = gram(design.fixed);
        m *= 1.0 / static_cast<double>(n);
        return m;
      }
      case DesignSpec::Kind::RandomGaussian: {
        Matrix m = design.covariance;
        for (std::size_t i = 0; i < m.rows(); ++i)
          for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) += design.mean[i] * design.mean[j];
        return m;
      }
      case DesignSpec::Kind::RandomCollinear: {
        return design.loading * design.loading.transpose();
      }
    }
    return {};
  }

  // The identified coefficient: E[xx']^+ E[xy] = P_{Range(E[xx'])} theta0.
  Vector theta0_rl() const {
    Matrix m = second_moment();
    return ridgeless_estimand(m, m * theta0).theta;
  }
};

struct Replicate {
  Dataset data;
  Vector eps;
};

// Deterministic per (spec.seed, replication); fixed designs reuse X while
// random designs redraw rows i.i.d.
inline Replicate sample_dgp(const DgpSpec& spec, std::size_t replication) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, replication));
  const std::size_t p = spec.design.cols();

  Replicate rep;
  switch (spec.design.kind) {
    case DesignSpec::Kind::Fixed:
      rep.data.x = spec.design.fixed;
      break;
    case DesignSpec::Kind::RandomGaussian: {
      const SvdFactors f = svd(spec.design.covariance);
      Matrix factor(p, p);  // U sqrt(S): factor factor' = covariance
      for (std::size_t j = 0; j < f.rank; ++j) {
        const double root = std::sqrt(f.singular_values[j]);
        for (std::size_t i = 0; i < p; ++i) factor(i, j) = f.u(i, j) * root;
      }
      rep.data.x = Matrix(spec.n, p);
      Vector z(p);
      for (std::size_t i = 0; i < spec.n; ++i) {
        for (std::size_t k = 0; k < p; ++k) z[k] = rng.normal();
        for (std::size_t j = 0; j < p; ++j) {
          double acc = spec.design.mean[j];
          for (std::size_t k = 0; k < p; ++k) acc += factor(j, k) * z[k];
          rep.data.x(i, j) = acc;
        }
      }
      break;
    }
    case DesignSpec::Kind::RandomCollinear: {
      const Matrix& l = spec.design.loading;
      const std::size_t k_dim = l.cols();
      rep.data.x = Matrix(spec.n, p);
      Vector z(k_dim);
      for (std::size_t i = 0; i < spec.n; ++i) {
        for (std::size_t k = 0; k < k_dim; ++k) z[k] = rng.normal();
        for (std::size_t j = 0; j < p; ++j) {
          double acc = 0.0;
          for (std::size_t k = 0; k < k_dim; ++k) acc += l(j, k) * z[k];
          rep.data.x(i, j) = acc;
        }
      }
      break;
    }
  }

  rep.eps.resize(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) rep.eps[i] = spec.error.sample(rng);
  rep.data.y = rep.data.x * spec.theta0 + rep.eps;
  return rep;
}

struct McConfig {
  std::size_t replications = 100;
  std::size_t workers = 0;  // 0: hardware concurrency
  std::uint64_t base_seed = 0;
};

namespace detail {

// Static partition; each index is processed exactly once and written to its
// own slot, so results are identical for every worker count.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
  if (workers == 0) workers = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  workers = std::min(workers, std::max<std::size_t>(count, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::mutex err_mutex;
  std::exception_ptr first_error;
  std::size_t first_error_index = 0;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = count * w / workers;
    const std::size_t hi = count * (w + 1) / workers;
    pool.emplace_back([&, lo, hi] {
      for (std::size_t i = lo; i < hi; ++i) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> guard(err_mutex);
          if (!first_error || i < first_error_index) {
            first_error = std::current_exception();
            first_error_index = i;
          }
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) {
    try {
      std::rethrow_exception(first_error);
    } catch (const std::exception& e) {
      throw NumericalError("replication " + std::to_string(first_error_index) + ": " + e.what());
    }
  }
}

}  // namespace detail

struct EstimatorSpec {
  FitKind kind = FitKind::Ridgeless;
  double lambda = 0.0;          // Ridge / Lasso
  std::size_t l0_radius = 0;    // L0Brute
  CdOptions cd;

  FitResult fit(const Dataset& d) const {
    switch (kind) {
      case FitKind::Ls:
      case FitKind::Ridgeless: return fit_ridgeless(d);
      case FitKind::Ridge: return fit_ridge(d, lambda);
      case FitKind::Lasso: return fit_lasso_cd(d, lambda, cd);
      case FitKind::L0Brute: return fit_l0_brute(d, l0_radius);
    }
    throw ValidationError("estimator: unknown kind");
  }
};

struct McRiskResult {
  RiskReport report;   // Source::Empirical
  Vector target;       // theta0_rl the risks are measured against
  Vector theta_mean;
  Vector theta_se;     // componentwise standard errors of theta_mean
};

// Averages empirical risks across replications against the identified
// coefficient. Aggregation is a sequential reduction over per-replication
// records, so reports are bit-identical for every worker count.
inline McRiskResult mc_risk(const DgpSpec& spec, const EstimatorSpec& estimator,
                            const McConfig& cfg) {
  spec.validate();
  if (cfg.replications < 2) throw ValidationError("mc_risk: need at least 2 replications");
  const std::size_t r = cfg.replications;
  const std::size_t p = spec.design.cols();
  const Vector target = spec.theta0_rl();

  struct Slot {
    double est = 0.0, pred = 0.0;
    Vector theta;
  };
  std::vector<Slot> slots(r);
  detail::parallel_for(r, cfg.workers, [&](std::size_t i) {
    Replicate rep = sample_dgp(spec, i);
    FitResult fit = estimator.fit(rep.data);
    auto [est, pred] = empirical_risks(fit.theta, target, rep.data.x);
    slots[i] = Slot{est, pred, std::move(fit.theta)};
  });

  double est_sum = 0.0, est_sq = 0.0, pred_sum = 0.0, pred_sq = 0.0;
  Vector theta_sum(p, 0.0), theta_sq(p, 0.0);
  for (const Slot& s : slots) {
    est_sum += s.est;
    est_sq += s.est * s.est;
    pred_sum += s.pred;
    pred_sq += s.pred * s.pred;
    for (std::size_t j = 0; j < p; ++j) {
      theta_sum[j] += s.theta[j];
      theta_sq[j] += s.theta[j] * s.theta[j];
    }
  }

  const double dr = static_cast<double>(r);
  auto se_of_mean = [dr](double sum, double sq) {
    const double mean = sum / dr;
    const double var = std::max(0.0, sq / dr - mean * mean) * dr / (dr - 1.0);
    return std::sqrt(var / dr);
  };

  McRiskResult out;
  out.target = target;
  out.report.kind = estimator.kind;
  out.report.source = RiskReport::Source::Empirical;
  out.report.replications = r;
  out.report.mse = est_sum / dr;
  out.report.mpr = pred_sum / dr;
  out.report.mse_se = se_of_mean(est_sum, est_sq);
  out.report.mpr_se = se_of_mean(pred_sum, pred_sq);

  out.theta_mean.resize(p);
  out.theta_se.resize(p);
  double var_trace = 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    out.theta_mean[j] = theta_sum[j] / dr;
    const double var = std::max(0.0, theta_sq[j] / dr - out.theta_mean[j] * out.theta_mean[j]);
    var_trace += var;
    out.theta_se[j] = std::sqrt(var * dr / (dr - 1.0) / dr);
  }
  out.report.trace_var = var_trace;
  out.report.bias_norm_sq = norm2_sq(out.theta_mean - target);
  return out;
}

struct CoverageConfig {
  BoundMode mode = BoundMode::Deterministic;
  double delta = 0.0;  // SubGaussian
  double kappa = 1.0;
  KappaSource kappa_source = KappaSource::Exact;
  CdOptions cd;
  bool run_lemma_audit = false;  // Deterministic mode: audit every replication
};

struct CoverageResult {
  std::size_t replications = 0;
  std::size_t violations = 0;
  double violation_frequency = 0.0;
  double ceiling = 0.0;  // 2 exp(-n delta^2/2); 0 in Deterministic mode
  double binomial_se = 0.0;
  std::size_t audits_run = 0;
  std::size_t audits_failed = 0;
  BoundReport sample_report;  // last replication, with observed values
};

// Per replication: pick lambda by the requested rule, fit lasso, evaluate the
// bound report, record a violation when any evaluated bound fails.
inline CoverageResult mc_bound_coverage(const DgpSpec& spec, const CoverageConfig& bc,
                                        const McConfig& cfg) {
  spec.validate();
  if (cfg.replications < 2) throw ValidationError("mc_bound_coverage: need >= 2 replications");
  std::size_t s0 = 0;
  for (double t : spec.theta0)
    if (t != 0.0) ++s0;
  if (bc.mode == BoundMode::SubGaussian && s0 >= spec.theta0.size())
    throw ValidationError("mc_bound_coverage: fast-rate bounds need hard-sparse theta0 (s0 < p)");

  std::vector<std::size_t> supp;
  for (std::size_t j = 0; j < spec.theta0.size(); ++j)
    if (spec.theta0[j] != 0.0) supp.push_back(j);

  const std::size_t r = cfg.replications;
  struct Slot {
    bool violated = false;
    bool audit_run = false;
    bool audit_failed = false;
    BoundReport report;
  };
  std::vector<Slot> slots(r);

  detail::parallel_for(r, cfg.workers, [&](std::size_t i) {
    Replicate rep = sample_dgp(spec, i);
    const Dataset& d = rep.data;
    const double n = static_cast<double>(d.n());

    double col_bound = 0.0;
    for (std::size_t j = 0; j < d.p(); ++j) {
      double ss = 0.0;
      for (std::size_t t = 0; t < d.n(); ++t) ss += d.x(t, j) * d.x(t, j);
      col_bound = std::max(col_bound, std::sqrt(ss / n));
    }

    BoundInputs in;
    in.s0 = supp.size();
    in.kappa = bc.kappa;
    in.kappa_source = bc.kappa_source;
    in.theta0_l1 = norm1(spec.theta0);
    in.column_bound = col_bound;
    in.sigma = spec.error.proxy_sigma();
    in.delta = bc.delta;
    in.p = d.p();
    in.n = d.n();
    if (bc.mode == BoundMode::Deterministic) {
      in.lambda = lambda_oracle(d.x, rep.eps);
      if (!(in.lambda > 0.0))
        throw ValidationError("mc_bound_coverage: zero oracle penalty in replication");
    }

    BoundReport report = lasso_bound_report(in, bc.mode);
    FitResult fit = fit_lasso_cd(d, report.lambda, bc.cd);
    auto [est, pred] = empirical_risks(fit.theta, spec.theta0, d.x);

    BoundObserved obs;
    obs.est_risk = est;
    obs.pred_risk = pred;
    obs.cone_ok = cone_membership(fit.theta - spec.theta0, ConeSpec{supp, 3.0});
    obs.est_satisfied = est <= report.est_bound;
    obs.pr_satisfied = pred <= report.pr_bound;
    obs.lemma_pr_satisfied = pred <= report.lemma_pr_bound;
    report.observed = obs;

    Slot slot;
    slot.violated = !(obs.est_satisfied && obs.pr_satisfied && obs.lemma_pr_satisfied);
    if (bc.mode == BoundMode::Deterministic && bc.run_lemma_audit) {
      slot.audit_run = true;
      slot.audit_failed = !lemma_audit(d, fit, spec.theta0, rep.eps).all_pass;
    }
    slot.report = std::move(report);
    slots[i] = std::move(slot);
  });

  CoverageResult out;
  out.replications = r;
  for (const Slot& s : slots) {
    if (s.violated) ++out.violations;
    if (s.audit_run) ++out.audits_run;
    if (s.audit_failed) ++out.audits_failed;
  }
  out.violation_frequency = static_cast<double>(out.violations) / static_cast<double>(r);
  out.ceiling = bc.mode == BoundMode::SubGaussian
                    ? 2.0 * std::exp(-static_cast<double>(spec.n) * bc.delta * bc.delta / 2.0)
                    : 0.0;
  const double c = std::min(out.ceiling, 1.0);
  out.binomial_se = std::sqrt(c * (1.0 - c) / static_cast<double>(r));
  out.sample_report = slots.back().report;
  return out;
}

}  // namespace plsq

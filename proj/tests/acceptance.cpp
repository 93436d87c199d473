// Acceptance suite: one check per criterion, one printed line per criterion.
// Exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "plsq/plsq.hpp"
#include "test_support.hpp"

using namespace plsq;
namespace fs = std::filesystem;

namespace {

struct Failure {
  std::string message;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw Failure{message};
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// ---------------------------------------------------------------- criteria

void criterion_pinv_examples() {
  Matrix p1 = pinv(Matrix(2, 1, {1, 2}));
  require(std::abs(p1(0, 0) - 0.2) <= 1e-12 && std::abs(p1(0, 1) - 0.4) <= 1e-12,
          "pinv([1;2]) != [1/5, 2/5]");
  Matrix p2 = pinv(Matrix::from_rows({{1, 1}, {1, 1}}));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      require(std::abs(p2(i, j) - 0.25) <= 1e-12, "pinv(ones) != 1/4");
  Matrix e11 = Matrix::from_rows({{1, 0}, {0, 0}});
  require(max_abs_diff(pinv(e11), e11) <= 1e-12, "pinv(e11) != e11");
}

void criterion_ridgeless_estimand_example() {
  Vector x = min_norm_solve(Matrix::from_rows({{1, 2}, {2, 4}}), {1, 2});
  require(std::abs(x[0] - 0.2) <= 1e-12 && std::abs(x[1] - 0.4) <= 1e-12,
          "min_norm_solve worked example != [0.2, 0.4], got [" + fmt(x[0]) + ", " + fmt(x[1]) + "]");
}

void criterion_lse_closed_form_risk() {
  Rng rng(1001);
  DgpSpec spec;
  spec.design.kind = DesignSpec::Kind::Fixed;
  spec.design.fixed = testsup::random_matrix(rng, 100, 5);
  spec.theta0 = testsup::random_vector(rng, 5);
  spec.error = {ErrorSpec::Family::Gaussian, 1.0};
  spec.n = 100;
  spec.seed = 1002;

  Estimand pop;
  pop.second_moment = spec.second_moment();
  pop.theta0_rl = spec.theta0_rl();
  pop.sigma = 1.0;
  pop.rank0 = 5;
  RiskReport closed = theoretical_risk(RiskEstimator::Lse, spec.design.fixed, pop);

  EstimatorSpec est;
  est.kind = FitKind::Ridgeless;  // = LSE at full rank
  McRiskResult mc = mc_risk(spec, est, {10000, 0, 7});
  require(std::abs(mc.report.mse - closed.mse) <= 3.0 * mc.report.mse_se,
          "empirical MSE " + fmt(mc.report.mse) + " off closed form " + fmt(closed.mse) +
              " by more than 3 SE (" + fmt(mc.report.mse_se) + ")");
  require(std::abs(closed.mpr - 0.05) <= 1e-12, "closed-form MPR should be p sigma^2/n = 0.05");
  require(std::abs(mc.report.mpr - 0.05) <= 3.0 * mc.report.mpr_se,
          "empirical MPR " + fmt(mc.report.mpr) + " off 0.05 by more than 3 SE (" +
              fmt(mc.report.mpr_se) + ")");
}

void criterion_ridgeless_rank_deficient() {
  Rng rng(1003);
  DgpSpec spec;
  spec.design.kind = DesignSpec::Kind::Fixed;
  spec.design.fixed = testsup::rank_deficient(rng, 100, 5, 3);
  spec.theta0 = testsup::random_vector(rng, 5);
  spec.error = {ErrorSpec::Family::Gaussian, 1.0};
  spec.n = 100;
  spec.seed = 1004;
  require(svd(spec.design.fixed).rank == 3, "construction should have rank 3");

  EstimatorSpec est;
  est.kind = FitKind::Ridgeless;
  McRiskResult mc = mc_risk(spec, est, {10000, 0, 8});
  require(std::abs(mc.report.mpr - 0.03) <= 3.0 * mc.report.mpr_se,
          "ridgeless empirical MPR " + fmt(mc.report.mpr) + " off r sigma^2/n = 0.03 by >3 SE");

  Matrix p_range = projector(spec.design.fixed, ProjectorKind::RangeXt);
  Vector expected = p_range * mc.target;
  for (std::size_t j = 0; j < 5; ++j)
    require(std::abs(mc.theta_mean[j] - expected[j]) <= 4.0 * mc.theta_se[j],
            "mean theta component " + std::to_string(j) + " off P theta0_rl by >4 SE");
}

void criterion_ridge_identities() {
  Rng rng(1005);
  for (int design = 0; design < 20; ++design) {
    const bool deficient = design >= 15;
    std::vector<double> spectrum = {2.0, 1.6, 1.2, 0.9, 0.7, 0.5};
    if (deficient) spectrum.resize(3);  // remaining singular values are zero
    Matrix x = testsup::matrix_with_spectrum(rng, 12, 6, spectrum);
    Vector y = testsup::random_vector(rng, 12);
    Dataset d{y, x, std::nullopt};
    SvdFactors f = svd(x);
    const double s1 = f.singular_values[0];
    Vector rl = fit_ridgeless(d).theta;
    Matrix g = gram(x);
    Matrix g_pinv = pinv(g);
    Vector xty = transpose_times(x, y);

    for (double lambda : {1e-2, 1.0, 1e2}) {
      Vector theta = fit_ridge(d, lambda).theta;
      // (a) normal-equation residual
      Matrix g_l = g;
      for (std::size_t i = 0; i < 6; ++i) g_l(i, i) += lambda;
      Vector resid = g_l * theta - xty;
      require(norm2(resid) <= 1e-9 * (1.0 + norm2(xty)),
              "normal-equation residual " + fmt(norm2(resid)) + " at lambda " + fmt(lambda));
      // (b) spectral form vs an independent normal-equations solve
      Vector ne = testsup::ridge_normal_equations(x, y, lambda);
      require(norm2(theta - ne) <= 1e-8,
              "spectral vs normal-equations gap " + fmt(norm2(theta - ne)));
      // (c) transfer identities round-trip
      Vector via = ridge_from_ridgeless(d, rl, lambda);
      require(norm2(via - theta) <= 1e-8, "ridge_from_ridgeless mismatch " + fmt(norm2(via - theta)));
      Vector back = g_pinv * (g_l * theta);
      require(norm2(back - rl) <= 1e-8, "inverse transfer mismatch " + fmt(norm2(back - rl)));
    }
    // (d) vanishing penalty approaches ridgeless
    Vector near_rl = fit_ridge(d, 1e-10 * s1 * s1).theta;
    require(norm2(near_rl - rl) <= 1e-6,
            "ridge(1e-10 s1^2) to ridgeless distance " + fmt(norm2(near_rl - rl)));
  }
}

void criterion_farebrother() {
  Rng rng(1006);
  Matrix x = testsup::matrix_with_spectrum(rng, 20, 4, {1.6, 1.2, 0.9, 0.6});
  Vector theta0 = testsup::random_vector(rng, 4);
  const double nrm = norm2(theta0);
  for (double& t : theta0) t /= nrm;  // ||theta0|| = 1

  Estimand est;
  est.second_moment = gram(x);
  est.second_moment *= 1.0 / 20.0;
  est.theta0_rl = theta0;
  est.sigma = 1.0;
  est.rank0 = 4;

  Vector grid;
  for (double l = 1e-3; l <= 1e3; l *= 1.3) grid.push_back(l);
  auto star = find_lambda_star(x, est, grid);
  require(star.has_value(), "no lambda* found on the grid");
  const double ridge_mse = theoretical_risk(RiskEstimator::Ridge, x, est, *star).mse;
  const double rl_mse = theoretical_risk(RiskEstimator::Ridgeless, x, est).mse;
  require(ridge_mse < rl_mse - 1e-6, "ridge MSE " + fmt(ridge_mse) + " not below ridgeless " +
                                         fmt(rl_mse) + " by 1e-6");
}

void criterion_lasso_correctness() {
  Rng rng(1007);
  // 50 random standardized instances with p >> n
  for (int inst = 0; inst < 50; ++inst) {
    Dataset raw;
    raw.x = testsup::random_matrix(rng, 50, 200);
    raw.y = testsup::random_vector(rng, 50);
    Dataset d = standardize(raw).first;
    const double lmax = lambda_max(d);
    FitResult f = fit_lasso_cd(d, 0.3 * lmax);
    require(f.converged, "instance " + std::to_string(inst) + " did not converge");
    Vector grad = transpose_times(d.x, d.y - d.x * f.theta);
    for (std::size_t j = 0; j < 200; ++j) {
      const double g = grad[j] / 50.0;
      if (f.theta[j] == 0.0)
        require(std::abs(g) <= 0.3 * lmax + 1e-8, "inactive KKT residual too large");
      else
        require(std::abs(g - 0.3 * lmax * (f.theta[j] > 0 ? 1.0 : -1.0)) <= 1e-8,
                "active KKT residual too large");
    }
    FitResult zero = fit_lasso_cd(d, lmax);
    for (double t : zero.theta) require(t == 0.0, "fit at lambda_max is not exactly zero");
  }
  // univariate closed form
  for (int rep = 0; rep < 25; ++rep) {
    Dataset d;
    d.x = testsup::random_matrix(rng, 30, 1);
    d.y = testsup::random_vector(rng, 30);
    const double a = dot(d.x.col(0), d.y) / 30.0;
    const double b = dot(d.x.col(0), d.x.col(0)) / 30.0;
    for (double lambda : {0.03, 0.4}) {
      FitResult f = fit_lasso_cd(d, lambda);
      require(std::abs(f.theta[0] - soft_threshold(a, lambda) / b) <= 1e-12,
              "univariate fit mismatch");
    }
  }
  // orthonormal designs match coordinatewise soft thresholding
  for (int rep = 0; rep < 10; ++rep) {
    Matrix x = testsup::orthonormal_design(rng, 60, 20);
    Vector y = testsup::random_vector(rng, 60);
    Dataset d{y, x, std::nullopt};
    Vector xty = transpose_times(x, y);
    const double lambda = 0.08;
    FitResult f = fit_lasso_cd(d, lambda);
    for (std::size_t j = 0; j < 20; ++j)
      require(std::abs(f.theta[j] - soft_threshold(xty[j] / 60.0, lambda)) <= 1e-8,
              "orthonormal coordinate mismatch");
  }
}

void criterion_prediction_uniqueness() {
  Rng rng(1008);
  for (int inst = 0; inst < 20; ++inst) {
    Dataset raw;
    raw.x = testsup::random_matrix(rng, 30, 10);
    raw.y = testsup::random_vector(rng, 30);
    Dataset d = standardize(raw).first;
    if (inst % 2 == 0)   // the paper's non-uniqueness counterexample
      for (std::size_t i = 0; i < d.n(); ++i) d.x(i, 3) = d.x(i, 7);

    const double lambda = 0.2 * lambda_max(d);
    FitResult base = fit_lasso_cd(d, lambda);

    std::vector<std::size_t> perm(10);
    for (std::size_t j = 0; j < 10; ++j) perm[j] = j;
    for (std::size_t j = 10; j-- > 1;) std::swap(perm[j], perm[rng.next_u64() % (j + 1)]);
    Dataset shuffled = d;
    for (std::size_t j = 0; j < 10; ++j)
      for (std::size_t i = 0; i < d.n(); ++i) shuffled.x(i, j) = d.x(i, perm[j]);
    FitResult f2 = fit_lasso_cd(shuffled, lambda);

    Vector pred_gap = predict(d.x, base.theta) - predict(shuffled.x, f2.theta);
    require(testsup::max_abs(pred_gap) <= 1e-6,
            "prediction gap " + fmt(testsup::max_abs(pred_gap)) + " in instance " +
                std::to_string(inst));
    require(std::abs(norm1(base.theta) - norm1(f2.theta)) <= 1e-8,
            "l1 norm gap " + fmt(std::abs(norm1(base.theta) - norm1(f2.theta))));
  }
}

DgpSpec sparse_fixed_spec(Rng& rng, std::size_t n, std::size_t p, std::size_t s0,
                          bool orthonormal, std::uint64_t seed) {
  DgpSpec spec;
  spec.design.kind = DesignSpec::Kind::Fixed;
  spec.design.fixed =
      orthonormal ? testsup::orthonormal_design(rng, n, p) : testsup::random_matrix(rng, n, p);
  if (!orthonormal) {
    // unit-variance columns for comparable penalty levels
    for (std::size_t j = 0; j < p; ++j) {
      double ss = 0.0;
      for (std::size_t i = 0; i < n; ++i) ss += spec.design.fixed(i, j) * spec.design.fixed(i, j);
      const double scale = std::sqrt(ss / static_cast<double>(n));
      for (std::size_t i = 0; i < n; ++i) spec.design.fixed(i, j) /= scale;
    }
  }
  spec.theta0.assign(p, 0.0);
  for (std::size_t k = 0; k < s0; ++k) spec.theta0[k] = (k % 2 == 0 ? 1.5 : -1.0);
  spec.error = {ErrorSpec::Family::Gaussian, 1.0};
  spec.n = n;
  spec.seed = seed;
  return spec;
}

void criterion_lemma_audit_500() {
  Rng rng(1009);
  DgpSpec spec = sparse_fixed_spec(rng, 100, 20, 3, false, 1010);
  std::size_t passes = 0;
  for (std::size_t rep = 0; rep < 500; ++rep) {
    Replicate r = sample_dgp(spec, rep);
    const double lambda = lambda_oracle(r.data.x, r.eps);
    FitResult fit = fit_lasso_cd(r.data, lambda);
    require(fit.converged, "lasso did not converge in replication " + std::to_string(rep));
    LemmaAuditRecord rec = lemma_audit(r.data, fit, spec.theta0, r.eps);
    if (rec.all_pass) ++passes;
  }
  require(passes == 500, "lemma audit passed only " + std::to_string(passes) + "/500");
}

void criterion_theorem_bounds_known_kappa() {
  Rng rng(1011);
  DgpSpec spec = sparse_fixed_spec(rng, 100, 20, 3, true, 1012);
  CoverageConfig cc;
  cc.mode = BoundMode::Deterministic;
  cc.kappa = 1.0;
  cc.kappa_source = KappaSource::Exact;
  CoverageResult res = mc_bound_coverage(spec, cc, {500, 0, 0});
  require(res.violations == 0,
          std::to_string(res.violations) + "/500 replications violated the Theorem bounds");
}

void criterion_subgaussian_coverage() {
  Rng rng(1013);
  DgpSpec spec = sparse_fixed_spec(rng, 200, 50, 3, true, 1014);
  CoverageConfig cc;
  cc.mode = BoundMode::SubGaussian;
  cc.delta = 0.3;
  cc.kappa = 1.0;  // exact for the orthonormal construction
  cc.kappa_source = KappaSource::Exact;
  CoverageResult res = mc_bound_coverage(spec, cc, {2000, 0, 0});
  require(res.violation_frequency <= res.ceiling + 3.0 * res.binomial_se,
          "violation frequency " + fmt(res.violation_frequency) + " above ceiling " +
              fmt(res.ceiling) + " + 3 SE");
}

void criterion_online_ls() {
  Rng rng(1015);
  const std::size_t p = 5, total = 200;
  Matrix x = testsup::random_matrix(rng, total, p);
  Vector y = testsup::random_vector(rng, total);

  Dataset head;
  head.x = Matrix(p, p);
  head.y.assign(y.begin(), y.begin() + p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) head.x(i, j) = x(i, j);
  OnlineLsState state = online_ls_init(head);

  for (std::size_t m = p; m <= total; ++m) {
    Dataset prefix;
    prefix.x = Matrix(m, p);
    prefix.y.assign(y.begin(), y.begin() + m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < p; ++j) prefix.x(i, j) = x(i, j);
    Vector batch = fit_ridgeless(prefix).theta;
    require(norm2(state.theta - batch) <= 1e-8,
            "online/batch gap " + fmt(norm2(state.theta - batch)) + " at step " +
                std::to_string(m));
    if (m < total) {
      Vector row(x.row(m).begin(), x.row(m).end());
      state = online_ls_update(state, row, y[m]);
    }
  }
}

void criterion_l0_oracle() {
  Rng rng(1016);
  for (int rep = 0; rep < 5; ++rep) {
    Matrix x = testsup::orthonormal_design(rng, 40, 8);
    Vector y = testsup::random_vector(rng, 40);
    Dataset d{y, x, std::nullopt};
    Vector xty = transpose_times(x, y);
    std::vector<std::size_t> order(8);
    for (std::size_t j = 0; j < 8; ++j) order[j] = j;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return std::abs(xty[a]) > std::abs(xty[b]); });
    for (std::size_t k = 1; k <= 3; ++k) {
      FitResult f = fit_l0_brute(d, k);
      std::set<std::size_t> expect(order.begin(), order.begin() + k);
      std::set<std::size_t> got;
      for (std::size_t j = 0; j < 8; ++j)
        if (f.theta[j] != 0.0) got.insert(j);
      require(got == expect, "l0 support mismatch at k = " + std::to_string(k));
    }
  }
}

void criterion_cli_determinism() {
#ifndef PLSQ_CLI_PATH
  throw Failure{"PLSQ_CLI_PATH not defined"};
#else
  const std::string cli = PLSQ_CLI_PATH;
  const fs::path dir = fs::temp_directory_path() / "plsq_acceptance_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);

  {
    std::ofstream csv(dir / "data.csv");
    csv << "y,x1,x2,x3\n";
    Rng rng(1017);
    for (int i = 0; i < 30; ++i) {
      csv << rng.normal();
      for (int j = 0; j < 3; ++j) csv << ',' << rng.normal();
      csv << '\n';
    }
  }
  const std::string dgp =
      "\"input\": {\"dgp\": {\"design\": {\"gaussian\": {\"mean\": [0,0,0], "
      "\"covariance\": [[1,0,0],[0,1,0],[0,0,1]]}}, \"theta0\": [1,0,-0.5], "
      "\"error\": {\"family\": \"gaussian\", \"scale\": 1.0}, \"n\": 40, \"seed\": 5}}";
  auto config = [&](const std::string& name, const std::string& body) {
    std::ofstream out(dir / name);
    out << body;
    return (dir / name).string();
  };
  const std::string data = (dir / "data.csv").string();
  std::vector<std::pair<std::string, std::string>> jobs = {
      {"fit", "{\"subcommand\":\"fit\",\"input\":{\"csv\":{\"path\":\"" + data +
                  "\",\"target\":\"y\"}},\"estimator\":{\"kind\":\"lasso\",\"lambda\":0.05},"
                  "\"standardize\":true}"},
      {"path", "{\"subcommand\":\"path\",\"input\":{\"csv\":{\"path\":\"" + data +
                   "\",\"target\":\"y\"}},\"path\":{\"n_lambda\":12,\"ratio\":0.01},"
                   "\"standardize\":true}"},
      {"risk", "{\"subcommand\":\"risk\"," + dgp +
                   ",\"risk\":{\"sigma\":1.0,\"estimators\":[{\"kind\":\"ridge\",\"lambda\":0.5}],"
                   "\"empirical_replications\":100},\"seed\":3}"},
      {"bounds", "{\"subcommand\":\"bounds\",\"input\":{\"csv\":{\"path\":\"" + data +
                     "\",\"target\":\"y\"}},\"bounds\":{\"mode\":\"subgaussian\",\"delta\":0.4,"
                     "\"sigma\":1.0,\"theta0\":[1,0,0],\"kappa_samples\":200,\"kappa_refine\":15},"
                     "\"seed\":9}"},
      {"mc", "{\"subcommand\":\"mc\"," + dgp +
                 ",\"estimator\":{\"kind\":\"ridgeless\"},\"mc\":{\"mode\":\"risk\","
                 "\"replications\":200},\"seed\":4}"},
  };

  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };

  for (auto& [sub, body] : jobs) {
    const std::string cfg_path = config(sub + ".json", body);
    for (const std::string fmt_name : {"json", "csv"}) {
      std::vector<std::string> outputs;
      for (int run = 0; run < 2; ++run) {
        for (std::size_t workers : {std::size_t{1}, std::size_t{2}}) {
          const fs::path out_file =
              dir / (sub + "_" + fmt_name + "_" + std::to_string(run) + "_" +
                     std::to_string(workers) + ".out");
          std::ostringstream cmd;
          cmd << cli << ' ' << sub << " --config " << cfg_path << " --format " << fmt_name
              << " --workers " << workers << " --out " << out_file.string();
          const int rc = std::system(cmd.str().c_str());
          require(rc == 0, sub + " exited with status " + std::to_string(rc));
          outputs.push_back(slurp(out_file));
        }
      }
      for (std::size_t k = 1; k < outputs.size(); ++k)
        require(outputs[k] == outputs[0],
                sub + " (" + fmt_name + ") output differs across runs/worker counts");
    }
  }
  fs::remove_all(dir);
#endif
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<void()> body;
  };
  const std::vector<Criterion> criteria = {
      {1, "Moore-Penrose worked examples", criterion_pinv_examples},
      {2, "ridgeless estimand worked example", criterion_ridgeless_estimand_example},
      {3, "LSE closed-form risk vs Monte Carlo", criterion_lse_closed_form_risk},
      {4, "ridgeless risk on a rank-deficient design", criterion_ridgeless_rank_deficient},
      {5, "ridge identities", criterion_ridge_identities},
      {6, "Farebrother lambda*", criterion_farebrother},
      {7, "lasso correctness", criterion_lasso_correctness},
      {8, "prediction uniqueness under permutation", criterion_prediction_uniqueness},
      {9, "lemma audit 500/500", criterion_lemma_audit_500},
      {10, "theorem bounds with known kappa", criterion_theorem_bounds_known_kappa},
      {11, "slow/fast-rate coverage", criterion_subgaussian_coverage},
      {12, "online least squares", criterion_online_ls},
      {13, "l0 oracle agreement", criterion_l0_oracle},
      {14, "CLI determinism", criterion_cli_determinism},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::string verdict = "PASS", detail;
    try {
      c.body();
    } catch (const Failure& f) {
      verdict = "FAIL";
      detail = f.message;
      ++failures;
    } catch (const std::exception& e) {
      verdict = "FAIL";
      detail = std::string("exception: ") + e.what();
      ++failures;
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] criterion %2d: %s (%.2fs)%s%s\n", verdict.c_str(), c.id, c.name, secs,
                detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
  }
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  else std::printf("all %zu criteria passed\n", criteria.size());
  return failures == 0 ? 0 : 1;
}

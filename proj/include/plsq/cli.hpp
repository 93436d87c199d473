#pragma once

#include <cstddef>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "plsq/csv.hpp"
#include "plsq/plsq.hpp"

namespace plsq::cli {

using Json = nlohmann::ordered_json;

enum class Subcommand { Fit, Path, Risk, Bounds, Mc };
enum class Format { Json, Csv };

struct CsvInput {
  std::string path;
  bool has_header = true;
  ColumnRef target = std::size_t{0};
};

struct RunConfig {
  Subcommand subcommand = Subcommand::Fit;
  std::optional<CsvInput> csv;
  std::optional<DgpSpec> dgp;

  EstimatorSpec estimator;
  bool standardize = false;

  // path
  std::size_t n_lambda = 100;
  std::optional<double> ratio;  // default depends on n > p

  // risk
  struct RiskJob {
    double sigma = 1.0;
    Vector theta0;
    std::vector<EstimatorSpec> estimators;
    std::size_t empirical_replications = 0;
  };
  std::optional<RiskJob> risk;

  // bounds
  struct BoundsJob {
    BoundMode mode = BoundMode::Deterministic;
    double lambda = 0.0;
    std::optional<double> kappa;  // absent: estimate on the cone
    std::size_t kappa_samples = 500;
    std::size_t kappa_refine = 40;
    std::vector<std::size_t> support;
    double alpha = 3.0;
    double delta = 0.0;
    double sigma = 1.0;
    Vector theta0;
  };
  std::optional<BoundsJob> bounds;

  // mc
  struct McJob {
    enum class Mode { Risk, Coverage } mode = Mode::Risk;
    CoverageConfig coverage;
  };
  std::optional<McJob> mc;

  McConfig mc_cfg;
  std::uint64_t seed = 0;
  std::size_t workers = 0;

  std::string out;  // empty: stdout
  Format format = Format::Json;
};

namespace detail {

inline Matrix matrix_from_json(const Json& j, const char* who) {
  if (!j.is_array() || j.empty() || !j.front().is_array())
    throw ValidationError(std::string("config: ") + who + " must be an array of rows");
  const std::size_t rows = j.size(), cols = j.front().size();
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (j[i].size() != cols) throw ValidationError(std::string("config: ragged ") + who);
    for (std::size_t c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

inline Vector vector_from_json(const Json& j, const char* who) {
  if (!j.is_array()) throw ValidationError(std::string("config: ") + who + " must be an array");
  Vector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

inline FitKind fit_kind_from_string(const std::string& s) {
  if (s == "ls") return FitKind::Ls;
  if (s == "ridgeless") return FitKind::Ridgeless;
  if (s == "ridge") return FitKind::Ridge;
  if (s == "lasso") return FitKind::Lasso;
  if (s == "l0") return FitKind::L0Brute;
  throw ValidationError("config: unknown estimator kind \"" + s + "\"");
}

inline EstimatorSpec estimator_from_json(const Json& j) {
  EstimatorSpec e;
  e.kind = fit_kind_from_string(j.value("kind", std::string("ridgeless")));
  if (j.contains("lambda")) e.lambda = j["lambda"].get<double>();
  if (j.contains("radius")) e.l0_radius = j["radius"].get<std::size_t>();
  if (j.contains("max_iter")) e.cd.max_iterations = j["max_iter"].get<std::size_t>();
  if (j.contains("tol")) e.cd.tol = j["tol"].get<double>();
  return e;
}

inline DgpSpec dgp_from_json(const Json& j) {
  DgpSpec spec;
  const Json& design = j.at("design");
  if (design.contains("fixed")) {
    spec.design.kind = DesignSpec::Kind::Fixed;
    spec.design.fixed = matrix_from_json(design["fixed"], "design.fixed");
  } else if (design.contains("gaussian")) {
    spec.design.kind = DesignSpec::Kind::RandomGaussian;
    spec.design.covariance = matrix_from_json(design["gaussian"].at("covariance"), "covariance");
    if (design["gaussian"].contains("mean"))
      spec.design.mean = vector_from_json(design["gaussian"]["mean"], "mean");
    else
      spec.design.mean.assign(spec.design.covariance.rows(), 0.0);
  } else if (design.contains("collinear")) {
    spec.design.kind = DesignSpec::Kind::RandomCollinear;
    spec.design.loading = matrix_from_json(design["collinear"].at("loading"), "loading");
  } else {
    throw ValidationError("config: dgp design must be fixed, gaussian or collinear");
  }
  spec.theta0 = vector_from_json(j.at("theta0"), "theta0");
  if (j.contains("error")) {
    const std::string fam = j["error"].value("family", std::string("gaussian"));
    if (fam == "gaussian") spec.error.family = ErrorSpec::Family::Gaussian;
    else if (fam == "bernoulli") spec.error.family = ErrorSpec::Family::SymmetricBernoulli;
    else if (fam == "uniform") spec.error.family = ErrorSpec::Family::Uniform;
    else throw ValidationError("config: unknown error family \"" + fam + "\"");
    spec.error.scale = j["error"].value("scale", 1.0);
  }
  spec.n = j.contains("n") ? j["n"].get<std::size_t>()
                           : (spec.design.kind == DesignSpec::Kind::Fixed ? spec.design.fixed.rows()
                                                                          : 0);
  spec.seed = j.value("seed", 0ull);
  return spec;
}

}  // namespace detail

inline RunConfig parse_config(const Json& j) {
  RunConfig cfg;
  const std::string sub = j.value("subcommand", std::string(""));
  if (sub == "fit") cfg.subcommand = Subcommand::Fit;
  else if (sub == "path") cfg.subcommand = Subcommand::Path;
  else if (sub == "risk") cfg.subcommand = Subcommand::Risk;
  else if (sub == "bounds") cfg.subcommand = Subcommand::Bounds;
  else if (sub == "mc") cfg.subcommand = Subcommand::Mc;
  else throw ValidationError("config: subcommand must be one of fit|path|risk|bounds|mc");

  if (j.contains("input")) {
    const Json& in = j["input"];
    const bool has_csv = in.contains("csv"), has_dgp = in.contains("dgp");
    if (has_csv == has_dgp)
      throw ValidationError("config: input must hold exactly one of csv or dgp");
    if (has_csv) {
      CsvInput c;
      const Json& cj = in["csv"];
      c.path = cj.at("path").get<std::string>();
      c.has_header = cj.value("has_header", true);
      if (cj.contains("target")) {
        if (cj["target"].is_string()) c.target = cj["target"].get<std::string>();
        else c.target = cj["target"].get<std::size_t>();
      }
      cfg.csv = std::move(c);
    } else {
      cfg.dgp = detail::dgp_from_json(in["dgp"]);
    }
  }

  if (j.contains("estimator")) cfg.estimator = detail::estimator_from_json(j["estimator"]);
  cfg.standardize = j.value("standardize", false);
  if (j.contains("path")) {
    cfg.n_lambda = j["path"].value("n_lambda", std::size_t{100});
    if (j["path"].contains("ratio")) cfg.ratio = j["path"]["ratio"].get<double>();
  }

  if (j.contains("risk")) {
    RunConfig::RiskJob job;
    const Json& r = j["risk"];
    job.sigma = r.value("sigma", 1.0);
    if (r.contains("theta0")) job.theta0 = detail::vector_from_json(r["theta0"], "risk.theta0");
    if (r.contains("estimators"))
      for (const Json& e : r["estimators"]) job.estimators.push_back(detail::estimator_from_json(e));
    job.empirical_replications = r.value("empirical_replications", std::size_t{0});
    cfg.risk = std::move(job);
  }

  if (j.contains("bounds")) {
    RunConfig::BoundsJob job;
    const Json& b = j["bounds"];
    const std::string mode = b.value("mode", std::string("deterministic"));
    if (mode == "deterministic") job.mode = BoundMode::Deterministic;
    else if (mode == "subgaussian") job.mode = BoundMode::SubGaussian;
    else throw ValidationError("config: bounds mode must be deterministic or subgaussian");
    job.lambda = b.value("lambda", 0.0);
    if (b.contains("kappa")) job.kappa = b["kappa"].get<double>();
    job.kappa_samples = b.value("kappa_samples", std::size_t{500});
    job.kappa_refine = b.value("kappa_refine", std::size_t{40});
    if (b.contains("support"))
      for (const Json& s : b["support"]) job.support.push_back(s.get<std::size_t>());
    job.alpha = b.value("alpha", 3.0);
    job.delta = b.value("delta", 0.0);
    job.sigma = b.value("sigma", 1.0);
    if (b.contains("theta0")) job.theta0 = detail::vector_from_json(b["theta0"], "bounds.theta0");
    cfg.bounds = std::move(job);
  }

  if (j.contains("mc")) {
    RunConfig::McJob job;
    const Json& m = j["mc"];
    const std::string mode = m.value("mode", std::string("risk"));
    if (mode == "risk") job.mode = RunConfig::McJob::Mode::Risk;
    else if (mode == "coverage") job.mode = RunConfig::McJob::Mode::Coverage;
    else throw ValidationError("config: mc mode must be risk or coverage");
    cfg.mc_cfg.replications = m.value("replications", std::size_t{100});
    if (m.contains("coverage")) {
      const Json& c = m["coverage"];
      const std::string bmode = c.value("mode", std::string("deterministic"));
      job.coverage.mode = bmode == "subgaussian" ? BoundMode::SubGaussian : BoundMode::Deterministic;
      job.coverage.delta = c.value("delta", 0.0);
      job.coverage.kappa = c.value("kappa", 1.0);
      job.coverage.kappa_source =
          c.value("kappa_source", std::string("exact")) == "exact" ? KappaSource::Exact
                                                                   : KappaSource::Sampled;
      job.coverage.run_lemma_audit = c.value("lemma_audit", false);
    }
    cfg.mc = job;
  }

  cfg.seed = j.value("seed", 0ull);
  cfg.workers = j.value("workers", std::size_t{0});
  cfg.out = j.value("out", std::string(""));
  const std::string fmt = j.value("format", std::string("json"));
  if (fmt == "json") cfg.format = Format::Json;
  else if (fmt == "csv") cfg.format = Format::Csv;
  else throw ValidationError("config: format must be json or csv");
  return cfg;
}

namespace detail {

inline Dataset materialize(const RunConfig& cfg) {
  if (cfg.csv) return load_csv(cfg.csv->path, cfg.csv->has_header, cfg.csv->target);
  if (cfg.dgp) return sample_dgp(*cfg.dgp, 0).data;
  throw ValidationError("config: this subcommand requires an input (csv or dgp)");
}

inline Json coefficients_json(const Vector& theta) {
  Json arr = Json::array();
  for (double t : theta) arr.push_back(t);
  return arr;
}

inline Json fit_row(const FitResult& f, const std::optional<std::vector<std::string>>& names) {
  Json row;
  row["estimator"] = to_string(f.kind);
  row["lambda"] = f.lambda ? Json(*f.lambda) : Json(nullptr);
  if (f.l0_radius) row["radius"] = *f.l0_radius;
  row["intercept"] = f.intercept ? Json(*f.intercept) : Json(nullptr);
  row["converged"] = f.converged;
  row["iterations"] = f.iterations;
  row["objective"] = f.objective;
  row["nonzeros"] = f.nonzeros();
  row["l1_norm"] = norm1(f.theta);
  row["coefficients"] = coefficients_json(f.theta);
  if (names) row["names"] = *names;
  return row;
}

inline Json risk_row(const RiskReport& r, std::optional<double> lambda) {
  Json row;
  row["estimator"] = to_string(r.kind);
  row["lambda"] = lambda ? Json(*lambda) : Json(nullptr);
  row["source"] = r.source == RiskReport::Source::Theoretical ? "theoretical" : "empirical";
  row["bias_norm_sq"] = r.bias_norm_sq;
  row["trace_var"] = r.trace_var;
  row["mse"] = r.mse;
  row["mpr"] = r.mpr;
  if (r.source == RiskReport::Source::Empirical) {
    row["replications"] = r.replications;
    row["mse_se"] = r.mse_se;
    row["mpr_se"] = r.mpr_se;
  }
  return row;
}

inline FitResult dispatch_fit(const RunConfig& cfg, const Dataset& data) {
  if (!cfg.standardize) return cfg.estimator.fit(data);
  return fit_standardized(data, [&](const Dataset& sd) { return cfg.estimator.fit(sd); });
}

inline Json execute_fit(const RunConfig& cfg) {
  Dataset data = materialize(cfg);
  FitResult fit = dispatch_fit(cfg, data);
  Json report;
  report["subcommand"] = "fit";
  report["n"] = data.n();
  report["p"] = data.p();
  report["standardized"] = cfg.standardize;
  report["rows"] = Json::array({fit_row(fit, data.names)});
  return report;
}

inline Json execute_path(const RunConfig& cfg) {
  Dataset data = materialize(cfg);
  const double ratio = cfg.ratio ? *cfg.ratio : (data.n() > data.p() ? 1e-3 : 1e-2);

  Dataset work = data;
  StandardizeTransform transform;
  if (cfg.standardize) {
    auto [sd, t] = standardize(data);
    work = std::move(sd);
    transform = std::move(t);
  }
  LambdaPath path = lasso_path(work, cfg.n_lambda, ratio, cfg.estimator.cd);

  Json rows = Json::array();
  for (std::size_t k = 0; k < path.grid.size(); ++k) {
    FitResult f = path.fits[k];
    if (cfg.standardize) {
      for (std::size_t j = 0; j < f.theta.size(); ++j) f.theta[j] /= transform.scales[j];
      f.intercept = recover_intercept(f.theta, transform);
    }
    rows.push_back(fit_row(f, data.names));
  }
  Json report;
  report["subcommand"] = "path";
  report["n"] = data.n();
  report["p"] = data.p();
  report["standardized"] = cfg.standardize;
  report["lambda_max"] = path.lambda_max;
  report["ratio"] = ratio;
  report["rows"] = rows;
  return report;
}

inline Json execute_risk(const RunConfig& cfg) {
  if (!cfg.risk) throw ValidationError("risk: missing risk section in config");
  const RunConfig::RiskJob& job = *cfg.risk;
  Dataset data = materialize(cfg);

  Vector theta0 = job.theta0;
  if (theta0.empty() && cfg.dgp) theta0 = cfg.dgp->theta0;
  if (theta0.size() != data.p()) throw ValidationError("risk: theta0 length does not match design");

  Matrix second_moment;
  if (cfg.dgp) {
    second_moment = cfg.dgp->second_moment();
  } else {
    second_moment = gram(data.x);
    second_moment *= 1.0 / static_cast<double>(data.n());
  }
  Estimand est;
  est.second_moment = second_moment;
  est.theta0_rl = ridgeless_estimand(second_moment, second_moment * theta0).theta;
  est.sigma = job.sigma;
  est.rank0 = svd(second_moment).rank;

  Json rows = Json::array();
  for (const EstimatorSpec& e : job.estimators) {
    std::optional<double> lambda;
    if (e.kind == FitKind::Ridge || e.kind == FitKind::Lasso) lambda = e.lambda;
    if (e.kind != FitKind::Lasso && e.kind != FitKind::L0Brute) {
      const RiskEstimator kind = e.kind == FitKind::Ls ? RiskEstimator::Lse
                                 : e.kind == FitKind::Ridge ? RiskEstimator::Ridge
                                                            : RiskEstimator::Ridgeless;
      rows.push_back(risk_row(theoretical_risk(kind, data.x, est, e.lambda), lambda));
    }
    if (job.empirical_replications > 0) {
      if (!cfg.dgp) throw ValidationError("risk: empirical rows require a dgp input");
      McConfig mc = cfg.mc_cfg;
      mc.replications = job.empirical_replications;
      mc.workers = cfg.workers;
      mc.base_seed = cfg.seed;
      McRiskResult res = mc_risk(*cfg.dgp, e, mc);
      Json row = risk_row(res.report, lambda);
      row["theta_mean"] = coefficients_json(res.theta_mean);
      row["theta_se"] = coefficients_json(res.theta_se);
      row["target"] = coefficients_json(res.target);
      rows.push_back(std::move(row));
    }
  }
  Json report;
  report["subcommand"] = "risk";
  report["n"] = data.n();
  report["p"] = data.p();
  report["sigma"] = job.sigma;
  report["rows"] = rows;
  return report;
}

inline Json execute_bounds(const RunConfig& cfg) {
  if (!cfg.bounds) throw ValidationError("bounds: missing bounds section in config");
  const RunConfig::BoundsJob& job = *cfg.bounds;
  Dataset data = materialize(cfg);
  const std::size_t n = data.n(), p = data.p();

  Vector theta0 = job.theta0;
  if (theta0.empty() && cfg.dgp) theta0 = cfg.dgp->theta0;
  if (theta0.size() != p) throw ValidationError("bounds: theta0 length does not match design");

  std::vector<std::size_t> support = job.support;
  if (support.empty())
    for (std::size_t j = 0; j < p; ++j)
      if (theta0[j] != 0.0) support.push_back(j);

  double col_bound = 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += data.x(i, j) * data.x(i, j);
    col_bound = std::max(col_bound, std::sqrt(ss / static_cast<double>(n)));
  }

  BoundInputs in;
  in.lambda = job.lambda;
  in.s0 = support.size();
  in.theta0_l1 = norm1(theta0);
  in.column_bound = col_bound;
  in.sigma = job.sigma;
  in.delta = job.delta;
  in.p = p;
  in.n = n;
  if (job.kappa) {
    in.kappa = *job.kappa;
    in.kappa_source = KappaSource::Exact;
  } else {
    in.kappa = re_constant_bound(data.x, ConeSpec{support, job.alpha}, job.kappa_samples,
                                 job.kappa_refine, cfg.seed);
    in.kappa_source = KappaSource::Sampled;
  }

  BoundReport rep = lasso_bound_report(in, job.mode);
  Json row;
  row["mode"] = job.mode == BoundMode::Deterministic ? "deterministic" : "subgaussian";
  row["lambda"] = rep.lambda;
  row["kappa"] = rep.kappa;
  row["kappa_source"] = to_string(rep.kappa_source);
  row["s0"] = in.s0;
  row["column_bound"] = in.column_bound;
  row["sigma"] = in.sigma;
  row["delta"] = in.delta;
  row["theta0_l1"] = in.theta0_l1;
  row["lemma_pr_bound"] = rep.lemma_pr_bound;
  row["est_bound"] = rep.est_bound;
  row["pr_bound"] = rep.pr_bound;
  row["probability_floor"] = rep.probability_floor;

  Json report;
  report["subcommand"] = "bounds";
  report["n"] = n;
  report["p"] = p;
  report["rows"] = Json::array({row});
  return report;
}

inline Json execute_mc(const RunConfig& cfg) {
  if (!cfg.mc) throw ValidationError("mc: missing mc section in config");
  if (!cfg.dgp) throw ValidationError("mc: requires a dgp input");
  McConfig mc = cfg.mc_cfg;
  mc.workers = cfg.workers;
  mc.base_seed = cfg.seed;

  Json report;
  report["subcommand"] = "mc";
  report["replications"] = mc.replications;
  if (cfg.mc->mode == RunConfig::McJob::Mode::Risk) {
    report["mode"] = "risk";
    McRiskResult res = mc_risk(*cfg.dgp, cfg.estimator, mc);
    std::optional<double> lambda;
    if (cfg.estimator.kind == FitKind::Ridge || cfg.estimator.kind == FitKind::Lasso)
      lambda = cfg.estimator.lambda;
    Json row = risk_row(res.report, lambda);
    row["theta_mean"] = coefficients_json(res.theta_mean);
    row["theta_se"] = coefficients_json(res.theta_se);
    row["target"] = coefficients_json(res.target);
    report["rows"] = Json::array({std::move(row)});
  } else {
    report["mode"] = "coverage";
    CoverageResult res = mc_bound_coverage(*cfg.dgp, cfg.mc->coverage, mc);
    Json row;
    row["bound_mode"] =
        cfg.mc->coverage.mode == BoundMode::Deterministic ? "deterministic" : "subgaussian";
    row["replications"] = res.replications;
    row["violations"] = res.violations;
    row["violation_frequency"] = res.violation_frequency;
    row["ceiling"] = res.ceiling;
    row["binomial_se"] = res.binomial_se;
    row["kappa"] = cfg.mc->coverage.kappa;
    row["kappa_source"] = to_string(cfg.mc->coverage.kappa_source);
    row["audits_run"] = res.audits_run;
    row["audits_failed"] = res.audits_failed;
    report["rows"] = Json::array({std::move(row)});
  }
  return report;
}

// Expands array-valued cells into columns name_1..name_k; scalars pass through.
inline std::string render_csv(const Json& report) {
  const Json& rows = report.at("rows");
  std::string out;
  if (rows.empty()) return out;

  std::vector<std::string> headers;
  for (auto it = rows.front().begin(); it != rows.front().end(); ++it) {
    if (it.value().is_array()) {
      for (std::size_t k = 0; k < it.value().size(); ++k)
        headers.push_back(it.key() + "_" + std::to_string(k + 1));
    } else {
      headers.push_back(it.key());
    }
  }
  for (std::size_t h = 0; h < headers.size(); ++h) {
    if (h) out += ',';
    out += csv_quote(headers[h]);
  }
  out += '\n';

  auto cell = [](const Json& v) -> std::string {
    if (v.is_null()) return "";
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_string()) return csv_quote(v.get<std::string>());
    if (v.is_number_float()) return format_double(v.get<double>());
    return v.dump();
  };
  for (const Json& row : rows) {
    bool first = true;
    for (auto it = row.begin(); it != row.end(); ++it) {
      if (it.value().is_array()) {
        for (const Json& v : it.value()) {
          if (!first) out += ',';
          out += cell(v);
          first = false;
        }
      } else {
        if (!first) out += ',';
        out += cell(it.value());
        first = false;
      }
    }
    out += '\n';
  }
  return out;
}

}  // namespace detail

inline Json execute(const RunConfig& cfg) {
  switch (cfg.subcommand) {
    case Subcommand::Fit: return detail::execute_fit(cfg);
    case Subcommand::Path: return detail::execute_path(cfg);
    case Subcommand::Risk: return detail::execute_risk(cfg);
    case Subcommand::Bounds: return detail::execute_bounds(cfg);
    case Subcommand::Mc: return detail::execute_mc(cfg);
  }
  throw ValidationError("config: unknown subcommand");
}

inline std::string render(const Json& report, Format format) {
  if (format == Format::Csv) return detail::render_csv(report);
  return report.dump(2) + "\n";
}

// Executes the configured job and writes the report to cfg.out (or stdout).
inline void run(const RunConfig& cfg, std::ostream& stdout_stream) {
  const Json report = execute(cfg);
  const std::string text = render(report, cfg.format);
  if (cfg.out.empty()) {
    stdout_stream << text;
    return;
  }
  std::ofstream out(cfg.out, std::ios::binary);
  if (!out) throw IoError("cannot open output file " + cfg.out);
  out << text;
  if (!out) throw IoError("failed writing output file " + cfg.out);
}

// Exit codes: 0 success, 2 input validation, 3 numerical failure, 4 I/O.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const IoError*>(&e)) return 4;
  if (dynamic_cast<const NumericalError*>(&e)) return 3;
  return 2;
}

}  // namespace plsq::cli

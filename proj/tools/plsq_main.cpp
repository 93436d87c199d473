// Batch front door: fit / path / risk / bounds / mc with JSON or CSV reports.
// A JSON config file supplies the full job description; command-line flags
// override individual fields.

#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "plsq/cli.hpp"

namespace {

using plsq::cli::Json;

struct FlagValues {
  std::string config;
  std::string input;
  std::string target;
  bool no_header = false;
  std::string estimator;
  std::optional<double> lambda;
  std::optional<std::size_t> n_lambda;
  std::optional<double> ratio;
  std::optional<double> tol;
  std::optional<std::size_t> max_iter;
  std::optional<std::size_t> radius;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  bool standardize = false;
  std::string out;
  std::string format;
};

void add_common_flags(CLI::App* cmd, FlagValues& f) {
  cmd->add_option("--config", f.config, "JSON config file; flags override its fields");
  cmd->add_option("--input", f.input, "CSV input path");
  cmd->add_option("--target", f.target, "target column (name, or index when no header)");
  cmd->add_flag("--no-header", f.no_header, "CSV input has no header row");
  cmd->add_option("--estimator", f.estimator, "ls|ridgeless|ridge|lasso|l0");
  cmd->add_option("--lambda", f.lambda, "penalty level");
  cmd->add_option("--n-lambda", f.n_lambda, "path grid size");
  cmd->add_option("--ratio", f.ratio, "path grid ratio lambda_min/lambda_max");
  cmd->add_option("--tol", f.tol, "coordinate descent tolerance");
  cmd->add_option("--max-iter", f.max_iter, "coordinate descent cycle limit");
  cmd->add_option("--radius", f.radius, "l0 support-size budget");
  cmd->add_option("--seed", f.seed, "base seed");
  cmd->add_option("--workers", f.workers, "Monte Carlo worker count (0: all cores)");
  cmd->add_flag("--standardize", f.standardize, "standardize internally, report original scale");
  cmd->add_option("--out", f.out, "report file (default: stdout)");
  cmd->add_option("--format", f.format, "json|csv");
}

Json build_job(const std::string& subcommand, const FlagValues& f) {
  Json job;
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw plsq::IoError("cannot open config file " + f.config);
    try {
      job = Json::parse(in);
    } catch (const Json::parse_error& e) {
      throw plsq::ValidationError(std::string("config: ") + e.what());
    }
  }
  job["subcommand"] = subcommand;
  if (!f.input.empty()) {
    Json csv;
    csv["path"] = f.input;
    csv["has_header"] = !f.no_header;
    if (!f.target.empty()) {
      if (f.no_header) csv["target"] = std::stoul(f.target);
      else csv["target"] = f.target;
    }
    job["input"] = Json{{"csv", csv}};
  }
  if (!f.estimator.empty()) job["estimator"]["kind"] = f.estimator;
  if (f.lambda) job["estimator"]["lambda"] = *f.lambda;
  if (f.tol) job["estimator"]["tol"] = *f.tol;
  if (f.max_iter) job["estimator"]["max_iter"] = *f.max_iter;
  if (f.radius) job["estimator"]["radius"] = *f.radius;
  if (f.n_lambda) job["path"]["n_lambda"] = *f.n_lambda;
  if (f.ratio) job["path"]["ratio"] = *f.ratio;
  if (f.seed) job["seed"] = *f.seed;
  if (f.workers) job["workers"] = *f.workers;
  if (f.standardize) job["standardize"] = true;
  if (!f.out.empty()) job["out"] = f.out;
  if (!f.format.empty()) job["format"] = f.format;
  return job;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"penalized least squares toolkit"};
  app.require_subcommand(1);

  FlagValues flags;
  const char* names[] = {"fit", "path", "risk", "bounds", "mc"};
  const char* blurbs[] = {
      "fit one estimator and report coefficients",
      "lasso regularization path over a lambda grid",
      "theoretical and/or empirical risk reports",
      "lasso risk-bound report with kappa provenance",
      "Monte Carlo risk or bound-coverage experiment",
  };
  for (int k = 0; k < 5; ++k) add_common_flags(app.add_subcommand(names[k], blurbs[k]), flags);

  CLI11_PARSE(app, argc, argv);

  try {
    const std::string sub = app.get_subcommands().front()->get_name();
    plsq::cli::RunConfig cfg = plsq::cli::parse_config(build_job(sub, flags));
    plsq::cli::run(cfg, std::cout);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return plsq::cli::exit_code_for(e);
  }
}

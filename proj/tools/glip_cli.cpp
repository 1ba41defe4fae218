// Command-line front end: scenario execution (run), bound-only evaluation
// (bound) and slope analysis (slope). Exit codes: 0 success / slope pass,
// 1 slope fail, 2 config or usage error, 3 scenario failure, 4 invalid bound
// report (lambda_tilde >= 1).

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "glip/config.hpp"
#include "glip/harness.hpp"
#include "glip/metrics.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitSlopeFail = 1;
constexpr int kExitConfig = 2;
constexpr int kExitScenario = 3;
constexpr int kExitInvalidBound = 4;

std::string fmt17(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag_seed,
                           const glip::CliConfig& cfg) {
  if (flag_seed) return *flag_seed;
  if (cfg.seed_from_config) return cfg.scenario.master_seed;
  if (const char* env = std::getenv("GLIP_SEED")) return std::strtoull(env, nullptr, 10);
  return 1;
}

int cmd_run(const std::string& config_path, const std::string& out_path,
            std::optional<std::uint64_t> seed, std::optional<int> replicates,
            int parallel, bool dump_config, bool timings) {
  glip::CliConfig cfg;
  try {
    cfg = glip::CliConfig::load(config_path);
    cfg.scenario.master_seed = resolve_seed(seed, cfg);
    if (replicates) cfg.scenario.replicates = *replicates;
    cfg.scenario.parallel = parallel;
    if (timings) cfg.scenario.timings = true;
    cfg.scenario.validate();
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  if (dump_config) {
    std::cout << cfg.normalized().dump(2) << "\n";
    return kExitOk;
  }
  if (out_path.empty()) {
    std::cerr << "config error: --out is required\n";
    return kExitConfig;
  }
  try {
    const glip::ResultTable table = glip::run_scenario(cfg.scenario, cfg.overrides);
    std::ofstream csv(out_path);
    if (!csv) {
      std::cerr << "config error: cannot write '" << out_path << "'\n";
      return kExitConfig;
    }
    table.write_csv(csv);
    std::ofstream sidecar(out_path + ".json");
    sidecar << table.sidecar_json().dump(2) << "\n";
    int failed = 0;
    for (const auto& r : table.rows)
      if (r.failed) ++failed;
    std::cerr << "wrote " << table.rows.size() << " rows to " << out_path << " ("
              << failed << " failed)\n";
    return kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return kExitScenario;
  }
}

int cmd_bound(const std::string& config_path, double tau, std::optional<double> delta,
              std::optional<std::pair<double, double>> delta_auto) {
  glip::CliConfig cfg;
  glip::BoundReport report;
  try {
    cfg = glip::CliConfig::load(config_path);
    if (!(tau > 0.0)) throw std::invalid_argument("--tau must be positive");
    double d;
    if (delta && delta_auto)
      throw std::invalid_argument("--delta and --delta-auto are mutually exclusive");
    if (delta) {
      d = *delta;
      if (!(d > 0.0)) throw std::invalid_argument("--delta must be positive");
    } else if (delta_auto) {
      d = glip::delta_schedule(tau, delta_auto->second, delta_auto->first);
    } else {
      d = glip::default_bound_delta(tau);
    }
    const glip::GlipProblem problem = glip::build_problem(cfg.scenario, tau, cfg.overrides);
    const double rho = [&]() {
      switch (problem.noise().kind()) {
        case glip::NoiseKind::Gaussian:
          return glip::kyfan_bound_gaussian(tau * problem.noise().sigma2().sum());
        case glip::NoiseKind::ScaledPoisson: {
          if ((problem.y_exact().array() <= 0.0).any()) return 0.0;
          return glip::kyfan_bound_poisson(problem.y_exact(), tau);
        }
        case glip::NoiseKind::ShiftedExponential:
          return glip::kyfan_bound_exponential(problem.noise().rate().minCoeff(), tau);
        default:
          return 0.0;
      }
    }();
    if (glip::scenario_is_boundary(cfg.scenario.name)) {
      report = glip::boundary_bound(problem, rho, d);
    } else {
      report = glip::interior_bound(problem, rho, d);
    }
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  std::cout << report.to_json().dump(2) << "\n";
  return report.valid ? kExitOk : kExitInvalidBound;
}

int cmd_slope(const std::string& in_path, const std::string& predicted_str, double tol) {
  if (tol < 0.0) {
    std::cerr << "config error: --tol must be nonnegative\n";
    return kExitConfig;
  }
  double predicted;
  try {
    if (predicted_str == "well-posed-interior")
      predicted = glip::predicted_exponent(glip::ProblemClass::WellPosedInterior);
    else if (predicted_str == "ill-posed-interior")
      predicted = glip::predicted_exponent(glip::ProblemClass::IllPosedInterior);
    else if (predicted_str == "boundary-well-posed")
      predicted = glip::predicted_exponent(glip::ProblemClass::BoundaryWellPosed);
    else {
      std::size_t pos = 0;
      predicted = std::stod(predicted_str, &pos);
      if (pos != predicted_str.size())
        throw std::invalid_argument("not a number or class name");
    }
  } catch (const std::exception&) {
    std::cerr << "config error: --predicted must be a number or one of "
                 "well-posed-interior | ill-posed-interior | boundary-well-posed\n";
    return kExitConfig;
  }

  glip::RateFit fit;
  try {
    std::ifstream in(in_path);
    if (!in) throw std::runtime_error("cannot open '" + in_path + "'");
    const glip::ResultTable table = glip::ResultTable::read_csv(in);
    fit = glip::fit_slope(table);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  const glip::Verdict v = glip::compare(fit, predicted, tol);
  nlohmann::json j;
  j["slope"] = fit.slope;
  j["intercept"] = fit.intercept;
  j["slope_stderr"] = fit.slope_stderr;
  j["r_squared"] = fit.r_squared;
  j["points"] = fit.points;
  j["regressor"] = "log(tau*log(1/tau))";
  j["predicted"] = v.predicted;
  j["tolerance"] = v.tolerance;
  j["abs_error"] = v.abs_error;
  j["pass"] = v.pass;
  std::cout << j.dump(2) << "\n";
  return v.pass ? kExitOk : kExitSlopeFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo laboratory for posterior contraction in generalized "
               "linear inverse problems"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "execute a scenario and write CSV results");
  std::string run_config, run_out;
  std::optional<std::uint64_t> run_seed;
  std::optional<int> run_replicates;
  int run_parallel = 1;
  bool run_dump = false, run_timings = false;
  run->add_option("--config", run_config, "scenario config JSON")->required();
  run->add_option("--out", run_out, "output CSV path (sidecar: <out>.json)");
  run->add_option("--seed", run_seed, "master seed override");
  run->add_option("--replicates", run_replicates, "replicate count override");
  run->add_option("--parallel", run_parallel, "worker threads for replicates");
  run->add_flag("--dump-config", run_dump, "print the normalized config and exit");
  run->add_flag("--timings", run_timings,
                "record wall-clock per row (breaks byte-level determinism)");

  // bound
  auto* bound = app.add_subcommand("bound", "print the theoretical bound report");
  std::string bound_config;
  double bound_tau = 0.0;
  std::optional<double> bound_delta;
  std::vector<double> bound_delta_auto;
  bound->add_option("--config", bound_config, "scenario config JSON")->required();
  bound->add_option("--tau", bound_tau, "dispersion value")->required();
  bound->add_option("--delta", bound_delta, "localization radius");
  bound->add_option("--delta-auto", bound_delta_auto,
                    "a and alpha for the schedule [-tau log tau]^{1/((1+a)alpha)}")
      ->expected(2);

  // slope
  auto* slope = app.add_subcommand("slope", "fit a contraction slope from results");
  std::string slope_in, slope_predicted;
  double slope_tol = 0.0;
  slope->add_option("--in", slope_in, "results CSV")->required();
  slope->add_option("--predicted", slope_predicted, "predicted exponent or class name")
      ->required();
  slope->add_option("--tol", slope_tol, "slope tolerance")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (run->parsed())
    return cmd_run(run_config, run_out, run_seed, run_replicates, run_parallel,
                   run_dump, run_timings);
  if (bound->parsed()) {
    std::optional<std::pair<double, double>> da;
    if (!bound_delta_auto.empty())
      da = std::make_pair(bound_delta_auto[0], bound_delta_auto[1]);
    return cmd_bound(bound_config, bound_tau, bound_delta, da);
  }
  if (slope->parsed()) return cmd_slope(slope_in, slope_predicted, slope_tol);
  return kExitConfig;
}

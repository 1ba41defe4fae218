#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "glip/bounds.hpp"
#include "glip/infer.hpp"

namespace glip {

enum class ScenarioName {
  WellPosedGaussian,
  IllPosedGaussian,
  WellPosedPoisson,
  IllPosedPoisson,
  GridVolterra,
  SpectralPoisson,
  SpectralGaussian,
  BoundaryPoisson,
  BoundaryExponential,
};

const char* scenario_name_str(ScenarioName s);
ScenarioName scenario_name_from(const std::string& s);
bool scenario_is_boundary(ScenarioName s);

enum class GammaRuleKind { Constant, IllPosedSchedule, SpectralSchedule };

struct GammaRule {
  GammaRuleKind kind = GammaRuleKind::Constant;
  double constant = 1.0;
};

struct ScenarioConfig {
  ScenarioName name = ScenarioName::WellPosedGaussian;
  std::vector<double> tau_grid;
  GammaRule gamma_rule;
  int replicates = 200;
  int inner_draws = 2000;
  std::uint64_t master_seed = 1;
  int p = 0;  // 0: scenario default
  int n = 0;
  double alpha = 1.0;
  double beta = 2.0;
  double kappa = 2.0;
  int parallel = 1;
  bool timings = false;
  SamplerConfig sampler{-1, -1, 0.3, 0.0};  // negative: scenario default

  void validate() const;
};

struct ResultRow {
  std::string scenario;
  double tau = 0.0;
  double gamma = 0.0;
  double nu = 0.0;
  int n = 0;
  int p = 0;
  int replicates = 0;
  int inner_draws = 0;
  double kf_data_empirical = 0.0;
  double kf_data_bound = 0.0;
  double kf_posterior_empirical = 0.0;
  double bound_overall = 0.0;
  double bound_bias_random = 0.0;
  double bound_bias_prior = 0.0;
  double bound_variance = 0.0;
  double x_star_offset = 0.0;
  bool failed = false;
  std::int64_t wall_ms = 0;
  std::uint64_t seed = 0;

  // sidecar payload
  BoundReport report;
  bool report_available = false;
  std::string report_error;
  std::vector<std::string> replicate_errors;
  double mean_acceptance = 1.0;
  double kf_posterior_stderr = 0.0;
};

struct ResultTable {
  std::vector<ResultRow> rows;

  void write_csv(std::ostream& os) const;
  nlohmann::json sidecar_json() const;
  static ResultTable read_csv(std::istream& is);
};

// Scenario-appropriate default: the ill-posed schedule for rank-deficient
// scenarios, the spectral schedule for spectral ones, constant 1 otherwise.
GammaRule default_gamma_rule(ScenarioName name);

double gamma_for_tau(const ScenarioConfig& config, double tau);
GlipProblem build_problem(const ScenarioConfig& config, double tau);
// Scenario-specific overrides (operator, prior, noise parameters) are layered
// on by the config front end; see config.hpp.
GlipProblem build_problem(const ScenarioConfig& config, double tau,
                          const nlohmann::json& overrides);

ResultTable run_scenario(const ScenarioConfig& config);
ResultTable run_scenario(const ScenarioConfig& config, const nlohmann::json& overrides);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double r_squared = 0.0;
  int points = 0;
  // regressor convention: log(tau * log(1/tau))
};

RateFit fit_slope(const ResultTable& table);
RateFit fit_slope(const std::vector<double>& tau, const std::vector<double>& kf);

struct Verdict {
  bool pass = false;
  double slope = 0.0;
  double predicted = 0.0;
  double tolerance = 0.0;
  double abs_error = 0.0;
};

Verdict compare(const RateFit& fit, double predicted, double tolerance);

// Default localization radius used for per-row bound reports.
double default_bound_delta(double tau);

}  // namespace glip

#include "glip/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "glip/metrics.hpp"

namespace glip {

//============================================================================
// Names and schedules
//============================================================================

const char* scenario_name_str(ScenarioName s) {
  switch (s) {
    case ScenarioName::WellPosedGaussian: return "well_posed_gaussian";
    case ScenarioName::IllPosedGaussian: return "ill_posed_gaussian";
    case ScenarioName::WellPosedPoisson: return "well_posed_poisson";
    case ScenarioName::IllPosedPoisson: return "ill_posed_poisson";
    case ScenarioName::GridVolterra: return "grid_volterra";
    case ScenarioName::SpectralPoisson: return "spectral_poisson";
    case ScenarioName::SpectralGaussian: return "spectral_gaussian";
    case ScenarioName::BoundaryPoisson: return "boundary_poisson";
    case ScenarioName::BoundaryExponential: return "boundary_exponential";
  }
  return "unknown";
}

ScenarioName scenario_name_from(const std::string& s) {
  for (ScenarioName name :
       {ScenarioName::WellPosedGaussian, ScenarioName::IllPosedGaussian,
        ScenarioName::WellPosedPoisson, ScenarioName::IllPosedPoisson,
        ScenarioName::GridVolterra, ScenarioName::SpectralPoisson,
        ScenarioName::SpectralGaussian, ScenarioName::BoundaryPoisson,
        ScenarioName::BoundaryExponential}) {
    if (s == scenario_name_str(name)) return name;
  }
  throw std::invalid_argument("unknown scenario: '" + s + "'");
}

bool scenario_is_boundary(ScenarioName s) {
  return s == ScenarioName::BoundaryPoisson || s == ScenarioName::BoundaryExponential;
}

void ScenarioConfig::validate() const {
  if (tau_grid.empty()) throw std::invalid_argument("config: tau grid is empty");
  for (std::size_t i = 0; i < tau_grid.size(); ++i) {
    if (!(tau_grid[i] > 0.0)) throw std::invalid_argument("config: tau must be positive");
    if (i > 0 && !(tau_grid[i] < tau_grid[i - 1]))
      throw std::invalid_argument("config: tau grid must be strictly decreasing");
  }
  if (replicates < 1) throw std::invalid_argument("config: replicates must be >= 1");
  if (name != ScenarioName::BoundaryPoisson && replicates < 50)
    throw std::invalid_argument("config: slope scenarios need replicates >= 50");
  if (inner_draws < 100)
    throw std::invalid_argument("config: inner_draws must be >= 100");
  if (parallel < 1) throw std::invalid_argument("config: parallel must be >= 1");
  if (p < 0 || n < 0) throw std::invalid_argument("config: p and n must be nonnegative");
  if (gamma_rule.kind == GammaRuleKind::Constant && !(gamma_rule.constant > 0.0))
    throw std::invalid_argument("config: constant gamma must be positive");
}

namespace {

double spectral_information_exponent(ScenarioName name, double alpha, double beta) {
  if (name == ScenarioName::SpectralPoisson)
    return poisson_information_exponent(alpha, beta);
  return 0.0;  // Gaussian
}

}  // namespace

GammaRule default_gamma_rule(ScenarioName name) {
  GammaRule rule;
  if (name == ScenarioName::IllPosedGaussian || name == ScenarioName::IllPosedPoisson)
    rule.kind = GammaRuleKind::IllPosedSchedule;
  else if (name == ScenarioName::SpectralPoisson || name == ScenarioName::SpectralGaussian)
    rule.kind = GammaRuleKind::SpectralSchedule;
  return rule;
}

double gamma_for_tau(const ScenarioConfig& config, double tau) {
  switch (config.gamma_rule.kind) {
    case GammaRuleKind::Constant:
      return config.gamma_rule.constant;
    case GammaRuleKind::IllPosedSchedule:
      return std::sqrt(ill_posed_gamma_squared(tau));
    case GammaRuleKind::SpectralSchedule: {
      const double s = spectral_information_exponent(config.name, config.alpha, config.beta);
      const double m = 2.0 * config.alpha - s + 2.0 * config.kappa + 1.0;
      const double denom =
          2.0 * std::min(config.beta, m) + 2.0 * config.alpha + 1.0 - s;
      const double expo = denom > 0.0 ? m / denom : 1.0;
      const double lt = tau * std::log(1.0 / tau);
      const double nu = std::pow(lt, expo);
      return std::sqrt(tau / nu);
    }
  }
  throw std::logic_error("gamma_for_tau: unknown rule");
}

double default_bound_delta(double tau) {
  return std::sqrt(-tau * std::log(std::min(tau, 0.3)));
}

//============================================================================
// Scenario problem construction
//============================================================================

namespace {

Mat band_matrix(int n, int p, double diag, double off) {
  Mat a = Mat::Zero(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) {
      if (i == j) a(i, j) = diag;
      else if (std::abs(i - j) == 1) a(i, j) = off;
    }
  }
  return a;
}

// Rank-2 matrices built from two fixed profiles.
Mat rank2_signed(int n, int p) {
  Vec v1(p), v2(p);
  for (int j = 0; j < p; ++j) {
    v1[j] = std::pow(2.0, -j);
    v2[j] = std::pow(2.0, -(p - 1 - j));
  }
  Mat a = Mat::Zero(n, p);
  for (int i = 0; i < n; ++i) {
    switch (i % 4) {
      case 0: a.row(i) = v1.transpose(); break;
      case 1: a.row(i) = v2.transpose(); break;
      case 2: a.row(i) = (v1 + v2).transpose(); break;
      case 3: a.row(i) = (v1 - v2).transpose(); break;
    }
  }
  return a;
}

Mat rank2_nonneg(int n, int p) {
  Vec v1(p), v2(p);
  for (int j = 0; j < p; ++j) {
    v1[j] = 1.0 / (1.0 + j);
    v2[j] = 1.0 / (p - j);
  }
  Mat a = Mat::Zero(n, p);
  for (int i = 0; i < n; ++i) {
    switch (i % 4) {
      case 0: a.row(i) = v1.transpose(); break;
      case 1: a.row(i) = v2.transpose(); break;
      case 2: a.row(i) = (0.5 * v1 + 0.5 * v2).transpose(); break;
      case 3: a.row(i) = (0.3 * v1 + 0.7 * v2).transpose(); break;
    }
  }
  return a;
}

Vec default_x_true(ScenarioName name, int p) {
  Vec x(p);
  switch (name) {
    case ScenarioName::WellPosedGaussian:
    case ScenarioName::IllPosedGaussian:
      for (int j = 0; j < p; ++j) x[j] = 1.0 + 0.5 * std::cos(1.0 + j);
      break;
    case ScenarioName::WellPosedPoisson:
    case ScenarioName::IllPosedPoisson:
      for (int j = 0; j < p; ++j) x[j] = 1.2 + 0.4 * std::sin(1.0 + j);
      break;
    case ScenarioName::GridVolterra:
      for (int j = 0; j < p; ++j) {
        const double u = static_cast<double>(j + 1) / p;
        x[j] = 1.0 + std::sin(2.0 * M_PI * u);
      }
      break;
    case ScenarioName::BoundaryPoisson:
    case ScenarioName::BoundaryExponential:
      x.setZero();
      break;
    default:
      x.setOnes();
      break;
  }
  return x;
}

}  // namespace

GlipProblem build_problem(const ScenarioConfig& config, double tau) {
  return build_problem(config, tau, nlohmann::json::object());
}

GlipProblem build_problem(const ScenarioConfig& config, double tau,
                          const nlohmann::json& overrides) {
  const double gamma = gamma_for_tau(config, tau);

  int p = config.p;
  int n = config.n;
  switch (config.name) {
    case ScenarioName::GridVolterra:
      if (p == 0) p = 8;
      if (n == 0) n = 32;
      break;
    case ScenarioName::SpectralPoisson:
    case ScenarioName::SpectralGaussian:
      if (p == 0) p = 100;
      n = p;
      break;
    case ScenarioName::BoundaryExponential:
      if (p == 0) p = 1;
      n = p;
      break;
    default:
      if (p == 0) p = 4;
      if (n == 0) n = p;
      break;
  }

  // Operator
  ForwardOperator op = [&]() -> ForwardOperator {
    if (overrides.contains("operator"))
      return ForwardOperator::from_json(overrides.at("operator"));
    switch (config.name) {
      case ScenarioName::WellPosedGaussian:
        return ForwardOperator::dense(band_matrix(n, p, 1.0, 0.15));
      case ScenarioName::WellPosedPoisson:
      case ScenarioName::BoundaryPoisson:
        return ForwardOperator::dense(band_matrix(n, p, 1.0, 0.2));
      case ScenarioName::IllPosedGaussian:
        return ForwardOperator::dense(rank2_signed(n, p));
      case ScenarioName::IllPosedPoisson:
        return ForwardOperator::dense(rank2_nonneg(n, p));
      case ScenarioName::GridVolterra:
        return ForwardOperator::grid("volterra", n, p);
      case ScenarioName::SpectralPoisson:
      case ScenarioName::SpectralGaussian:
        return ForwardOperator::spectral(config.alpha, p);
      case ScenarioName::BoundaryExponential:
        return ForwardOperator::dense(Mat::Identity(n, p));
    }
    throw std::logic_error("build_problem: unhandled scenario");
  }();
  n = op.n();
  p = op.p();

  // x_true
  Vec x_true;
  if (overrides.contains("x_true")) {
    const auto& xt = overrides.at("x_true");
    x_true.resize(static_cast<Eigen::Index>(xt.size()));
    for (Eigen::Index j = 0; j < x_true.size(); ++j) x_true[j] = xt[j].get<double>();
  } else if (config.name == ScenarioName::SpectralPoisson ||
             config.name == ScenarioName::SpectralGaussian) {
    x_true.resize(p);
    for (int j = 0; j < p; ++j)
      x_true[j] = std::pow(static_cast<double>(j + 1), -config.beta - 0.5);
  } else {
    x_true = default_x_true(config.name, p);
  }

  // Prior
  PriorModel prior = [&]() -> PriorModel {
    if (overrides.contains("prior")) {
      const auto& pj = overrides.at("prior");
      Mat b;
      const auto& spec = pj.at("precision");
      if (spec.is_number()) {
        b = spec.get<double>() * Mat::Identity(p, p);
      } else if (spec.is_array()) {
        if (static_cast<int>(spec.size()) != p)
          throw std::invalid_argument("prior precision list has wrong length");
        b = Mat::Zero(p, p);
        for (int j = 0; j < p; ++j) b(j, j) = spec[j].get<double>();
      } else if (spec.is_string() && spec.get<std::string>() == "sobolev") {
        const double kappa = pj.value("kappa", config.kappa);
        b = Mat::Zero(p, p);
        for (int j = 0; j < p; ++j)
          b(j, j) = std::pow(static_cast<double>(j + 1), 2.0 * kappa + 1.0);
      } else {
        throw std::invalid_argument("prior precision spec must be scalar, list or 'sobolev'");
      }
      Vec m0 = Vec::Zero(p);
      if (pj.contains("mean")) {
        const auto& mj = pj.at("mean");
        if (mj.is_number()) m0.setConstant(mj.get<double>());
        else
          for (int j = 0; j < p; ++j) m0[j] = mj[j].get<double>();
      }
      return PriorModel::gaussian(b, m0, gamma);
    }
    if (config.name == ScenarioName::SpectralPoisson ||
        config.name == ScenarioName::SpectralGaussian) {
      Mat b = Mat::Zero(p, p);
      for (int j = 0; j < p; ++j)
        b(j, j) = std::pow(static_cast<double>(j + 1), 2.0 * config.kappa + 1.0);
      return PriorModel::gaussian(b, Vec::Zero(p), gamma);
    }
    return PriorModel::gaussian(Mat::Identity(p, p), Vec::Zero(p), gamma);
  }();

  // Noise
  NoiseFamily noise = [&]() -> NoiseFamily {
    switch (config.name) {
      case ScenarioName::WellPosedGaussian:
      case ScenarioName::IllPosedGaussian:
      case ScenarioName::GridVolterra:
      case ScenarioName::SpectralGaussian: {
        Vec s2 = Vec::Ones(n);
        if (overrides.contains("sigma2")) {
          const auto& sj = overrides.at("sigma2");
          if (sj.is_number()) s2.setConstant(sj.get<double>());
          else
            for (int i = 0; i < n; ++i) s2[i] = sj[i].get<double>();
        }
        return NoiseFamily::gaussian(s2);
      }
      case ScenarioName::WellPosedPoisson:
      case ScenarioName::IllPosedPoisson:
      case ScenarioName::SpectralPoisson:
      case ScenarioName::BoundaryPoisson:
        return NoiseFamily::scaled_poisson(n);
      case ScenarioName::BoundaryExponential: {
        Vec lam = Vec::Ones(n);
        if (overrides.contains("lambda")) {
          const auto& lj = overrides.at("lambda");
          if (lj.is_number()) lam.setConstant(lj.get<double>());
          else
            for (int i = 0; i < n; ++i) lam[i] = lj[i].get<double>();
        }
        return NoiseFamily::shifted_exponential(lam);
      }
    }
    throw std::logic_error("build_problem: unhandled noise");
  }();

  const Domain domain = (config.name == ScenarioName::WellPosedPoisson ||
                         config.name == ScenarioName::IllPosedPoisson ||
                         config.name == ScenarioName::SpectralPoisson ||
                         scenario_is_boundary(config.name))
                            ? Domain::NonNegOrthant
                            : Domain::AllReals;

  return GlipProblem(std::move(noise), std::move(op), LinkMap::identity(),
                     std::move(prior), std::move(x_true), domain, tau);
}

//============================================================================
// Scenario execution
//============================================================================

namespace {

SamplerConfig sampler_defaults(const ScenarioConfig& config) {
  SamplerConfig cfg = config.sampler;
  SamplerConfig def;
  if (config.name == ScenarioName::SpectralPoisson ||
      config.name == ScenarioName::SpectralGaussian) {
    def.burn_in = 600;
    def.thin = 2;
  } else {
    def.burn_in = 2000;
    def.thin = 5;
  }
  if (cfg.burn_in < 0) cfg.burn_in = def.burn_in;
  if (cfg.thin < 1) cfg.thin = def.thin;
  return cfg;
}

double data_kf_bound(const GlipProblem& problem, double tau, bool scaled_metric) {
  try {
    switch (problem.noise().kind()) {
      case NoiseKind::Gaussian: {
        double trace = tau * problem.noise().sigma2().sum();
        if (scaled_metric) trace /= problem.n();
        return kyfan_bound_gaussian(trace);
      }
      case NoiseKind::ScaledPoisson: {
        const Vec& mu = problem.y_exact();
        if ((mu.array() <= 0.0).any()) return 0.0;  // exact-data boundary case
        if (scaled_metric) {
          // ||Y-mu||/sqrt(n) has the cumulant structure with w/n
          return kyfan_bound_cumulant(Vec::Ones(mu.size()),
                                      mu / static_cast<double>(mu.size()), tau);
        }
        return kyfan_bound_poisson(mu, tau);
      }
      case NoiseKind::ShiftedExponential:
        if (problem.n() == 1) return kyfan_bound_exponential(problem.noise().rate()[0], tau);
        return std::numeric_limits<double>::quiet_NaN();
      default:
        return std::numeric_limits<double>::quiet_NaN();
    }
  } catch (const std::exception&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

struct ReplicateOut {
  double data_dist = 0.0;
  double post_dist = 0.0;
  double accept = 1.0;
  bool ok = false;
  std::string error;
};

}  // namespace

ResultTable run_scenario(const ScenarioConfig& config) {
  return run_scenario(config, nlohmann::json::object());
}

ResultTable run_scenario(const ScenarioConfig& config, const nlohmann::json& overrides) {
  config.validate();
  const SamplerConfig sampler_cfg = sampler_defaults(config);
  const bool scaled_metric = config.name == ScenarioName::GridVolterra;

  ResultTable table;
  int failed_rows = 0;

  for (std::size_t t = 0; t < config.tau_grid.size(); ++t) {
    const double tau = config.tau_grid[t];
    const auto t_start = std::chrono::steady_clock::now();

    ResultRow row;
    row.scenario = scenario_name_str(config.name);
    row.tau = tau;
    row.replicates = config.replicates;
    row.inner_draws = config.inner_draws;
    row.seed = config.master_seed;

    try {
      const GlipProblem problem = build_problem(config, tau, overrides);
      row.gamma = problem.prior().gamma();
      row.nu = problem.nu();
      row.n = problem.n();
      row.p = problem.p();

      const StarPoint xs = glip::solve_x_star(problem, 1e-10);
      row.x_star_offset =
          ((Mat::Identity(problem.p(), problem.p()) - problem.op().range_projector()) *
           (problem.x_true() - xs.x))
              .norm();

      row.kf_data_bound = data_kf_bound(problem, tau, scaled_metric);

      // Theoretical bound report; failures here are recorded, not fatal.
      try {
        const double delta = default_bound_delta(tau);
        const double rho = std::isfinite(row.kf_data_bound) ? row.kf_data_bound : 0.0;
        if (scenario_is_boundary(config.name)) {
          row.report = boundary_bound(problem, rho, delta);
        } else if (scaled_metric) {
          row.report = grid_bound(problem, problem.n(), problem.p(), rho,
                                  delta / std::sqrt(problem.p()));
        } else {
          row.report = interior_bound(problem, rho, delta);
        }
        row.report_available = true;
        row.bound_overall = row.report.valid
                                ? row.report.overall
                                : std::numeric_limits<double>::quiet_NaN();
        row.bound_bias_random = row.report.random_bias;
        row.bound_bias_prior = row.report.prior_bias;
        row.bound_variance = row.report.variance_term;
      } catch (const std::exception& e) {
        row.report_error = e.what();
        row.bound_overall = std::numeric_limits<double>::quiet_NaN();
        row.bound_bias_random = std::numeric_limits<double>::quiet_NaN();
        row.bound_bias_prior = std::numeric_limits<double>::quiet_NaN();
        row.bound_variance = std::numeric_limits<double>::quiet_NaN();
      }

      // Replicates, optionally in parallel. Stream keys depend only on
      // (master seed, tau index, replicate index), so the table is invariant
      // to the parallelism degree.
      std::vector<ReplicateOut> reps(config.replicates);
      std::atomic<int> next{0};
      auto worker = [&]() {
        for (;;) {
          const int r = next.fetch_add(1);
          if (r >= config.replicates) return;
          ReplicateOut& out = reps[r];
          try {
            RngStream data_stream(config.master_seed, t, static_cast<std::uint64_t>(r), 0);
            const Vec y = problem.noise().sample(problem.y_exact(), tau, data_stream);
            out.data_dist = (y - problem.y_exact()).norm() /
                            (scaled_metric ? std::sqrt(problem.n()) : 1.0);
            RngStream mcmc_stream(config.master_seed, t, static_cast<std::uint64_t>(r), 1);
            const SampleResult draws =
                sample_posterior(problem, y, config.inner_draws, mcmc_stream, sampler_cfg);
            out.accept = draws.acceptance_rate;
            const KyFanEstimate kf = prokhorov_to_point(
                draws.draws, xs.x, scaled_metric ? std::sqrt(problem.p()) : 1.0);
            out.post_dist = kf.epsilon;
            out.ok = true;
          } catch (const std::exception& e) {
            out.ok = false;
            out.error = e.what();
          }
        }
      };
      if (config.parallel > 1) {
        std::vector<std::thread> pool;
        const int k = std::min(config.parallel, config.replicates);
        pool.reserve(k);
        for (int i = 0; i < k; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
      } else {
        worker();
      }

      std::vector<double> data_dists, post_dists;
      double accept_sum = 0.0;
      for (const auto& rep : reps) {
        if (!rep.ok) {
          row.failed = true;
          row.replicate_errors.push_back(rep.error);
          continue;
        }
        data_dists.push_back(rep.data_dist);
        post_dists.push_back(rep.post_dist);
        accept_sum += rep.accept;
      }
      if (!data_dists.empty()) {
        row.kf_data_empirical = kyfan_empirical(data_dists).epsilon;
        const KyFanEstimate post = kyfan_empirical(post_dists);
        row.kf_posterior_empirical = post.epsilon;
        row.kf_posterior_stderr = post.standard_error_hint;
        row.mean_acceptance = accept_sum / static_cast<double>(data_dists.size());
      } else {
        row.failed = true;
      }
    } catch (const std::exception& e) {
      row.failed = true;
      row.replicate_errors.push_back(e.what());
    }

    if (config.timings) {
      row.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - t_start)
                        .count();
    }
    if (row.failed) ++failed_rows;
    table.rows.push_back(std::move(row));
  }

  if (failed_rows * 10 > static_cast<int>(table.rows.size())) {
    std::ostringstream os;
    os << "run_scenario: " << failed_rows << " of " << table.rows.size()
       << " rows failed (more than 10%)";
    throw std::runtime_error(os.str());
  }
  return table;
}

//============================================================================
// CSV / sidecar
//============================================================================

namespace {

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void ResultTable::write_csv(std::ostream& os) const {
  os << "scenario,tau,gamma,nu,n,p,replicates,inner_draws,kf_data_empirical,"
        "kf_data_bound,kf_posterior_empirical,bound_overall,bound_bias_random,"
        "bound_bias_prior,bound_variance,x_star_offset,failed,wall_ms,seed\n";
  for (const auto& r : rows) {
    os << r.scenario << ',' << fmt_double(r.tau) << ',' << fmt_double(r.gamma) << ','
       << fmt_double(r.nu) << ',' << r.n << ',' << r.p << ',' << r.replicates << ','
       << r.inner_draws << ',' << fmt_double(r.kf_data_empirical) << ','
       << fmt_double(r.kf_data_bound) << ',' << fmt_double(r.kf_posterior_empirical)
       << ',' << fmt_double(r.bound_overall) << ',' << fmt_double(r.bound_bias_random)
       << ',' << fmt_double(r.bound_bias_prior) << ',' << fmt_double(r.bound_variance)
       << ',' << fmt_double(r.x_star_offset) << ',' << (r.failed ? 1 : 0) << ','
       << r.wall_ms << ',' << r.seed << '\n';
  }
}

nlohmann::json ResultTable::sidecar_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    nlohmann::json j;
    j["row"] = i;
    j["scenario"] = r.scenario;
    j["tau"] = r.tau;
    j["failed"] = r.failed;
    j["mean_acceptance"] = r.mean_acceptance;
    j["kf_posterior_stderr"] = r.kf_posterior_stderr;
    if (r.report_available) j["bound_report"] = r.report.to_json();
    if (!r.report_error.empty()) j["bound_error"] = r.report_error;
    if (!r.replicate_errors.empty()) j["replicate_errors"] = r.replicate_errors;
    out.push_back(std::move(j));
  }
  return out;
}

ResultTable ResultTable::read_csv(std::istream& is) {
  ResultTable table;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("read_csv: empty file");
  const std::string expected =
      "scenario,tau,gamma,nu,n,p,replicates,inner_draws,kf_data_empirical,"
      "kf_data_bound,kf_posterior_empirical,bound_overall,bound_bias_random,"
      "bound_bias_prior,bound_variance,x_star_offset,failed,wall_ms,seed";
  if (line != expected) throw std::runtime_error("read_csv: unexpected header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 19) throw std::runtime_error("read_csv: malformed row");
    ResultRow r;
    r.scenario = fields[0];
    r.tau = std::stod(fields[1]);
    r.gamma = std::stod(fields[2]);
    r.nu = std::stod(fields[3]);
    r.n = std::stoi(fields[4]);
    r.p = std::stoi(fields[5]);
    r.replicates = std::stoi(fields[6]);
    r.inner_draws = std::stoi(fields[7]);
    r.kf_data_empirical = std::stod(fields[8]);
    r.kf_data_bound = std::stod(fields[9]);
    r.kf_posterior_empirical = std::stod(fields[10]);
    r.bound_overall = std::stod(fields[11]);
    r.bound_bias_random = std::stod(fields[12]);
    r.bound_bias_prior = std::stod(fields[13]);
    r.bound_variance = std::stod(fields[14]);
    r.x_star_offset = std::stod(fields[15]);
    r.failed = fields[16] != "0";
    r.wall_ms = std::stoll(fields[17]);
    r.seed = std::stoull(fields[18]);
    table.rows.push_back(std::move(r));
  }
  return table;
}

//============================================================================
// Slope fitting
//============================================================================

RateFit fit_slope(const std::vector<double>& tau, const std::vector<double>& kf) {
  if (tau.size() != kf.size()) throw std::invalid_argument("fit_slope: size mismatch");
  if (tau.size() < 4)
    throw std::invalid_argument("fit_slope: need at least 4 grid points");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    if (!(tau[i] > 0.0) || tau[i] >= 1.0)
      throw std::invalid_argument("fit_slope: tau must lie in (0, 1)");
    if (!(kf[i] > 0.0))
      throw std::invalid_argument(
          "fit_slope: nonpositive empirical Ky Fan distance (exact-data boundary "
          "case); use the boundary-specific analysis instead");
    x.push_back(std::log(tau[i] * std::log(1.0 / tau[i])));
    y.push_back(std::log(kf[i]));
  }
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("fit_slope: degenerate regressor");

  RateFit fit;
  fit.points = static_cast<int>(x.size());
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (fit.intercept + fit.slope * x[i]);
    ssr += e * e;
  }
  fit.r_squared = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
  fit.slope_stderr = (x.size() > 2) ? std::sqrt(ssr / (n - 2.0) / sxx) : 0.0;
  return fit;
}

RateFit fit_slope(const ResultTable& table) {
  std::vector<double> tau, kf;
  for (const auto& r : table.rows) {
    if (r.failed) continue;
    tau.push_back(r.tau);
    kf.push_back(r.kf_posterior_empirical);
  }
  return fit_slope(tau, kf);
}

Verdict compare(const RateFit& fit, double predicted, double tolerance) {
  Verdict v;
  v.slope = fit.slope;
  v.predicted = predicted;
  v.tolerance = tolerance;
  v.abs_error = std::abs(fit.slope - predicted);
  v.pass = v.abs_error <= tolerance;
  return v;
}

}  // namespace glip

#include "glip/bounds.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "glip/numeric.hpp"

namespace glip {

namespace {

constexpr double kInvE = 0.36787944117144233;

double spectral_norm(const Mat& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()[0];
}

}  // namespace

nlohmann::json BoundReport::to_json() const {
  nlohmann::json j;
  j["valid"] = valid;
  if (!valid) j["invalid_reason"] = invalid_reason;
  j["random_bias_coeff"] = random_bias_coeff;
  j["random_bias"] = random_bias;
  j["prior_bias"] = prior_bias;
  j["variance_term"] = variance_term;
  j["data_term"] = data_term;
  j["tail_evaluated"] = tail_evaluated;
  if (tail_evaluated) j["tail_term"] = tail_term;
  j["overall"] = overall;
  nlohmann::json d;
  d["lambda_tilde"] = diag.lambda_tilde;
  d["d_norm"] = diag.d_norm;
  d["trace_h_nu_inv"] = diag.trace_h_nu_inv;
  d["lambda_min_h_nu"] = diag.lambda_min_h_nu;
  d["r_delta"] = diag.r_delta;
  d["delta_star_k"] = diag.delta_star_k;
  d["c1"] = diag.c1;
  d["c2"] = diag.c2;
  d["delta11"] = diag.delta11;
  d["delta1_star"] = diag.delta1_star;
  d["delta4_star"] = diag.delta4_star;
  d["delta5_star"] = diag.delta5_star;
  d["b_star_min"] = diag.b_star_min;
  d["warnings"] = diag.warnings;
  j["diagnostics"] = d;
  return j;
}

//============================================================================
// Interior bound
//============================================================================

namespace {

struct InteriorPieces {
  StarPoint xs;
  Mat h_nu;
  double lambda_min = 0.0;
  double trace_inv = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double lambda_tilde = 0.0;
  double d_norm = 0.0;
  Mat h_nu_inv;
  Vec grad_g;
};

InteriorPieces interior_pieces(const GlipProblem& problem, double rho_data,
                               double delta) {
  if (rho_data < 0.0) throw std::invalid_argument("interior_bound: rho_data must be >= 0");
  if (delta < 0.0) throw std::invalid_argument("interior_bound: delta must be >= 0");

  InteriorPieces pc;
  pc.xs = solve_x_star(problem, 1e-10);
  if (problem.domain() == Domain::NonNegOrthant && !pc.xs.interior)
    throw std::domain_error("interior_bound: x_star is not an interior point");

  const Mat& a = problem.op().matrix();
  const double nu = problem.nu();
  const Vec& y_ex = problem.y_exact();

  const Vec mu = problem.op().apply(pc.xs.x);
  const Vec eta = problem.link().apply(mu);
  const Vec g1 = problem.link().jacobian_diag(mu);
  const Vec hf = problem.noise().hess_eta_diag(y_ex, eta);
  const Vec gf = problem.noise().grad_eta(y_ex, eta);
  const Vec g2 = problem.link().second_derivative_diag(mu);
  const Vec mid = (g1.array().square() * hf.array() + g2.array() * gf.array()).matrix();

  const Mat bmat = problem.prior().hess(pc.xs.x);
  pc.h_nu = a.transpose() * mid.asDiagonal() * a + nu * bmat;

  Eigen::SelfAdjointEigenSolver<Mat> es(pc.h_nu);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("interior_bound: H_nu eigensolve failed");
  pc.lambda_min = es.eigenvalues().minCoeff();
  if (!(pc.lambda_min > 0.0))
    throw std::domain_error("interior_bound: H_nu is not of full rank");
  pc.trace_inv = es.eigenvalues().cwiseInverse().sum();
  pc.h_nu_inv = es.eigenvectors() *
                es.eigenvalues().cwiseInverse().asDiagonal() *
                es.eigenvectors().transpose();

  const NoiseConstants nc =
      noise_constants(problem.noise(), y_ex, delta, rho_data, problem.op().operator_norm());
  const Mat cg = problem.prior().curvature_variation(pc.xs.x, delta);
  const Mat d = a.transpose() * nc.c_f.asDiagonal() * a * problem.op().operator_norm() +
                nu * cg;
  pc.d_norm = spectral_norm(d);
  pc.lambda_tilde = delta * spectral_norm(pc.h_nu_inv * d) +
                    rho_data * spectral_norm(pc.h_nu_inv * a.transpose() *
                                             nc.m_f2.asDiagonal() * a);

  pc.grad_g = problem.prior().grad(pc.xs.x);
  pc.c1 = spectral_norm(pc.h_nu_inv * a.transpose() * nc.m_f1.asDiagonal());
  pc.c2 = (pc.h_nu_inv * pc.grad_g).norm();
  return pc;
}

// Monte Carlo estimate of Delta0: importance sampling of the integral of
// exp(-[h(x) - h(x*)]/tau) outside B(x*, delta) with the Laplace Gaussian as
// proposal, against the closed-form local integral.
double estimate_delta0(const GlipProblem& problem, const StarPoint& xs, double delta,
                       int budget, RngStream& stream) {
  const int p = problem.p();
  const double tau = problem.tau();
  const double gamma = problem.prior().gamma();
  const Vec& y_ex = problem.y_exact();

  PosteriorSummary s = laplace_summary(problem, y_ex, xs);
  Eigen::LLT<Mat> llt(s.h_nu);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("estimate_delta0: H_nu not positive definite");

  const double h_star = h_value(problem, y_ex, xs.x);
  // log of N(x*, tau Hnu^-1) density constant
  double log_det_h = 0.0;
  {
    Mat l = llt.matrixL();
    for (int i = 0; i < p; ++i) log_det_h += 2.0 * std::log(l(i, i));
  }
  const double log_q_const =
      -0.5 * p * std::log(2.0 * M_PI * tau) + 0.5 * log_det_h;

  double acc = 0.0;
  const double sq_tau = std::sqrt(tau);
  Vec z(p);
  for (int k = 0; k < budget; ++k) {
    for (int i = 0; i < p; ++i) z[i] = stream.normal();
    const Vec x = xs.x + sq_tau * llt.matrixU().solve(z);
    if ((x - xs.x).norm() <= delta) continue;
    const double h = h_value(problem, y_ex, x);
    if (!std::isfinite(h)) continue;
    const double log_q = log_q_const - 0.5 * z.squaredNorm();
    acc += std::exp(-(h - h_star) / tau - log_q);
  }
  const double numerator = acc / budget;

  // Local integral per the closed form: tau^{p0/2} gamma^{p1} (2 pi)^{p/2}
  // exp(x0' H x0 / (2 tau)) / sqrt(det Omega00 det B11).
  const int p0 = problem.op().rank();
  const int p1 = problem.op().null_dim();
  const double log_denom = 0.5 * p0 * std::log(tau) + p1 * std::log(gamma) +
                           0.5 * p * std::log(2.0 * M_PI) +
                           0.5 * s.x0.dot(s.h * s.x0) / tau -
                           0.5 * (s.log_det_omega00 + s.log_det_b11);
  return numerator / std::exp(log_denom);
}

}  // namespace

BoundReport interior_bound(const GlipProblem& problem, double rho_data, double delta,
                           bool evaluate_tail, int tail_budget, RngStream* stream,
                           bool inflate_variance) {
  InteriorPieces pc = interior_pieces(problem, rho_data, delta);
  const double nu = problem.nu();
  const double tau = problem.tau();

  BoundReport r;
  r.diag.lambda_tilde = pc.lambda_tilde;
  r.diag.d_norm = pc.d_norm;
  r.diag.trace_h_nu_inv = pc.trace_inv;
  r.diag.lambda_min_h_nu = pc.lambda_min;
  r.diag.c1 = pc.c1;
  r.diag.c2 = pc.c2;
  r.data_term = 2.0 * rho_data;

  if (pc.lambda_tilde >= 1.0) {
    r.valid = false;
    std::ostringstream os;
    os << "lambda_tilde = " << pc.lambda_tilde
       << " >= 1: the local curvature perturbation is not controlled at this "
          "(delta, rho)";
    r.invalid_reason = os.str();
    r.overall = std::numeric_limits<double>::quiet_NaN();
    return r;
  }

  const double shrink = 1.0 - pc.lambda_tilde;
  r.random_bias_coeff = pc.c1 / shrink;
  r.random_bias = r.random_bias_coeff * rho_data;
  r.prior_bias = (pc.c2 / shrink) * nu;

  const double t = 4.0 * tau * pc.trace_inv;
  if (!(t > 0.0) || t >= kInvE) {
    std::ostringstream os;
    os << "interior_bound: 4 tau trace(H_nu^-1) = " << t
       << " violates the (0, 1/e) precondition";
    throw std::domain_error(os.str());
  }
  r.variance_term = std::sqrt(-t * std::log(t));

  // Correction factor diagnostics for the variance term.
  const double bias_sum = r.random_bias + r.prior_bias;
  const double r_star =
      std::sqrt(pc.lambda_min / tau) * std::sqrt(shrink) * (delta - bias_sum);
  r.diag.r_delta = r_star;
  const double ball = gaussian_ball_probability(problem.p(), r_star);
  double delta_star_k = std::numeric_limits<double>::infinity();
  if (ball > 0.0) {
    delta_star_k = std::exp(delta * pc.d_norm * bias_sum * bias_sum / tau) / ball *
                       std::pow((1.0 + pc.lambda_tilde) / shrink, 0.5 * problem.p()) -
                   1.0 + pc.lambda_tilde;
  }
  r.diag.delta_star_k = delta_star_k;

  if (evaluate_tail) {
    if (tail_budget < 1 || stream == nullptr)
      throw std::invalid_argument(
          "interior_bound: tail evaluation needs a budget and a stream");
    const double d0 = estimate_delta0(problem, pc.xs, delta, tail_budget, *stream);
    r.tail_evaluated = true;
    r.tail_term = d0 / (1.0 + d0);
  }

  double laplace_term = bias_sum + r.variance_term;
  if (inflate_variance && std::isfinite(delta_star_k))
    laplace_term = bias_sum + r.variance_term * (1.0 + std::max(0.0, delta_star_k));
  r.overall = std::max(r.data_term, laplace_term);
  if (r.tail_evaluated) r.overall = std::max(r.overall, r.tail_term);
  return r;
}

//============================================================================
// Delta schedule, boundary bound
//============================================================================

double delta_schedule(double tau, double alpha_growth, double a) {
  if (!(tau > 0.0) || tau >= kInvE)
    throw std::invalid_argument("delta_schedule: tau must lie in (0, 1/e)");
  if (!(alpha_growth > 0.0) || !(alpha_growth < 3.0))
    throw std::invalid_argument("delta_schedule: alpha must lie in (0, 3)");
  if (!(a > 0.0)) throw std::invalid_argument("delta_schedule: a must be positive");
  return std::pow(-tau * std::log(tau), 1.0 / ((1.0 + a) * alpha_growth));
}

BoundReport boundary_bound(const GlipProblem& problem, double rho_data, double delta,
                           bool include_corrections) {
  if (rho_data < 0.0) throw std::invalid_argument("boundary_bound: rho_data must be >= 0");
  if (delta < 0.0) throw std::invalid_argument("boundary_bound: delta must be >= 0");
  if (problem.domain() != Domain::NonNegOrthant)
    throw std::domain_error("boundary_bound: requires the nonnegative orthant domain");

  StarPoint xs = solve_x_star(problem, 1e-10);
  if (xs.x.cwiseAbs().maxCoeff() > 1e-10)
    throw std::domain_error("boundary_bound: x_star is not the origin (pure boundary case)");

  const Mat& a = problem.op().matrix();
  const int p = problem.p();
  const double nu = problem.nu();
  const double tau = problem.tau();
  const Vec& y_ex = problem.y_exact();
  const Vec zero = Vec::Zero(p);

  const Vec mu = problem.op().apply(zero);
  const Vec eta = problem.link().apply(mu);
  const Vec gf = problem.noise().grad_eta(y_ex, eta);
  const Vec g1 = problem.link().jacobian_diag(mu);
  const Vec b_star =
      a.transpose() * (g1.array() * gf.array()).matrix() + nu * problem.prior().grad(zero);

  for (int i = 0; i < p; ++i) {
    if (!(b_star[i] > 0.0)) {
      std::ostringstream os;
      os << "boundary_bound: b*_" << i << " = " << b_star[i]
         << " is not positive; the model is not in the pure-boundary regime";
      throw std::domain_error(os.str());
    }
  }
  const double b_min = b_star.minCoeff();
  const double sq_p = std::sqrt(static_cast<double>(p));
  const double x_arg = tau / (sq_p * b_min);
  if (!(x_arg < 1.0))
    throw std::domain_error("boundary_bound: tau/(sqrt(p) b*_min) must be below 1");
  const double main = -(tau * sq_p / b_min) * std::log(x_arg);

  BoundReport r;
  r.data_term = 2.0 * rho_data;
  r.variance_term = main;
  r.diag.b_star_min = b_min;

  double delta5 = 0.0;
  if (include_corrections) {
    // Scalar curvature bounds over the ball; exact second derivatives at the
    // center (they vanish identically for Poisson data at zero).
    const Vec hd = problem.noise().hess_eta_diag(y_ex, eta);
    const double c_f2 = hd.cwiseAbs().maxCoeff();
    const double c_g2 = problem.prior().hess(zero).cwiseAbs().maxCoeff();
    double delta11 = delta * p * (c_f2 + nu * c_g2 / 2.0) / b_min;
    if (rho_data > 0.0) {
      const NoiseConstants nc = noise_constants(problem.noise(), y_ex, 0.0, rho_data,
                                                problem.op().operator_norm());
      delta11 += nc.m_f1.maxCoeff() * rho_data / b_min;
    }
    r.diag.delta11 = delta11;
    if (delta11 >= 1.0) {
      r.valid = false;
      std::ostringstream os;
      os << "Delta_11 = " << delta11 << " >= 1: boundary perturbation uncontrolled";
      r.invalid_reason = os.str();
      r.overall = std::numeric_limits<double>::quiet_NaN();
      return r;
    }
    const double b_max = b_star.maxCoeff();
    const double decay = 1.0 - std::exp(-b_max * (1.0 + delta11) * delta / (sq_p * tau));
    const double delta1 =
        -1.0 + std::pow((1.0 - delta11) / (1.0 + delta11), p) * std::pow(decay, p);
    const double delta4 = std::log((1.0 + delta1) / 1.0) /
                          std::log(sq_p * b_min * (1.0 - delta11) / tau);
    delta5 = -1.0 + (1.0 + delta4) / (1.0 - delta11) *
                        (1.0 - std::log(1.0 - delta11) / std::log(x_arg));
    r.diag.delta1_star = delta1;
    r.diag.delta4_star = delta4;
    r.diag.delta5_star = delta5;
  }

  r.overall = std::max(r.data_term, main * (1.0 + delta5));
  return r;
}

//============================================================================
// Knapik sums and spectral rates
//============================================================================

KnapikResult knapik_sum(double a, double m, double v, double nu, int n) {
  if (n < 1) throw std::invalid_argument("knapik_sum: n must be >= 1");
  if (!(v > 0.0) || !(nu > 0.0))
    throw std::invalid_argument("knapik_sum: v and nu must be positive");

  KnapikResult res;
  for (int i = 1; i <= n; ++i) {
    const double x = static_cast<double>(i);
    res.exact_sum += std::pow(x, -a - 1.0) / std::pow(1.0 + std::pow(x, -m) / nu, v);
  }

  const double logn = std::log(static_cast<double>(n));
  if (m > 0.0 && a > 0.0) {
    res.branch = 1;
    const double cut = std::min(std::pow(nu, -1.0 / m), static_cast<double>(n));
    const double expo = std::max(v * m - a, 0.0);
    res.bound_shape = std::pow(nu, v) * std::pow(cut, expo) *
                      (a == v * m ? std::max(logn, 0.0) : 1.0);
    if (a == v * m && n == 1) res.bound_shape = 0.0;
  } else if (m > 0.0) {
    if (!(nu <= std::pow(static_cast<double>(n), -m)))
      throw std::invalid_argument(
          "knapik_sum: branch a <= 0, m > 0 requires nu <= n^{-m}");
    res.branch = 2;
    res.bound_shape = std::pow(nu, v) * std::pow(static_cast<double>(n), v * m - a);
  } else {
    res.branch = 3;
    const double expo = std::max(v * m - a, 0.0);
    res.bound_shape = std::pow(nu, v) * std::pow(static_cast<double>(n), expo) *
                      (a == v * m ? std::max(logn, 0.0) : 1.0);
  }
  return res;
}

double poisson_information_exponent(double alpha, double beta) {
  return alpha + beta + 0.5;
}

double gamma_information_exponent(double alpha, double beta) {
  return 2.0 * (alpha + beta + 0.5);
}

SpectralRateResult spectral_rate(const SpectralSpec& spec) {
  const double m = spec.m();
  if (!(m > 0.0)) {
    std::ostringstream os;
    os << "spectral_rate: m = 2 alpha - s + 2 kappa + 1 = " << m << " must be positive";
    throw std::invalid_argument(os.str());
  }
  if (!(spec.kappa > 0.0))
    throw std::invalid_argument("spectral_rate: kappa must be positive");
  if (spec.p < 1) throw std::invalid_argument("spectral_rate: p must be >= 1");
  if (!(spec.tau > 0.0) || !(spec.nu > 0.0))
    throw std::invalid_argument("spectral_rate: tau and nu must be positive");

  const double p = static_cast<double>(spec.p);
  const double cut = std::min(std::pow(spec.nu, -1.0 / m), p);
  const double logp = std::max(std::log(p), 1.0);

  const double t1 = std::pow(std::max(p, std::pow(spec.nu, -1.0 / m)), -spec.beta);
  const double t2 = spec.nu * std::pow(cut, std::max(m - spec.beta, 0.0)) *
                    (spec.beta == m ? std::sqrt(logp) : 1.0);
  const double var_expo = std::max(spec.alpha - 0.5 * spec.s + 0.5, 0.0);
  const double log_factor =
      std::pow(std::log(p / spec.tau),
               0.5 * (1.0 + (spec.s == 2.0 * spec.alpha + 1.0 ? 1.0 : 0.0)));
  const double t3 = std::sqrt(spec.tau) * std::pow(cut, var_expo) * log_factor;

  SpectralRateResult res;
  res.bound_value = t1 + t2 + t3;
  if (spec.s >= 2.0 * spec.alpha + 1.0) {
    res.regime = SpectralRegime::SelfRegularized;
    res.exponent = 0.5;
  } else if (spec.alpha - 0.5 * spec.s + 0.5 > 0.0) {
    res.regime = SpectralRegime::Mild;
    const double mb = std::min(spec.beta, m);
    res.exponent = mb / (2.0 * mb + 2.0 * spec.alpha + 1.0 - spec.s);
  } else {
    throw std::invalid_argument(
        "spectral_rate: no case branch applies (alpha - s/2 + 1/2 <= 0 with s < "
        "2 alpha + 1)");
  }
  return res;
}

double predicted_exponent(ProblemClass cls) {
  switch (cls) {
    case ProblemClass::WellPosedInterior: return 0.5;
    case ProblemClass::IllPosedInterior: return 1.0 / 3.0;
    case ProblemClass::BoundaryWellPosed: return 1.0;
  }
  throw std::invalid_argument("predicted_exponent: unknown class");
}

double predicted_exponent(const SpectralSpec& spec) { return spectral_rate(spec).exponent; }

double ill_posed_gamma_squared(double tau) {
  if (!(tau > 0.0) || tau >= 1.0)
    throw std::invalid_argument("ill_posed_gamma_squared: tau must lie in (0, 1)");
  return std::pow(tau, 2.0 / 3.0) * std::pow(-std::log(tau), -1.0 / 6.0);
}

//============================================================================
// Grid-rescaled bound
//============================================================================

BoundReport grid_bound(const GlipProblem& problem, int n, int p, double rho_tilde,
                       double delta_tilde) {
  if (n < 1 || p < 1) throw std::invalid_argument("grid_bound: n, p must be >= 1");
  if (rho_tilde < 0.0) throw std::invalid_argument("grid_bound: rho_tilde must be >= 0");
  if (!(delta_tilde > 0.0))
    throw std::invalid_argument("grid_bound: delta_tilde must be positive");

  const double sq_p = std::sqrt(static_cast<double>(p));
  const double sq_np = std::sqrt(static_cast<double>(n) / static_cast<double>(p));
  const double rho = rho_tilde * std::sqrt(static_cast<double>(n));
  const double delta = delta_tilde * sq_p;

  InteriorPieces pc = interior_pieces(problem, rho, delta);
  const double nu = problem.nu();
  const double tau = problem.tau();

  BoundReport r;
  r.diag.lambda_tilde = pc.lambda_tilde;
  r.diag.d_norm = pc.d_norm;
  r.diag.trace_h_nu_inv = pc.trace_inv;
  r.diag.lambda_min_h_nu = pc.lambda_min;
  r.diag.c1 = pc.c1;
  r.diag.c2 = pc.c2;
  r.data_term = 2.0 * rho_tilde * sq_np;

  if (pc.lambda_tilde >= 1.0) {
    r.valid = false;
    r.invalid_reason = "lambda_tilde >= 1";
    r.overall = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  const double shrink = 1.0 - pc.lambda_tilde;
  r.random_bias_coeff = pc.c1 / shrink;
  r.random_bias = r.random_bias_coeff * rho_tilde * sq_np;
  r.prior_bias = (nu / sq_p) * pc.c2 / shrink;

  const double t_inner = 4.0 * tau * pc.trace_inv;
  if (!(t_inner > 0.0) || t_inner >= kInvE)
    throw std::domain_error("grid_bound: 4 tau trace(H_nu^-1) violates (0, 1/e)");
  r.variance_term = std::sqrt(-(t_inner / p) * std::log(t_inner));

  // Side conditions of the rescaled statement, recorded rather than enforced.
  const double s1 = rho_tilde * sq_np;
  const double s2 = p * delta_tilde * delta_tilde / (tau * pc.trace_inv);
  const double s3 = tau * pc.trace_inv / p;
  const double s4 = delta_tilde * delta_tilde * rho_tilde * rho_tilde / tau;
  auto warn = [&](const char* name, double value, bool ok) {
    if (!ok) {
      std::ostringstream os;
      os << "side condition " << name << " = " << value << " out of range";
      r.diag.warnings.push_back(os.str());
    }
  };
  warn("rho_tilde*sqrt(n/p)", s1, s1 < 1.0);
  warn("p*delta_tilde^2/(tau*trace)", s2, s2 > 1.0);
  warn("tau*trace/p", s3, s3 < 1.0);
  warn("delta_tilde^2*rho_tilde^2/tau", s4, s4 < 1.0);

  r.overall = std::max(r.data_term, r.random_bias + r.prior_bias + r.variance_term);
  return r;
}

}  // namespace glip

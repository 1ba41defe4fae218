#include "glip/infer.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace glip {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

//============================================================================
// GlipProblem
//============================================================================

GlipProblem::GlipProblem(NoiseFamily noise, ForwardOperator op, LinkMap link,
                         PriorModel prior, Vec x_true, Domain domain, double tau)
    : noise_(std::move(noise)),
      op_(std::move(op)),
      link_(std::move(link)),
      prior_(std::move(prior)),
      x_true_(std::move(x_true)),
      domain_(domain),
      tau_(tau) {
  if (!(tau_ > 0.0)) throw std::invalid_argument("GlipProblem: tau must be positive");
  if (x_true_.size() != op_.p())
    throw std::invalid_argument("GlipProblem: x_true dimension mismatch");
  if (prior_.dim() != op_.p())
    throw std::invalid_argument("GlipProblem: prior dimension mismatch");
  if (noise_.dim() != op_.n())
    throw std::invalid_argument("GlipProblem: noise dimension mismatch");
  if (domain_ == Domain::NonNegOrthant && (x_true_.array() < 0.0).any())
    throw std::invalid_argument("GlipProblem: x_true outside the nonnegative orthant");
  const Vec mu = op_.apply(x_true_);
  if (!link_.in_domain(mu))
    throw std::invalid_argument("GlipProblem: A x_true outside the link domain");
  y_exact_ = link_.apply(mu);
  if (!noise_.likelihood_feasible(y_exact_, y_exact_))
    throw std::invalid_argument("GlipProblem: y_exact inadmissible for the noise family");
}

GlipProblem GlipProblem::with_tau(double tau) const {
  GlipProblem p = *this;
  if (!(tau > 0.0)) throw std::invalid_argument("with_tau: tau must be positive");
  p.tau_ = tau;
  return p;
}

//============================================================================
// h evaluation
//============================================================================

namespace {

bool in_domain(const GlipProblem& problem, const Vec& x) {
  if (problem.domain() == Domain::NonNegOrthant) return (x.array() >= 0.0).all();
  return true;
}

}  // namespace

double h_value(const GlipProblem& problem, const Vec& y, const Vec& x) {
  if (!in_domain(problem, x)) return kInf;
  const Vec mu = problem.op().apply(x);
  if (!problem.link().in_domain(mu)) return kInf;
  const Vec eta = problem.link().apply(mu);
  const double f = problem.noise().neg_loglik(y, eta);
  if (!std::isfinite(f)) return kInf;
  return f + problem.nu() * problem.prior().value(x);
}

HEval h_value_grad_hess(const GlipProblem& problem, const Vec& y, const Vec& x) {
  if (!in_domain(problem, x))
    throw std::domain_error("h_value_grad_hess: x outside the problem domain");
  const Vec mu = problem.op().apply(x);
  if (!problem.link().in_domain(mu))
    throw std::domain_error("h_value_grad_hess: A x outside the link domain");
  const Vec eta = problem.link().apply(mu);
  if (!problem.noise().likelihood_feasible(y, eta))
    throw std::domain_error("h_value_grad_hess: G(Ax) outside the likelihood support");

  const double nu = problem.nu();
  const Mat& a = problem.op().matrix();

  HEval out;
  const Vec gf = problem.noise().grad_eta(y, eta);
  const Vec hf = problem.noise().hess_eta_diag(y, eta);
  const Vec g1 = problem.link().jacobian_diag(mu);
  const Vec g2 = problem.link().second_derivative_diag(mu);

  out.value = problem.noise().neg_loglik(y, eta) + nu * problem.prior().value(x);
  out.grad = a.transpose() * (g1.array() * gf.array()).matrix() +
             nu * problem.prior().grad(x);
  const Vec middle = (g1.array().square() * hf.array() + g2.array() * gf.array()).matrix();
  out.hess = a.transpose() * middle.asDiagonal() * a + nu * problem.prior().hess(x);
  return out;
}

// Diagonal of the effective information matrix M(y) with
// grad^2_x f_y(x) = A^T diag(M) A, evaluated at eta = G(Ax).
static Vec middle_diag(const GlipProblem& problem, const Vec& y, const Vec& x) {
  const Vec mu = problem.op().apply(x);
  const Vec eta = problem.link().apply(mu);
  const Vec gf = problem.noise().grad_eta(y, eta);
  const Vec hf = problem.noise().hess_eta_diag(y, eta);
  const Vec g1 = problem.link().jacobian_diag(mu);
  const Vec g2 = problem.link().second_derivative_diag(mu);
  return (g1.array().square() * hf.array() + g2.array() * gf.array()).matrix();
}

//============================================================================
// MAP
//============================================================================

namespace {

struct Box {
  Vec lo, hi;
};

// Domain box for projected Newton. The shifted-exponential support A x <= y
// is a box only for diagonal operators; other shapes are not supported here.
Box map_box(const GlipProblem& problem, const Vec& y) {
  const int p = problem.p();
  Box box;
  box.lo = Vec::Constant(p, problem.domain() == Domain::NonNegOrthant ? 0.0 : -kInf);
  box.hi = Vec::Constant(p, kInf);
  if (problem.noise().kind() == NoiseKind::ShiftedExponential) {
    if (!problem.link().is_identity() || !problem.op().is_diagonal())
      throw std::invalid_argument(
          "map_estimate: shifted-exponential noise needs an identity link and a "
          "diagonal operator for support handling");
    for (int i = 0; i < p; ++i) {
      const double aii = problem.op().matrix()(i, i);
      if (aii > 0.0) box.hi[i] = y[i] / aii;
      else if (aii < 0.0) box.lo[i] = std::max(box.lo[i], y[i] / aii);
    }
  }
  return box;
}

Vec clamp_to(const Box& box, Vec x) {
  for (Eigen::Index i = 0; i < x.size(); ++i)
    x[i] = std::min(std::max(x[i], box.lo[i]), box.hi[i]);
  return x;
}

double kkt_residual(const Box& box, const Vec& x, const Vec& grad) {
  double r2 = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double r = grad[i];
    if (x[i] <= box.lo[i]) r = std::min(r, 0.0);
    if (x[i] >= box.hi[i]) r = std::max(r, 0.0);
    r2 += r * r;
  }
  return std::sqrt(r2);
}

}  // namespace

Vec map_estimate(const GlipProblem& problem, const Vec& y, const Vec& x_init,
                 double tol, int max_iter, int* iterations) {
  if (!(tol > 0.0)) throw std::invalid_argument("map_estimate: tol must be positive");
  const Box box = map_box(problem, y);
  Vec x = clamp_to(box, x_init);
  double fx = h_value(problem, y, x);
  if (!std::isfinite(fx)) {
    throw std::domain_error(
        "map_estimate: infeasible starting point (likelihood support violated)");
  }

  const int p = problem.p();
  for (int it = 0; it < max_iter; ++it) {
    HEval he = h_value_grad_hess(problem, y, x);
    const double res = kkt_residual(box, x, he.grad);
    if (res < tol) {
      if (iterations) *iterations = it + 1;
      return x;
    }

    // Newton direction with escalating damping when the Hessian is not
    // positive definite.
    Vec d;
    double damp = 0.0;
    for (int k = 0; k < 61; ++k) {
      Mat hh = he.hess;
      if (damp > 0.0) hh += damp * Mat::Identity(p, p);
      Eigen::LDLT<Mat> ldlt(hh);
      if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        d = ldlt.solve(-he.grad);
        break;
      }
      if (k == 60) {
        if (problem.nu() == 0.0)
          throw std::runtime_error(
              "map_estimate: Hessian is singular and nu = 0; the problem is "
              "ill-posed, use a positive prior weight (nu > 0)");
        throw std::runtime_error("map_estimate: Hessian factorization failed");
      }
      damp = (damp == 0.0) ? 1e-10 * (1.0 + he.hess.cwiseAbs().maxCoeff()) : damp * 10.0;
    }

    double alpha = 1.0;
    Vec xn;
    double fn = kInf;
    bool moved = false;
    for (int ls = 0; ls < 60 && !moved; ++ls) {
      xn = clamp_to(box, x + alpha * d);
      fn = h_value(problem, y, xn);
      if (std::isfinite(fn) && fn <= fx && (xn - x).squaredNorm() > 0.0) moved = true;
      else alpha *= 0.5;
    }
    if (!moved) {
      // Value differences are below floating-point resolution. Newton still
      // contracts the first-order conditions, so fall back to accepting steps
      // on KKT-residual decrease.
      xn = clamp_to(box, x + d);
      const double fn_full = h_value(problem, y, xn);
      bool contracted = false;
      if (std::isfinite(fn_full) && (xn - x).squaredNorm() > 0.0) {
        try {
          const HEval hn = h_value_grad_hess(problem, y, xn);
          contracted = kkt_residual(box, xn, hn.grad) < res;
        } catch (const std::exception&) {
          contracted = false;
        }
      }
      if (contracted) {
        x = xn;
        fx = fn_full;
        continue;
      }
      if (res < 10.0 * tol) {
        if (iterations) *iterations = it + 1;
        return x;
      }
      std::ostringstream os;
      os << "map_estimate: stalled at iteration " << it << " with KKT residual " << res
         << " (last iterate norm " << x.norm() << ")";
      throw std::runtime_error(os.str());
    }
    x = xn;
    fx = fn;
  }
  std::ostringstream os;
  os << "map_estimate: no convergence in " << max_iter
     << " iterations (last iterate norm " << x.norm() << ")";
  throw std::runtime_error(os.str());
}

//============================================================================
// Laplace summary
//============================================================================

StarPoint solve_x_star(const GlipProblem& problem, double tol) {
  return solve_x_star(problem.op(), problem.prior(), problem.x_true(),
                      problem.domain(), tol);
}

namespace {

// det and log|det| of a small symmetric block via LU.
std::pair<double, double> block_determinant(const Mat& m) {
  if (m.rows() == 0) return {1.0, 0.0};
  Eigen::PartialPivLU<Mat> lu(m);
  const double det = lu.determinant();
  double logdet = 0.0;
  const Mat& u = lu.matrixLU();
  for (Eigen::Index i = 0; i < u.rows(); ++i) logdet += std::log(std::abs(u(i, i)));
  return {det, logdet};
}

}  // namespace

PosteriorSummary laplace_summary(const GlipProblem& problem, const Vec& y,
                                 const StarPoint& x_star) {
  const Mat& a = problem.op().matrix();
  const double nu = problem.nu();
  const Vec& xs = x_star.x;

  const Mat bmat = problem.prior().hess(xs);
  const Vec mid_y = middle_diag(problem, y, xs);
  const Vec mid_ex = middle_diag(problem, problem.y_exact(), xs);

  PosteriorSummary s;
  s.h = a.transpose() * mid_y.asDiagonal() * a + nu * bmat;
  s.h_nu = a.transpose() * mid_ex.asDiagonal() * a + nu * bmat;

  // H_nu spectrum: positive definiteness is the theorem's full-rank premise.
  Eigen::SelfAdjointEigenSolver<Mat> es(s.h_nu);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("laplace_summary: H_nu eigensolve failed");
  s.lambda_min_h_nu = es.eigenvalues().minCoeff();
  if (!(s.lambda_min_h_nu > 0.0))
    throw std::runtime_error("laplace_summary: H_nu is singular (full-rank premise violated)");
  s.trace_h_nu_inv = es.eigenvalues().cwiseInverse().sum();

  const Vec mu = problem.op().apply(xs);
  const Vec eta = problem.link().apply(mu);
  const Vec g1 = problem.link().jacobian_diag(mu);
  const Vec grad_h =
      a.transpose() * (g1.array() * problem.noise().grad_eta(y, eta).array()).matrix() +
      nu * problem.prior().grad(xs);

  Eigen::LDLT<Mat> hldlt(s.h);
  if (hldlt.info() != Eigen::Success)
    throw std::runtime_error("laplace_summary: H is singular");
  s.x0 = hldlt.solve(grad_h);
  s.laplace_mean = xs - s.x0;
  s.laplace_cov = problem.tau() * hldlt.solve(Mat::Identity(a.cols(), a.cols()));

  const Mat u0 = problem.op().range_basis();
  const Mat u1 = problem.op().null_basis();
  const Mat likelihood_hess = a.transpose() * mid_ex.asDiagonal() * a;
  const auto [d0, ld0] = block_determinant(u0.transpose() * likelihood_hess * u0);
  const auto [d1, ld1] = block_determinant(u1.transpose() * bmat * u1);
  s.det_omega00 = d0;
  s.log_det_omega00 = ld0;
  s.det_b11 = d1;
  s.log_det_b11 = ld1;

  s.x_map = map_estimate(problem, y, xs, 1e-10);
  if (problem.domain() == Domain::NonNegOrthant)
    s.interior = (s.x_map.array() > 0.0).all();
  else
    s.interior = true;
  return s;
}

//============================================================================
// Posterior sampling
//============================================================================

namespace {

bool conjugate_case(const GlipProblem& problem) {
  return problem.noise().kind() == NoiseKind::Gaussian &&
         problem.prior().is_gaussian() && problem.link().is_identity() &&
         problem.domain() == Domain::AllReals;
}

SampleResult sample_conjugate(const GlipProblem& problem, const Vec& y, int count,
                              RngStream& stream) {
  const Mat& a = problem.op().matrix();
  const double nu = problem.nu();
  const Vec sigma_inv = problem.noise().sigma2().cwiseInverse();
  const Mat h = a.transpose() * sigma_inv.asDiagonal() * a + nu * problem.prior().precision();
  Eigen::LLT<Mat> llt(h);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("sample_posterior: conjugate precision is not positive definite");
  const Vec rhs = a.transpose() * (sigma_inv.array() * y.array()).matrix() +
                  nu * problem.prior().precision() * problem.prior().mean();
  const Vec mean = llt.solve(rhs);
  const double sq_tau = std::sqrt(problem.tau());

  const int p = problem.p();
  SampleResult res;
  res.draws.resize(count, p);
  Vec z(p);
  for (int k = 0; k < count; ++k) {
    for (int i = 0; i < p; ++i) z[i] = stream.normal();
    // x = mean + sqrt(tau) L^{-T} z gives covariance tau H^{-1}
    res.draws.row(k) = (mean + sq_tau * llt.matrixU().solve(z)).transpose();
  }
  res.acceptance_rate = 1.0;
  res.chain_length = count;
  return res;
}

bool diagonal_case(const GlipProblem& problem) {
  if (!problem.op().is_diagonal() || !problem.link().is_identity()) return false;
  if (!problem.prior().is_gaussian()) return false;
  const Mat& b = problem.prior().precision();
  for (Eigen::Index i = 0; i < b.rows(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j)
      if (i != j && b(i, j) != 0.0) return false;
  return true;
}

// One-dimensional adaptive random-walk chain for a single coordinate of a
// fully diagonal problem.
void sample_coordinate_chain(const GlipProblem& problem, const Vec& y, int j,
                             double x_init, double sd_init, int count,
                             const SamplerConfig& cfg, RngStream rng, Mat& out,
                             double& accept_out) {
  const double ajj = problem.op().matrix()(j, j);
  const double bjj = problem.prior().precision()(j, j);
  const double mj = problem.prior().mean()[j];
  const double nu = problem.nu();
  const double yj = y[j];
  const bool orthant = problem.domain() == Domain::NonNegOrthant;
  const NoiseFamily& noise = problem.noise();

  auto neg_log_target = [&](double x) -> double {
    if (orthant && x < 0.0) return kInf;
    const double eta = ajj * x;
    double f;
    switch (noise.kind()) {
      case NoiseKind::Gaussian:
        f = (0.5 * eta * eta - yj * eta) / noise.sigma2()[j];
        break;
      case NoiseKind::ScaledPoisson:
        if (eta < 0.0 || (eta == 0.0 && yj > 0.0)) return kInf;
        f = eta - (yj > 0.0 ? yj * std::log(eta) : 0.0);
        break;
      case NoiseKind::Gamma:
        if (!(eta > 0.0)) return kInf;
        f = noise.shape() * (yj / eta + std::log(eta));
        break;
      case NoiseKind::ShiftedExponential:
        if (yj < eta) return kInf;
        f = noise.rate()[j] * (yj - eta);
        break;
      default:
        return kInf;
    }
    const double d = x - mj;
    return f + nu * 0.5 * bjj * d * d;
  };

  double x = x_init;
  double fx = neg_log_target(x);
  if (!std::isfinite(fx)) {
    x = orthant ? std::max(x_init, 1e-12) : x_init;
    fx = neg_log_target(x);
  }
  const double tau = problem.tau();
  double log_sd = std::log(sd_init) + cfg.init_log_step;
  long accepted = 0;
  long post_steps = 0;
  const long total = static_cast<long>(cfg.burn_in) +
                     static_cast<long>(count) * static_cast<long>(cfg.thin);
  int kept = 0;
  for (long t = 0; t < total; ++t) {
    const double prop = x + std::exp(log_sd) * rng.normal();
    const double fp = neg_log_target(prop);
    bool accept = false;
    if (std::isfinite(fp)) {
      const double log_ratio = (fx - fp) / tau;
      accept = log_ratio >= 0.0 || std::log(rng.uniform()) < log_ratio;
    }
    if (accept) {
      x = prop;
      fx = fp;
    }
    if (t < cfg.burn_in) {
      const double gain = 1.0 / std::sqrt(static_cast<double>(t) + 1.0);
      log_sd += gain * ((accept ? 1.0 : 0.0) - cfg.target_accept);
    } else {
      ++post_steps;
      if (accept) ++accepted;
      const long since = t - cfg.burn_in;
      if ((since + 1) % cfg.thin == 0 && kept < count) out(kept++, j) = x;
    }
  }
  accept_out = post_steps > 0 ? static_cast<double>(accepted) / post_steps : 0.0;
}

SampleResult sample_diagonal(const GlipProblem& problem, const Vec& y, int count,
                             RngStream& stream, const SamplerConfig& cfg) {
  const int p = problem.p();
  Vec x_init = map_estimate(problem, y, problem.x_true(), 1e-6);  // chain seed only

  SampleResult res;
  res.draws.resize(count, p);
  const double tau = problem.tau();
  const double nu = problem.nu();

  // Local curvature of h at the init point sets the starting proposal scale.
  Vec curvature = Vec::Zero(p);
  try {
    const Vec eta = problem.op().apply(x_init);
    const Vec hd = problem.noise().hess_eta_diag(y, eta);
    for (int j = 0; j < p; ++j) {
      const double ajj = problem.op().matrix()(j, j);
      curvature[j] = ajj * ajj * hd[j] + nu * problem.prior().precision()(j, j);
    }
  } catch (const std::exception&) {
    curvature.setZero();
  }

  double accept_sum = 0.0;
  for (int j = 0; j < p; ++j) {
    double sd = curvature[j] > 0.0 ? std::sqrt(tau / curvature[j]) : std::sqrt(tau);
    if (!(sd > 0.0) || !std::isfinite(sd)) sd = std::sqrt(tau);
    double acc = 0.0;
    sample_coordinate_chain(problem, y, j, x_init[j], sd, count, cfg,
                            stream.fork(static_cast<std::uint64_t>(j) + 1), res.draws,
                            acc);
    accept_sum += acc;
  }
  res.acceptance_rate = accept_sum / p;
  res.chain_length = static_cast<long>(cfg.burn_in) +
                     static_cast<long>(count) * static_cast<long>(cfg.thin);
  if (res.acceptance_rate < 0.05 || res.acceptance_rate > 0.8)
    res.warning = "acceptance rate outside [0.05, 0.8] after adaptation";
  return res;
}

SampleResult sample_rwm(const GlipProblem& problem, const Vec& y, int count,
                        RngStream& stream, const SamplerConfig& cfg) {
  const int p = problem.p();
  const double tau = problem.tau();

  StarPoint xs = solve_x_star(problem, 1e-10);
  Vec x = map_estimate(problem, y, xs.x, 1e-6);  // chain seed only

  // Proposal shape from the local curvature at the MAP; diagonal fallback
  // when the Hessian is not positive definite there (boundary regimes).
  Mat chol_shape = Mat::Identity(p, p);
  bool have_shape = false;
  try {
    HEval he = h_value_grad_hess(problem, y, x);
    Eigen::LLT<Mat> llt(tau * he.hess.inverse());
    if (llt.info() == Eigen::Success) {
      chol_shape = llt.matrixL();
      have_shape = true;
    }
  } catch (const std::exception&) {
  }
  if (!have_shape) chol_shape = std::sqrt(tau) * Mat::Identity(p, p);

  double fx = h_value(problem, y, x);
  double log_s = cfg.init_log_step;
  long accepted = 0;
  long post_steps = 0;
  const long total = static_cast<long>(cfg.burn_in) +
                     static_cast<long>(count) * static_cast<long>(cfg.thin);
  SampleResult res;
  res.draws.resize(count, p);
  int kept = 0;
  Vec z(p);
  for (long t = 0; t < total; ++t) {
    for (int i = 0; i < p; ++i) z[i] = stream.normal();
    const Vec prop = x + std::exp(log_s) * (chol_shape * z);
    const double fp = h_value(problem, y, prop);
    bool accept = false;
    if (std::isfinite(fp)) {
      const double log_ratio = (fx - fp) / tau;
      accept = log_ratio >= 0.0 || std::log(stream.uniform()) < log_ratio;
    }
    if (accept) {
      x = prop;
      fx = fp;
    }
    if (t < cfg.burn_in) {
      const double gain = 1.0 / std::sqrt(static_cast<double>(t) + 1.0);
      log_s += gain * ((accept ? 1.0 : 0.0) - cfg.target_accept);
    } else {
      ++post_steps;
      if (accept) ++accepted;
      const long since = t - cfg.burn_in;
      if ((since + 1) % cfg.thin == 0 && kept < count) res.draws.row(kept++) = x.transpose();
    }
  }
  res.acceptance_rate = post_steps > 0 ? static_cast<double>(accepted) / post_steps : 0.0;
  res.chain_length = total;
  if (res.acceptance_rate < 0.05 || res.acceptance_rate > 0.8)
    res.warning = "acceptance rate outside [0.05, 0.8] after adaptation";
  return res;
}

}  // namespace

SampleResult sample_posterior(const GlipProblem& problem, const Vec& y, int count,
                              RngStream& stream, const SamplerConfig& config) {
  if (count < 1) throw std::invalid_argument("sample_posterior: count must be >= 1");
  if (y.size() != problem.n())
    throw std::invalid_argument("sample_posterior: y dimension mismatch");
  if (conjugate_case(problem)) return sample_conjugate(problem, y, count, stream);
  if (diagonal_case(problem)) return sample_diagonal(problem, y, count, stream, config);
  return sample_rwm(problem, y, count, stream, config);
}

}  // namespace glip

#pragma once

#include <string>

#include "glip/forward.hpp"
#include "glip/noise.hpp"
#include "glip/prior.hpp"
#include "glip/rng.hpp"

namespace glip {

// A full problem instance: noise family, forward operator, link, prior, true
// parameter, domain constraint and dispersion. Immutable after construction.
class GlipProblem {
 public:
  GlipProblem(NoiseFamily noise, ForwardOperator op, LinkMap link, PriorModel prior,
              Vec x_true, Domain domain, double tau);

  const NoiseFamily& noise() const { return noise_; }
  const ForwardOperator& op() const { return op_; }
  const LinkMap& link() const { return link_; }
  const PriorModel& prior() const { return prior_; }
  const Vec& x_true() const { return x_true_; }
  Domain domain() const { return domain_; }
  double tau() const { return tau_; }
  double nu() const { return tau_ / (prior_.gamma() * prior_.gamma()); }
  const Vec& y_exact() const { return y_exact_; }
  int n() const { return op_.n(); }
  int p() const { return op_.p(); }

  GlipProblem with_tau(double tau) const;

 private:
  NoiseFamily noise_;
  ForwardOperator op_;
  LinkMap link_;
  PriorModel prior_;
  Vec x_true_;
  Domain domain_;
  double tau_;
  Vec y_exact_;
};

struct HEval {
  double value = 0.0;
  Vec grad;
  Mat hess;
};

// h_y(x) = f_y(x) + nu g(x) with exact gradient and Hessian. Throws on x
// outside the domain or with G(Ax) outside the likelihood support.
HEval h_value_grad_hess(const GlipProblem& problem, const Vec& y, const Vec& x);

// Value-only evaluation used by the samplers: +inf outside the domain or the
// likelihood support instead of throwing.
double h_value(const GlipProblem& problem, const Vec& y, const Vec& x);

// Projected-Newton MAP estimate over the problem domain; KKT residual below
// tol on success.
Vec map_estimate(const GlipProblem& problem, const Vec& y, const Vec& x_init,
                 double tol, int max_iter = 200, int* iterations = nullptr);

struct PosteriorSummary {
  Vec x_map;
  Mat h;       // A^T V_y(x*) A + nu B(x*)
  Mat h_nu;    // A^T V_exact(x*) A + nu B(x*)
  Vec x0;      // H^{-1} grad h_y(x*)
  double det_omega00 = 1.0;
  double det_b11 = 1.0;
  double log_det_omega00 = 0.0;
  double log_det_b11 = 0.0;
  bool interior = true;
  Vec laplace_mean;   // x* - x0
  Mat laplace_cov;    // tau H^{-1}
  double trace_h_nu_inv = 0.0;
  double lambda_min_h_nu = 0.0;
};

PosteriorSummary laplace_summary(const GlipProblem& problem, const Vec& y,
                                 const StarPoint& x_star);

StarPoint solve_x_star(const GlipProblem& problem, double tol = 1e-10);

struct SamplerConfig {
  int burn_in = 2000;
  int thin = 5;
  double target_accept = 0.3;
  // Initial proposal log-scale multiplier on top of the Laplace covariance.
  double init_log_step = 0.0;
};

struct SampleResult {
  Mat draws;  // count x p
  double acceptance_rate = 1.0;
  long chain_length = 0;
  std::string warning;
};

// Exact draws in the conjugate Gaussian case, per-coordinate chains for
// diagonal problems, adaptive random-walk Metropolis otherwise. Deterministic
// given the stream.
SampleResult sample_posterior(const GlipProblem& problem, const Vec& y, int count,
                              RngStream& stream, const SamplerConfig& config = {});

}  // namespace glip

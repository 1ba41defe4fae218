#pragma once

#include <Eigen/Dense>
#include <vector>

#include "glip/rng.hpp"

namespace glip {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Empirical Ky Fan distance inf{eps > 0 : #{d_i > eps}/m < eps} with a
// bootstrap standard-error hint (advisory only).
struct KyFanEstimate {
  double epsilon = 0.0;
  long sample_count = 0;
  double standard_error_hint = 0.0;
};

KyFanEstimate kyfan_empirical(const std::vector<double>& distances,
                              int bootstrap_resamples = 200,
                              std::uint64_t bootstrap_seed = 0x6b79666172ULL);

// Exact crossing of the empirical tail with the identity, no bootstrap.
double kyfan_empirical_epsilon(std::vector<double> distances);

// Root z of exp(-z/A) = z for A in (0, 1/e], bisection to |residual| < 1e-12.
// Satisfies z <= -A log A.
double kyfan_fixed_point(double a);

// sqrt(-4 tr(Sigma) log(4 tr(Sigma))), valid for tr(Sigma) < 1/(4e).
double kyfan_bound_gaussian(double trace_sigma);

// sqrt(-tau M log(tau M)) with M = 4 sum(mu), valid for tau M < 1/e.
double kyfan_bound_poisson(const Vec& mu, double tau);

// -(tau/lambda) log(tau/lambda), valid for tau/lambda < 1/e.
double kyfan_bound_exponential(double lambda, double tau);

// Cumulant-based bound sqrt(-tau M log(tau M)) with M = 4 sum(C_t w_t),
// requires C_t >= 1 and tau <= 1/(e M).
double kyfan_bound_cumulant(const Vec& c, const Vec& w, double tau);

// Moment bound (n tau^{mK/2} L_K)^{1/(K+1)}.
double kyfan_bound_moment(int n, double tau, double m_k, double l_k, double k);

// Exponential-moment variant: the literal Markov statement E e^{a||Y-mu||},
// clipped at 1 because the Ky Fan distance never exceeds 1. Taken verbatim;
// as stated the bound is vacuous (>= 1).
double kyfan_bound_moment_exp(double exp_moment);

// Prokhorov distance from an empirical posterior to a point mass, via the
// Ky Fan distance of ||draw - x_ref|| / scale.
KyFanEstimate prokhorov_to_point(const Mat& posterior_draws, const Vec& x_ref,
                                 double scale = 1.0);

// max(rho_data + p_omega2, phi1_at_rho): lifts a per-outcome Prokhorov bound
// to a Ky Fan bound across outcomes.
double lifting_combine(double phi1_at_rho, double rho_data, double p_omega2);

}  // namespace glip

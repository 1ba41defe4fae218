#include "glip/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace glip {

namespace {
constexpr double kInvE = 0.36787944117144233;  // 1/e
}

//============================================================================
// Empirical Ky Fan
//============================================================================

double kyfan_empirical_epsilon(std::vector<double> d) {
  if (d.empty()) throw std::invalid_argument("kyfan_empirical: empty input");
  for (double v : d)
    if (v < 0.0 || !std::isfinite(v))
      throw std::invalid_argument("kyfan_empirical: distances must be finite and >= 0");
  std::sort(d.begin(), d.end());
  const double m = static_cast<double>(d.size());

  // Walk the intervals [w_{j-1}, w_j) of the right-continuous empirical tail
  // T(eps) = #{d_i > eps}/m and return the crossing with the identity line.
  double left = 0.0;
  std::size_t i = 0;
  while (i < d.size()) {
    const double right = d[i];
    const double level = static_cast<double>(d.size() - i) / m;  // T on [left, right)
    if (left < right && level < right) return std::max(level, left);
    // advance past ties
    std::size_t j = i;
    while (j < d.size() && d[j] == d[i]) ++j;
    left = right;
    i = j;
  }
  // Final interval [d_max, inf): tail is zero.
  return left;
}

KyFanEstimate kyfan_empirical(const std::vector<double>& distances,
                              int bootstrap_resamples, std::uint64_t bootstrap_seed) {
  KyFanEstimate est;
  est.epsilon = kyfan_empirical_epsilon(distances);
  est.sample_count = static_cast<long>(distances.size());
  if (bootstrap_resamples > 1 && distances.size() > 1) {
    RngStream rng(bootstrap_seed, distances.size());
    std::vector<double> resample(distances.size());
    double sum = 0.0, sumsq = 0.0;
    for (int b = 0; b < bootstrap_resamples; ++b) {
      for (std::size_t k = 0; k < distances.size(); ++k) {
        const auto idx = static_cast<std::size_t>(rng.uniform() * distances.size());
        resample[k] = distances[std::min(idx, distances.size() - 1)];
      }
      const double e = kyfan_empirical_epsilon(resample);
      sum += e;
      sumsq += e * e;
    }
    const double n = bootstrap_resamples;
    const double var = std::max(0.0, (sumsq - sum * sum / n) / (n - 1.0));
    est.standard_error_hint = std::sqrt(var);
  }
  return est;
}

//============================================================================
// Fixed point and analytic bounds
//============================================================================

double kyfan_fixed_point(double a) {
  if (!(a > 0.0) || a > kInvE + 1e-15)
    throw std::invalid_argument("kyfan_fixed_point: A must lie in (0, 1/e]");
  // f(z) = exp(-z/A) - z is strictly decreasing with f(0) = 1 > 0 > f(1).
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f = std::exp(-mid / a) - mid;
    if (std::abs(f) < 1e-13) return mid;
    if (f > 0.0) lo = mid;
    else hi = mid;
    if (hi - lo < 1e-16) break;
  }
  return 0.5 * (lo + hi);
}

namespace {
double neg_t_log_t_sqrt(double t, const char* who) {
  if (!(t > 0.0) || t >= kInvE) {
    std::ostringstream os;
    os << who << ": argument " << t << " must lie in (0, 1/e) so that -t log t is "
       << "increasing (1/e ~ 0.3679)";
    throw std::domain_error(os.str());
  }
  return std::sqrt(-t * std::log(t));
}
}  // namespace

double kyfan_bound_gaussian(double trace_sigma) {
  if (!(trace_sigma > 0.0))
    throw std::invalid_argument("kyfan_bound_gaussian: trace must be positive");
  if (trace_sigma >= 1.0 / (4.0 * M_E)) {
    std::ostringstream os;
    os << "kyfan_bound_gaussian: trace " << trace_sigma
       << " must be below 1/(4e) ~ 0.091970";
    throw std::domain_error(os.str());
  }
  return neg_t_log_t_sqrt(4.0 * trace_sigma, "kyfan_bound_gaussian");
}

double kyfan_bound_poisson(const Vec& mu, double tau) {
  if (mu.size() == 0 || (mu.array() <= 0.0).any())
    throw std::invalid_argument("kyfan_bound_poisson: mu must be positive");
  if (!(tau > 0.0)) throw std::invalid_argument("kyfan_bound_poisson: tau must be positive");
  const double m = 4.0 * mu.sum();
  if (!(tau * m < kInvE)) {
    std::ostringstream os;
    os << "kyfan_bound_poisson: tau*M = " << tau * m << " must be below 1/e";
    throw std::domain_error(os.str());
  }
  return neg_t_log_t_sqrt(tau * m, "kyfan_bound_poisson");
}

double kyfan_bound_exponential(double lambda, double tau) {
  if (!(lambda > 0.0) || !(tau > 0.0))
    throw std::invalid_argument("kyfan_bound_exponential: lambda and tau must be positive");
  const double t = tau / lambda;
  if (!(t < kInvE)) {
    std::ostringstream os;
    os << "kyfan_bound_exponential: tau/lambda = " << t << " must be below 1/e";
    throw std::domain_error(os.str());
  }
  return -t * std::log(t);
}

double kyfan_bound_cumulant(const Vec& c, const Vec& w, double tau) {
  if (c.size() != w.size() || c.size() == 0)
    throw std::invalid_argument("kyfan_bound_cumulant: c and w must be nonempty, same size");
  if ((c.array() < 1.0).any())
    throw std::invalid_argument("kyfan_bound_cumulant: requires C_t >= 1");
  if ((w.array() <= 0.0).any())
    throw std::invalid_argument("kyfan_bound_cumulant: requires w_t > 0");
  if (!(tau > 0.0)) throw std::invalid_argument("kyfan_bound_cumulant: tau must be positive");
  const double m = 4.0 * c.dot(w);
  if (!(tau <= 1.0 / (M_E * m))) {
    std::ostringstream os;
    os << "kyfan_bound_cumulant: tau = " << tau << " must be at most 1/(e*M) = "
       << 1.0 / (M_E * m);
    throw std::domain_error(os.str());
  }
  return neg_t_log_t_sqrt(tau * m, "kyfan_bound_cumulant");
}

double kyfan_bound_moment(int n, double tau, double m_k, double l_k, double k) {
  if (n < 1 || !(tau > 0.0) || !(m_k > 0.0) || !(l_k > 0.0) || !(k >= 2.0))
    throw std::invalid_argument(
        "kyfan_bound_moment: need n >= 1, tau > 0, mK > 0, L_K > 0, K >= 2");
  return std::pow(static_cast<double>(n) * std::pow(tau, 0.5 * m_k) * l_k,
                  1.0 / (k + 1.0));
}

double kyfan_bound_moment_exp(double exp_moment) {
  if (!(exp_moment > 0.0) || !std::isfinite(exp_moment))
    throw std::invalid_argument("kyfan_bound_moment_exp: moment must be finite and positive");
  return std::min(exp_moment, 1.0);
}

//============================================================================
// Prokhorov to a point mass, lifting
//============================================================================

KyFanEstimate prokhorov_to_point(const Mat& posterior_draws, const Vec& x_ref,
                                 double scale) {
  if (posterior_draws.rows() < 100)
    throw std::invalid_argument("prokhorov_to_point: need at least 100 draws");
  if (posterior_draws.cols() != x_ref.size())
    throw std::invalid_argument("prokhorov_to_point: reference dimension mismatch");
  if (!(scale > 0.0)) throw std::invalid_argument("prokhorov_to_point: scale must be positive");
  std::vector<double> d(static_cast<std::size_t>(posterior_draws.rows()));
  for (Eigen::Index i = 0; i < posterior_draws.rows(); ++i)
    d[static_cast<std::size_t>(i)] =
        (posterior_draws.row(i).transpose() - x_ref).norm() / scale;
  return kyfan_empirical(d);
}

double lifting_combine(double phi1_at_rho, double rho_data, double p_omega2) {
  if (phi1_at_rho < 0.0 || rho_data < 0.0 || p_omega2 < 0.0)
    throw std::invalid_argument("lifting_combine: inputs must be nonnegative");
  if (rho_data > 1.0 || p_omega2 > 1.0)
    throw std::invalid_argument("lifting_combine: probability terms must lie in [0, 1]");
  return std::max(rho_data + p_omega2, phi1_at_rho);
}

}  // namespace glip

#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace glip {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Regularized lower incomplete gamma P(a,x), series for x < a+1 and
// continued fraction otherwise.
inline double lower_gamma_regularized(double a, double x) {
  if (a <= 0.0) throw std::invalid_argument("lower_gamma_regularized: a must be positive");
  if (x < 0.0) throw std::invalid_argument("lower_gamma_regularized: x must be nonnegative");
  if (x == 0.0) return 0.0;
  const double gln = std::lgamma(a);
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-15;
  if (x < a + 1.0) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int i = 0; i < kMaxIter; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * kEps) break;
    }
    return sum * std::exp(-x + a * std::log(x) - gln);
  }
  // Lentz continued fraction for Q(a,x)
  const double fpmin = std::numeric_limits<double>::min() / kEps;
  double b = x + 1.0 - a;
  double c = 1.0 / fpmin;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxIter; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < fpmin) d = fpmin;
    c = b + an / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  const double q = std::exp(-x + a * std::log(x) - gln) * h;
  return 1.0 - q;
}

inline double chi_squared_cdf(double dof, double x) {
  if (x <= 0.0) return 0.0;
  return lower_gamma_regularized(0.5 * dof, 0.5 * x);
}

// P(||Z|| <= r) for a standard normal vector in dimension p.
inline double gaussian_ball_probability(int p, double r) {
  if (r <= 0.0) return 0.0;
  return chi_squared_cdf(static_cast<double>(p), r * r);
}

}  // namespace glip

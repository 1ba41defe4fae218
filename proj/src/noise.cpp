#include "glip/noise.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace glip {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

void require_positive(const Vec& v, const char* what) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!(v[i] > 0.0) || !std::isfinite(v[i])) {
      std::ostringstream os;
      os << what << " must be strictly positive and finite, got " << v[i]
         << " at coordinate " << i;
      throw std::invalid_argument(os.str());
    }
  }
}
}  // namespace

const char* noise_kind_name(NoiseKind k) {
  switch (k) {
    case NoiseKind::Gaussian: return "gaussian";
    case NoiseKind::ScaledPoisson: return "scaled_poisson";
    case NoiseKind::Gamma: return "gamma";
    case NoiseKind::ShiftedExponential: return "shifted_exponential";
  }
  return "unknown";
}

NoiseFamily NoiseFamily::gaussian(Vec sigma2) {
  require_positive(sigma2, "gaussian sigma^2");
  NoiseFamily f(NoiseKind::Gaussian, static_cast<int>(sigma2.size()));
  f.sigma2_ = std::move(sigma2);
  return f;
}

NoiseFamily NoiseFamily::scaled_poisson(int n) {
  if (n < 1) throw std::invalid_argument("scaled_poisson: dimension must be >= 1");
  return NoiseFamily(NoiseKind::ScaledPoisson, n);
}

NoiseFamily NoiseFamily::gamma(int n, double shape) {
  if (n < 1) throw std::invalid_argument("gamma: dimension must be >= 1");
  if (!(shape > 0.0)) throw std::invalid_argument("gamma: shape must be positive");
  NoiseFamily f(NoiseKind::Gamma, n);
  f.shape_ = shape;
  return f;
}

NoiseFamily NoiseFamily::shifted_exponential(Vec rate) {
  require_positive(rate, "shifted_exponential rate");
  NoiseFamily f(NoiseKind::ShiftedExponential, static_cast<int>(rate.size()));
  f.rate_ = std::move(rate);
  return f;
}

double NoiseFamily::shape() const {
  if (kind_ != NoiseKind::Gamma) throw std::logic_error("shape: not a Gamma family");
  return shape_;
}

const Vec& NoiseFamily::sigma2() const {
  if (kind_ != NoiseKind::Gaussian) throw std::logic_error("sigma2: not a Gaussian family");
  return sigma2_;
}

const Vec& NoiseFamily::rate() const {
  if (kind_ != NoiseKind::ShiftedExponential)
    throw std::logic_error("rate: not a ShiftedExponential family");
  return rate_;
}

void NoiseFamily::check_dim(const Vec& v, const char* what) const {
  if (v.size() != n_) {
    std::ostringstream os;
    os << what << ": expected dimension " << n_ << ", got " << v.size();
    throw std::invalid_argument(os.str());
  }
}

//============================================================================
// Canonical family functions. The c functions are fixed by the identity
// c'(eta) = eta b'(eta), which the density parameterization enforces.
//============================================================================

double NoiseFamily::b(double eta, int i) const {
  switch (kind_) {
    case NoiseKind::Gaussian: return -eta / sigma2_[i];
    case NoiseKind::ScaledPoisson:
      if (!(eta > 0.0)) throw std::domain_error("b: Poisson requires eta > 0");
      return -std::log(eta);
    case NoiseKind::Gamma:
      if (!(eta > 0.0)) throw std::domain_error("b: Gamma requires eta > 0");
      return shape_ / eta;
    default: throw std::logic_error("b: not a canonical family");
  }
}

double NoiseFamily::b1(double eta, int i) const {
  switch (kind_) {
    case NoiseKind::Gaussian: return -1.0 / sigma2_[i];
    case NoiseKind::ScaledPoisson:
      if (!(eta > 0.0)) throw std::domain_error("b1: Poisson requires eta > 0");
      return -1.0 / eta;
    case NoiseKind::Gamma:
      if (!(eta > 0.0)) throw std::domain_error("b1: Gamma requires eta > 0");
      return -shape_ / (eta * eta);
    default: throw std::logic_error("b1: not a canonical family");
  }
}

double NoiseFamily::b2(double eta, int i) const {
  switch (kind_) {
    case NoiseKind::Gaussian: return 0.0;
    case NoiseKind::ScaledPoisson:
      if (!(eta > 0.0)) throw std::domain_error("b2: Poisson requires eta > 0");
      return 1.0 / (eta * eta);
    case NoiseKind::Gamma:
      if (!(eta > 0.0)) throw std::domain_error("b2: Gamma requires eta > 0");
      return 2.0 * shape_ / (eta * eta * eta);
    default: throw std::logic_error("b2: not a canonical family");
  }
}

double NoiseFamily::b3(double eta, int i) const {
  switch (kind_) {
    case NoiseKind::Gaussian: return 0.0;
    case NoiseKind::ScaledPoisson:
      if (!(eta > 0.0)) throw std::domain_error("b3: Poisson requires eta > 0");
      return -2.0 / (eta * eta * eta);
    case NoiseKind::Gamma:
      if (!(eta > 0.0)) throw std::domain_error("b3: Gamma requires eta > 0");
      return -6.0 * shape_ / (eta * eta * eta * eta);
    default: throw std::logic_error("b3: not a canonical family");
  }
}

double NoiseFamily::c(double eta, int i) const {
  switch (kind_) {
    case NoiseKind::Gaussian: return -0.5 * eta * eta / sigma2_[i];
    case NoiseKind::ScaledPoisson: return -eta;
    case NoiseKind::Gamma:
      if (!(eta > 0.0)) throw std::domain_error("c: Gamma requires eta > 0");
      return -shape_ * std::log(eta);
    default: throw std::logic_error("c: not a canonical family");
  }
}

double NoiseFamily::c1(double eta, int i) const {
  switch (kind_) {
    case NoiseKind::Gaussian: return -eta / sigma2_[i];
    case NoiseKind::ScaledPoisson: return -1.0;
    case NoiseKind::Gamma:
      if (!(eta > 0.0)) throw std::domain_error("c1: Gamma requires eta > 0");
      return -shape_ / eta;
    default: throw std::logic_error("c1: not a canonical family");
  }
}

double NoiseFamily::c2(double eta, int i) const {
  switch (kind_) {
    case NoiseKind::Gaussian: return -1.0 / sigma2_[i];
    case NoiseKind::ScaledPoisson: return 0.0;
    case NoiseKind::Gamma:
      if (!(eta > 0.0)) throw std::domain_error("c2: Gamma requires eta > 0");
      return shape_ / (eta * eta);
    default: throw std::logic_error("c2: not a canonical family");
  }
}

double NoiseFamily::c3(double eta, int i) const {
  switch (kind_) {
    case NoiseKind::Gaussian: return 0.0;
    case NoiseKind::ScaledPoisson: return 0.0;
    case NoiseKind::Gamma:
      if (!(eta > 0.0)) throw std::domain_error("c3: Gamma requires eta > 0");
      return -2.0 * shape_ / (eta * eta * eta);
    default: throw std::logic_error("c3: not a canonical family");
  }
}

bool NoiseFamily::eta_admissible(const Vec& eta) const {
  if (eta.size() != n_) return false;
  if (kind_ == NoiseKind::ScaledPoisson || kind_ == NoiseKind::Gamma) {
    return (eta.array() > 0.0).all();
  }
  return eta.allFinite();
}

void NoiseFamily::require_admissible(const Vec& eta) const {
  check_dim(eta, "eta");
  if (!eta_admissible(eta)) {
    std::ostringstream os;
    os << "inadmissible eta for " << noise_kind_name(kind_) << " family";
    throw std::domain_error(os.str());
  }
}

//============================================================================
// Densities, moments, sampling
//============================================================================

double NoiseFamily::log_density(const Vec& y, const Vec& eta, double tau,
                                bool* outside_support) const {
  check_dim(y, "y");
  require_admissible(eta);
  if (!(tau > 0.0)) throw std::invalid_argument("log_density: tau must be positive");
  if (outside_support) *outside_support = false;

  double total = 0.0;
  for (int i = 0; i < n_; ++i) {
    switch (kind_) {
      case NoiseKind::Gaussian: {
        const double s2 = sigma2_[i] * tau;
        total += -0.5 * (y[i] - eta[i]) * (y[i] - eta[i]) / s2 -
                 0.5 * std::log(2.0 * M_PI * s2);
        break;
      }
      case NoiseKind::ScaledPoisson: {
        const double kreal = y[i] / tau;
        const double k = std::round(kreal);
        if (y[i] < 0.0 || std::abs(kreal - k) > 1e-8 * (1.0 + std::abs(kreal))) {
          if (outside_support) *outside_support = true;
          return -kInf;
        }
        // log P(Pois(eta/tau) = k)
        total += -eta[i] / tau + k * std::log(eta[i] / tau) - std::lgamma(k + 1.0);
        break;
      }
      case NoiseKind::Gamma: {
        if (!(y[i] > 0.0)) {
          if (outside_support) *outside_support = true;
          return -kInf;
        }
        const double k = shape_ / tau;           // Gamma shape
        const double rate = shape_ / (tau * eta[i]);
        total += k * std::log(rate) - std::lgamma(k) + (k - 1.0) * std::log(y[i]) -
                 rate * y[i];
        break;
      }
      case NoiseKind::ShiftedExponential: {
        if (y[i] < eta[i]) {
          if (outside_support) *outside_support = true;
          return -kInf;
        }
        const double r = rate_[i] / tau;
        total += std::log(r) - r * (y[i] - eta[i]);
        break;
      }
    }
  }
  return total;
}

std::pair<Vec, Vec> NoiseFamily::mean_variance(const Vec& eta, double tau) const {
  require_admissible(eta);
  if (!(tau > 0.0)) throw std::invalid_argument("mean_variance: tau must be positive");
  Vec mean(n_), var(n_);
  for (int i = 0; i < n_; ++i) {
    switch (kind_) {
      case NoiseKind::Gaussian:
        mean[i] = eta[i];
        var[i] = tau * sigma2_[i];
        break;
      case NoiseKind::ScaledPoisson:
        mean[i] = eta[i];
        var[i] = tau * eta[i];
        break;
      case NoiseKind::Gamma:
        mean[i] = eta[i];
        var[i] = tau * eta[i] * eta[i] / shape_;
        break;
      case NoiseKind::ShiftedExponential:
        mean[i] = eta[i] + tau / rate_[i];
        var[i] = tau * tau / (rate_[i] * rate_[i]);
        break;
    }
  }
  return {std::move(mean), std::move(var)};
}

Vec NoiseFamily::sample(const Vec& eta, double tau, RngStream& rng) const {
  check_dim(eta, "eta");
  if (!(tau > 0.0)) throw std::invalid_argument("sample: tau must be positive");
  if (kind_ == NoiseKind::ScaledPoisson) {
    // The boundary case eta_i = 0 is a valid zero-rate Poisson.
    for (int i = 0; i < n_; ++i)
      if (eta[i] < 0.0) throw std::domain_error("sample: Poisson requires eta >= 0");
  } else {
    require_admissible(eta);
  }

  Vec out(n_);
  for (int i = 0; i < n_; ++i) {
    switch (kind_) {
      case NoiseKind::Gaussian:
        out[i] = eta[i] + std::sqrt(tau * sigma2_[i]) * rng.normal();
        break;
      case NoiseKind::ScaledPoisson: {
        const double mean = eta[i] / tau;
        if (mean > RngStream::kMaxPoissonMean) {
          std::ostringstream os;
          os << "sample: Poisson rate " << mean << " at coordinate " << i
             << " exceeds the exact-sampler range (1e7); no approximation is used";
          throw std::domain_error(os.str());
        }
        out[i] = tau * static_cast<double>(rng.poisson(mean));
        break;
      }
      case NoiseKind::Gamma: {
        const double k = shape_ / tau;
        out[i] = rng.gamma(k, eta[i] / k);
        break;
      }
      case NoiseKind::ShiftedExponential:
        out[i] = eta[i] + rng.exponential(rate_[i] / tau);
        break;
    }
  }
  return out;
}

//============================================================================
// Stable likelihood pieces in eta
//============================================================================

bool NoiseFamily::likelihood_feasible(const Vec& y, const Vec& eta) const {
  if (y.size() != n_ || eta.size() != n_) return false;
  for (int i = 0; i < n_; ++i) {
    switch (kind_) {
      case NoiseKind::Gaussian:
        break;
      case NoiseKind::ScaledPoisson:
        if (eta[i] < 0.0) return false;
        if (eta[i] == 0.0 && y[i] > 0.0) return false;
        break;
      case NoiseKind::Gamma:
        if (!(eta[i] > 0.0)) return false;
        break;
      case NoiseKind::ShiftedExponential:
        if (y[i] < eta[i]) return false;
        break;
    }
  }
  return true;
}

double NoiseFamily::neg_loglik(const Vec& y, const Vec& eta) const {
  check_dim(y, "y");
  check_dim(eta, "eta");
  if (!likelihood_feasible(y, eta)) return kInf;
  double total = 0.0;
  for (int i = 0; i < n_; ++i) {
    switch (kind_) {
      case NoiseKind::Gaussian:
        total += (0.5 * eta[i] * eta[i] - y[i] * eta[i]) / sigma2_[i];
        break;
      case NoiseKind::ScaledPoisson:
        total += eta[i] - (y[i] > 0.0 ? y[i] * std::log(eta[i]) : 0.0);
        break;
      case NoiseKind::Gamma:
        total += shape_ * (y[i] / eta[i] + std::log(eta[i]));
        break;
      case NoiseKind::ShiftedExponential:
        total += rate_[i] * (y[i] - eta[i]);
        break;
    }
  }
  return total;
}

Vec NoiseFamily::grad_eta(const Vec& y, const Vec& eta) const {
  check_dim(y, "y");
  check_dim(eta, "eta");
  if (!likelihood_feasible(y, eta))
    throw std::domain_error("grad_eta: (y, eta) outside the likelihood support");
  Vec g(n_);
  for (int i = 0; i < n_; ++i) {
    switch (kind_) {
      case NoiseKind::Gaussian:
        g[i] = (eta[i] - y[i]) / sigma2_[i];
        break;
      case NoiseKind::ScaledPoisson:
        // (eta - y) b'(eta) = 1 - y/eta; equals 1 on the closed boundary y=0.
        g[i] = (y[i] == 0.0) ? 1.0 : 1.0 - y[i] / eta[i];
        break;
      case NoiseKind::Gamma:
        g[i] = shape_ * (eta[i] - y[i]) / (eta[i] * eta[i]);
        break;
      case NoiseKind::ShiftedExponential:
        g[i] = -rate_[i];
        break;
    }
  }
  return g;
}

Vec NoiseFamily::hess_eta_diag(const Vec& y, const Vec& eta) const {
  check_dim(y, "y");
  check_dim(eta, "eta");
  if (!likelihood_feasible(y, eta))
    throw std::domain_error("hess_eta_diag: (y, eta) outside the likelihood support");
  Vec h(n_);
  for (int i = 0; i < n_; ++i) {
    switch (kind_) {
      case NoiseKind::Gaussian:
        h[i] = 1.0 / sigma2_[i];
        break;
      case NoiseKind::ScaledPoisson:
        h[i] = (y[i] == 0.0) ? 0.0 : y[i] / (eta[i] * eta[i]);
        break;
      case NoiseKind::Gamma:
        h[i] = shape_ * (2.0 * y[i] - eta[i]) / (eta[i] * eta[i] * eta[i]);
        break;
      case NoiseKind::ShiftedExponential:
        h[i] = 0.0;
        break;
    }
  }
  return h;
}

//============================================================================
// Smoothness / convergence constants
//============================================================================

NoiseConstants noise_constants(const NoiseFamily& family, const Vec& y_exact,
                               double delta, double rho, double operator_norm) {
  const int n = family.dim();
  if (y_exact.size() != n)
    throw std::invalid_argument("noise_constants: y_exact dimension mismatch");
  if (delta < 0.0 || rho < 0.0 || operator_norm < 0.0)
    throw std::invalid_argument("noise_constants: delta, rho, operator_norm must be >= 0");

  NoiseConstants nc;
  nc.m_f1 = Vec::Zero(n);
  nc.m_f2 = Vec::Zero(n);
  nc.c_f = Vec::Zero(n);
  nc.v = Vec::Zero(n);

  switch (family.kind()) {
    case NoiseKind::Gaussian: {
      nc.m_f1 = family.sigma2().cwiseInverse();
      nc.v = nc.m_f1;
      // m_f2 and c_f stay exactly zero
      break;
    }
    case NoiseKind::ScaledPoisson: {
      for (int i = 0; i < n; ++i) {
        const double margin = y_exact[i] - delta * operator_norm;
        if (!(margin > 0.0)) {
          std::ostringstream os;
          os << "noise_constants: positivity margin violated at coordinate " << i
             << " (y_exact=" << y_exact[i] << ", delta*||A||=" << delta * operator_norm
             << ")";
          throw std::domain_error(os.str());
        }
        nc.m_f1[i] = 1.0 / y_exact[i];
        nc.m_f2[i] = 1.0 / (y_exact[i] * y_exact[i]);
        nc.c_f[i] = 2.0 * (y_exact[i] + rho) / (margin * margin * margin);
      }
      nc.v = nc.m_f1;
      break;
    }
    case NoiseKind::Gamma: {
      const double a = family.shape();
      for (int i = 0; i < n; ++i) {
        const double margin = y_exact[i] - delta * operator_norm;
        if (!(margin > 0.0)) {
          std::ostringstream os;
          os << "noise_constants: positivity margin violated at coordinate " << i
             << " (y_exact=" << y_exact[i] << ", delta*||A||=" << delta * operator_norm
             << ")";
          throw std::domain_error(os.str());
        }
        const double y2 = y_exact[i] * y_exact[i];
        nc.m_f1[i] = a / y2;
        nc.m_f2[i] = 2.0 * a / (y2 * y_exact[i]);
        nc.c_f[i] = 2.0 * a * (4.0 * y_exact[i] + rho) / (margin * margin * margin * margin);
      }
      nc.v = nc.m_f1;
      break;
    }
    case NoiseKind::ShiftedExponential:
      throw std::invalid_argument(
          "noise_constants: not defined for the shifted exponential family");
  }
  return nc;
}

}  // namespace glip

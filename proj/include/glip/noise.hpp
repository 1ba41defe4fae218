#pragma once

#include <Eigen/Dense>
#include <utility>

#include "glip/rng.hpp"

namespace glip {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class NoiseKind { Gaussian, ScaledPoisson, Gamma, ShiftedExponential };

// One-parameter exponential-family noise with dispersion tau, in the
// parameterization p(y; eta, tau) = exp(-[y b(eta) - c(eta)]/tau + d(y, tau))
// with mean eta and variance -tau / b'(eta). ShiftedExponential sits outside
// the canonical interface (its support depends on eta) and is admitted only
// in boundary scenarios.
class NoiseFamily {
 public:
  static NoiseFamily gaussian(Vec sigma2);
  static NoiseFamily scaled_poisson(int n);
  static NoiseFamily gamma(int n, double shape);
  static NoiseFamily shifted_exponential(Vec rate);

  NoiseKind kind() const { return kind_; }
  int dim() const { return n_; }
  bool canonical() const { return kind_ != NoiseKind::ShiftedExponential; }

  double shape() const;       // Gamma only
  const Vec& sigma2() const;  // Gaussian only
  const Vec& rate() const;    // ShiftedExponential only

  // Canonical b, c and derivatives, per coordinate. Throw for
  // ShiftedExponential and for inadmissible eta.
  double b(double eta, int i) const;
  double b1(double eta, int i) const;
  double b2(double eta, int i) const;
  double b3(double eta, int i) const;
  double c(double eta, int i) const;
  double c1(double eta, int i) const;
  double c2(double eta, int i) const;
  double c3(double eta, int i) const;

  bool eta_admissible(const Vec& eta) const;
  void require_admissible(const Vec& eta) const;

  // Exact log density including the d(y, tau) normalizer. Returns -inf for y
  // outside the support and sets *outside_support when provided.
  double log_density(const Vec& y, const Vec& eta, double tau,
                     bool* outside_support = nullptr) const;

  // mean = eta componentwise (ShiftedExponential: eta + tau/lambda).
  std::pair<Vec, Vec> mean_variance(const Vec& eta, double tau) const;

  Vec sample(const Vec& eta, double tau, RngStream& rng) const;

  // Likelihood pieces as functions of eta, used by the posterior machinery.
  // These admit the closed Poisson boundary (eta_i = 0 with y_i = 0), where
  // the density is still well defined.
  bool likelihood_feasible(const Vec& y, const Vec& eta) const;
  double neg_loglik(const Vec& y, const Vec& eta) const;  // +inf off support
  Vec grad_eta(const Vec& y, const Vec& eta) const;
  Vec hess_eta_diag(const Vec& y, const Vec& eta) const;

 private:
  NoiseFamily(NoiseKind kind, int n) : kind_(kind), n_(n) {}
  void check_dim(const Vec& v, const char* what) const;

  NoiseKind kind_;
  int n_;
  Vec sigma2_;       // Gaussian
  Vec rate_;         // ShiftedExponential
  double shape_ = 0; // Gamma
};

// Diagonals of the smoothness/convergence constants for a family at exact
// data y_exact: M_{f,1}, M_{f,2}, C_f and the information diagonal V.
struct NoiseConstants {
  Vec m_f1;
  Vec m_f2;
  Vec c_f;
  Vec v;
};

NoiseConstants noise_constants(const NoiseFamily& family, const Vec& y_exact,
                               double delta, double rho, double operator_norm);

const char* noise_kind_name(NoiseKind k);

}  // namespace glip

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "glip/infer.hpp"
#include "glip/rng.hpp"

namespace glip {

struct BoundDiagnostics {
  double lambda_tilde = 0.0;      // delta ||Hnu^-1 D|| + rho ||Hnu^-1 A^T Mf2 A||
  double d_norm = 0.0;            // ||D||
  double trace_h_nu_inv = 0.0;
  double lambda_min_h_nu = 0.0;
  double r_delta = 0.0;           // localization radius R*(delta)
  double delta_star_k = 0.0;      // o(1) inflation of the variance term
  double c1 = 0.0, c2 = 0.0;      // raw coefficients
  double delta11 = 0.0;           // boundary-case analogue of lambda_tilde
  double delta1_star = 0.0, delta4_star = 0.0, delta5_star = 0.0;
  double b_star_min = 0.0;
  std::vector<std::string> warnings;
};

// Decomposed theoretical bound. `overall` is the max of the populated terms:
// the data term, the optional tail term, and the Laplace term
// random_bias + prior_bias + variance_term (inflated by 1+Delta*K on request).
struct BoundReport {
  bool valid = true;
  std::string invalid_reason;
  double random_bias_coeff = 0.0;  // \bar c_1
  double random_bias = 0.0;        // \bar c_1 * rho
  double prior_bias = 0.0;         // \bar c_2 * nu
  double variance_term = 0.0;
  double data_term = 0.0;          // 2 rho
  bool tail_evaluated = false;
  double tail_term = 0.0;          // Delta0 / (1 + Delta0)
  double overall = 0.0;
  BoundDiagnostics diag;

  nlohmann::json to_json() const;
};

// Interior-case posterior bound at exact data. `rho_data` is the data-level
// Ky Fan distance (analytic bound or empirical), `delta` the localization
// radius. With evaluate_tail, Delta0 is estimated by importance sampling with
// tail_budget draws from the Laplace Gaussian restricted outside the ball.
BoundReport interior_bound(const GlipProblem& problem, double rho_data, double delta,
                           bool evaluate_tail = false, int tail_budget = 0,
                           RngStream* stream = nullptr, bool inflate_variance = false);

// Localization radius [-tau log tau]^{1/((1+a) alpha)}; alpha must lie in (0,3).
double delta_schedule(double tau, double alpha_growth, double a);

// Boundary-case bound for x_star = 0 on the nonnegative orthant; requires all
// components of b* = grad h_{y_exact}(0) strictly positive.
BoundReport boundary_bound(const GlipProblem& problem, double rho_data, double delta,
                           bool include_corrections = true);

struct KnapikResult {
  double exact_sum = 0.0;
  double bound_shape = 0.0;
  int branch = 0;
};

// Exact partial sum of i^{-a-1} / (1 + nu^{-1} i^{-m})^v against the lemma's
// shape with C = 1.
KnapikResult knapik_sum(double a, double m, double v, double nu, int n);

struct SpectralSpec {
  double alpha = 1.0;   // ill-posedness, a_j ~ j^-alpha
  double beta = 1.0;    // truth smoothness, |x_j| ~ j^{-beta-1/2}
  double kappa = 1.0;   // prior smoothness, b_j^2 = j^{2 kappa + 1}
  double s = 0.0;       // information exponent of the noise family
  int p = 100;
  double tau = 1e-3;
  double nu = 1e-3;
  double m() const { return 2.0 * alpha - s + 2.0 * kappa + 1.0; }
};

enum class SpectralRegime { SelfRegularized, Mild };

struct SpectralRateResult {
  double bound_value = 0.0;  // three-term bound with C = 1
  double exponent = 0.0;     // rate exponent in tau log(1/tau)
  SpectralRegime regime = SpectralRegime::Mild;
};

SpectralRateResult spectral_rate(const SpectralSpec& spec);

// Information exponent s for the scaled-Poisson spectral model.
double poisson_information_exponent(double alpha, double beta);
// Gamma analogue, s = 2(alpha + beta + 1/2).
double gamma_information_exponent(double alpha, double beta);

enum class ProblemClass { WellPosedInterior, IllPosedInterior, BoundaryWellPosed };

double predicted_exponent(ProblemClass cls);
double predicted_exponent(const SpectralSpec& spec);

// gamma^2 schedule attached to the ill-posed interior rate.
double ill_posed_gamma_squared(double tau);

// Grid-rescaled bound: distances measured in the 1/sqrt(p) metric, data term
// scaled by sqrt(n/p). Side-condition violations are recorded as warnings.
BoundReport grid_bound(const GlipProblem& problem, int n, int p, double rho_tilde,
                       double delta_tilde);

}  // namespace glip

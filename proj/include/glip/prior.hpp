#pragma once

#include <Eigen/Dense>
#include <functional>

#include "glip/forward.hpp"

namespace glip {

enum class Domain { AllReals, NonNegOrthant };

// Prior p(x) ~ exp(-g(x)/gamma^2). Either a Gaussian-precision quadratic
// g(x) = (x-m0)^T B (x-m0)/2 or a user-supplied smooth g with derivatives.
class PriorModel {
 public:
  using ValueFn = std::function<double(const Vec&)>;
  using GradFn = std::function<Vec(const Vec&)>;
  using HessFn = std::function<Mat(const Vec&)>;

  static PriorModel gaussian(Mat precision, Vec mean, double gamma);
  static PriorModel generic(ValueFn g, GradFn grad, HessFn hess, double gamma,
                            int dim, double curvature_variation = -1.0);

  bool is_gaussian() const { return gaussian_; }
  int dim() const { return dim_; }
  double gamma() const { return gamma_; }
  void set_gamma(double gamma);

  const Mat& precision() const;
  const Vec& mean() const;

  double value(const Vec& x) const;
  Vec grad(const Vec& x) const;
  Mat hess(const Vec& x) const;

  // C_g of the local-curvature assumption: a matrix bounding
  // |v^T (hess(x) - hess(x_star)) v| <= delta v^T C_g v on B(x_star, delta).
  // Exactly zero for the Gaussian prior; for generic priors the supplied
  // metadata is used, falling back to a finite-difference probe (heuristic).
  Mat curvature_variation(const Vec& x_star, double delta) const;

 private:
  PriorModel() = default;

  bool gaussian_ = true;
  int dim_ = 0;
  double gamma_ = 1.0;
  Mat precision_;
  Vec mean_;
  ValueFn g_;
  GradFn grad_;
  HessFn hess_;
  double curvature_variation_ = -1.0;
};

struct StarPoint {
  Vec x;
  double constraint_residual = 0.0;
  bool interior = true;
};

// x_star = argmin g(x) over {x : A x = A x_true} intersected with the domain.
// Gaussian priors use an exact KKT solve (null-space reduction when the
// precision is singular); generic priors use projected Newton on the affine
// set. On the nonnegative orthant an active-set loop handles binding
// coordinates.
StarPoint solve_x_star(const ForwardOperator& op, const PriorModel& prior,
                       const Vec& x_true, Domain domain, double tol = 1e-10);

}  // namespace glip

#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <string>

#include "json.hpp"

namespace glip {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class Provenance { Dense, Spectral, Grid };

struct RankSplit {
  int p0 = 0;      // rank
  int p1 = 0;      // null-space dimension, p0 + p1 = p
  Mat projector;   // P_A, orthogonal projector onto range(A^T)
  Mat basis;       // U = [U0 U1], p x p orthonormal, P_A = U diag(I_p0, 0) U^T
};

// Forward operator with an eagerly computed singular value decomposition.
// Immutable after construction; safe to share across threads.
class ForwardOperator {
 public:
  static ForwardOperator dense(Mat a, double rank_tol = 1e-10);
  // diag(j^{-alpha}), j = 1..p
  static ForwardOperator spectral(double alpha, int p, double rank_tol = 1e-10);
  // A_ij = K(t_i, u_j) / p on the regular grids t_i = i/n, u_j = j/p.
  // Kernels: "volterra" (indicator u <= t), "gaussian_blur" (width 0.1 bump).
  static ForwardOperator grid(const std::string& kernel, int n, int p,
                              double rank_tol = 1e-10);

  Vec apply(const Vec& x) const;
  Vec apply_adjoint(const Vec& v) const;

  const Mat& matrix() const { return a_; }
  int n() const { return static_cast<int>(a_.rows()); }
  int p() const { return static_cast<int>(a_.cols()); }

  Provenance provenance() const { return prov_; }
  double spectral_alpha() const { return alpha_; }
  const std::string& grid_kernel() const { return kernel_; }
  bool is_diagonal() const;

  double operator_norm() const { return singular_values_.size() ? singular_values_[0] : 0.0; }
  const Vec& singular_values() const { return singular_values_; }

  int rank() const { return split_.p0; }
  int null_dim() const { return split_.p1; }
  const Mat& range_projector() const { return split_.projector; }
  const Mat& split_basis() const { return split_.basis; }
  Mat range_basis() const { return split_.basis.leftCols(split_.p0); }
  Mat null_basis() const { return split_.basis.rightCols(split_.p1); }

  nlohmann::json to_json() const;
  static ForwardOperator from_json(const nlohmann::json& j);

 private:
  ForwardOperator() = default;
  void decompose(double rank_tol);

  Mat a_;
  Provenance prov_ = Provenance::Dense;
  double alpha_ = 0.0;
  std::string kernel_;
  Vec singular_values_;
  RankSplit split_;
};

// Recomputes the rank decomposition of an operator at a given relative
// tolerance; the operator caches the default-tolerance split.
RankSplit rank_split(const ForwardOperator& op, double tol);
RankSplit rank_split(const Mat& a, double tol);

// Componentwise link map G with diagonal Jacobian.
class LinkMap {
 public:
  using Fn = std::function<double(double)>;

  static LinkMap identity();
  // G, its inverse and derivative; the second derivative is optional and
  // falls back to a central difference of dg. The domain is an open interval.
  static LinkMap componentwise(Fn g, Fn ginv, Fn dg, Fn d2g = nullptr,
                               double domain_lo = -std::numeric_limits<double>::infinity(),
                               double domain_hi = std::numeric_limits<double>::infinity());
  static LinkMap exp_link();

  bool is_identity() const { return identity_; }
  bool in_domain(const Vec& mu) const;

  Vec apply(const Vec& mu) const;
  Vec inverse(const Vec& eta) const;
  Vec jacobian_diag(const Vec& mu) const;
  Vec second_derivative_diag(const Vec& mu) const;

 private:
  LinkMap() = default;
  void require_domain(const Vec& mu) const;

  bool identity_ = true;
  Fn g_, ginv_, dg_, d2g_;
  double lo_ = 0, hi_ = 0;
};

ForwardOperator build_grid(const std::string& kernel, int n, int p);

}  // namespace glip

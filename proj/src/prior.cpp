#include "glip/prior.hpp"

#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace glip {

//============================================================================
// PriorModel
//============================================================================

PriorModel PriorModel::gaussian(Mat precision, Vec mean, double gamma) {
  if (precision.rows() != precision.cols())
    throw std::invalid_argument("prior: precision must be square");
  if (mean.size() != precision.rows())
    throw std::invalid_argument("prior: mean dimension mismatch");
  if (!(gamma > 0.0)) throw std::invalid_argument("prior: gamma must be positive");
  const double asym = (precision - precision.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * (1.0 + precision.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("prior: precision must be symmetric");
  PriorModel m;
  m.gaussian_ = true;
  m.dim_ = static_cast<int>(mean.size());
  m.gamma_ = gamma;
  m.precision_ = 0.5 * (precision + precision.transpose());
  m.mean_ = std::move(mean);
  return m;
}

PriorModel PriorModel::generic(ValueFn g, GradFn grad, HessFn hess, double gamma,
                               int dim, double curvature_variation) {
  if (!g || !grad || !hess)
    throw std::invalid_argument("prior: g, grad, hess are all required");
  if (!(gamma > 0.0)) throw std::invalid_argument("prior: gamma must be positive");
  if (dim < 1) throw std::invalid_argument("prior: dim must be >= 1");
  PriorModel m;
  m.gaussian_ = false;
  m.dim_ = dim;
  m.gamma_ = gamma;
  m.g_ = std::move(g);
  m.grad_ = std::move(grad);
  m.hess_ = std::move(hess);
  m.curvature_variation_ = curvature_variation;
  return m;
}

void PriorModel::set_gamma(double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("prior: gamma must be positive");
  gamma_ = gamma;
}

const Mat& PriorModel::precision() const {
  if (!gaussian_) throw std::logic_error("precision: not a Gaussian prior");
  return precision_;
}

const Vec& PriorModel::mean() const {
  if (!gaussian_) throw std::logic_error("mean: not a Gaussian prior");
  return mean_;
}

double PriorModel::value(const Vec& x) const {
  if (x.size() != dim_) throw std::invalid_argument("prior value: dimension mismatch");
  if (gaussian_) {
    const Vec d = x - mean_;
    return 0.5 * d.dot(precision_ * d);
  }
  return g_(x);
}

Vec PriorModel::grad(const Vec& x) const {
  if (x.size() != dim_) throw std::invalid_argument("prior grad: dimension mismatch");
  if (gaussian_) return precision_ * (x - mean_);
  return grad_(x);
}

Mat PriorModel::hess(const Vec& x) const {
  if (x.size() != dim_) throw std::invalid_argument("prior hess: dimension mismatch");
  if (gaussian_) return precision_;
  return hess_(x);
}

Mat PriorModel::curvature_variation(const Vec& x_star, double delta) const {
  if (gaussian_) return Mat::Zero(dim_, dim_);
  if (curvature_variation_ >= 0.0)
    return curvature_variation_ * Mat::Identity(dim_, dim_);
  if (!(delta > 0.0)) return Mat::Zero(dim_, dim_);
  // Finite-difference probe along coordinate displacements of length delta.
  const Mat h0 = hess_(x_star);
  double worst = 0.0;
  for (int i = 0; i < dim_; ++i) {
    for (double sgn : {-1.0, 1.0}) {
      Vec x = x_star;
      x[i] += sgn * delta;
      const Mat diff = hess_(x) - h0;
      Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (diff + diff.transpose()));
      worst = std::max(worst, es.eigenvalues().cwiseAbs().maxCoeff());
    }
  }
  return (worst / delta) * Mat::Identity(dim_, dim_);
}

//============================================================================
// x_star solver
//============================================================================

namespace {

// Null-space basis of a stacked constraint matrix, columns orthonormal.
Mat null_space(const Mat& c, int p) {
  if (c.rows() == 0) return Mat::Identity(p, p);
  Eigen::JacobiSVD<Mat> svd(c, Eigen::ComputeFullV);
  const Vec& sv = svd.singularValues();
  const double smax = sv.size() ? sv[0] : 0.0;
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (smax > 0.0 && sv[i] > 1e-12 * smax) ++rank;
  return svd.matrixV().rightCols(p - rank);
}

// Minimizes g over the affine set {x0 + N u}; exact one-shot solve for a
// Gaussian prior, damped Newton otherwise.
Vec minimize_on_affine(const PriorModel& prior, const Vec& x0, const Mat& nbasis,
                       double tol, int max_iter) {
  if (nbasis.cols() == 0) return x0;
  if (prior.is_gaussian()) {
    const Mat bred = nbasis.transpose() * prior.precision() * nbasis;
    Eigen::LDLT<Mat> ldlt(bred);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw std::runtime_error(
          "solve_x_star: reduced precision block (B11) is not positive definite");
    const Vec w = ldlt.solve(-nbasis.transpose() * prior.grad(x0));
    return x0 + nbasis * w;
  }
  Vec x = x0;
  for (int it = 0; it < max_iter; ++it) {
    const Vec gr = nbasis.transpose() * prior.grad(x);
    if (gr.norm() < tol) return x;
    Mat hr = nbasis.transpose() * prior.hess(x) * nbasis;
    Eigen::LDLT<Mat> ldlt(hr);
    Vec dw;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      dw = ldlt.solve(-gr);
    } else {
      double damp = 1e-8 + hr.cwiseAbs().maxCoeff() * 1e-8;
      for (int k = 0; k < 60; ++k) {
        Eigen::LDLT<Mat> d2(hr + damp * Mat::Identity(hr.rows(), hr.cols()));
        if (d2.info() == Eigen::Success && d2.isPositive()) {
          dw = d2.solve(-gr);
          break;
        }
        damp *= 10.0;
      }
      if (dw.size() == 0) dw = -gr;
    }
    // Armijo backtracking, factor 0.5
    const double f0 = prior.value(x);
    const double slope = gr.dot(dw);
    double alpha = 1.0;
    Vec xn;
    bool moved = false;
    for (int ls = 0; ls < 60 && !moved; ++ls) {
      xn = x + alpha * (nbasis * dw);
      if (prior.value(xn) <= f0 + 1e-4 * alpha * slope && (xn - x).squaredNorm() > 0.0)
        moved = true;
      else
        alpha *= 0.5;
    }
    if (!moved) {
      // Value differences are below floating-point resolution; near the
      // optimum the full Newton step still contracts the gradient.
      xn = x + nbasis * dw;
      if ((nbasis.transpose() * prior.grad(xn)).norm() < gr.norm()) {
        x = xn;
        continue;
      }
      break;
    }
    x = xn;
  }
  const Vec gr = nbasis.transpose() * prior.grad(x);
  if (gr.norm() >= 10.0 * tol) {
    std::ostringstream os;
    os << "solve_x_star: projected Newton did not converge (projected gradient "
       << gr.norm() << " > tol " << tol << ")";
    throw std::runtime_error(os.str());
  }
  return x;
}

// Exact KKT path for a positive definite Gaussian precision:
// mu = pinv(A B^{-1} A^T) A (m0 - x_true), x = m0 - B^{-1} A^T mu.
bool gaussian_kkt(const ForwardOperator& op, const PriorModel& prior,
                  const Vec& x_true, Vec& out) {
  Eigen::LLT<Mat> llt(prior.precision());
  if (llt.info() != Eigen::Success) return false;
  const Mat& a = op.matrix();
  const Mat binv_at = llt.solve(a.transpose());
  const Mat m = a * binv_at;
  const Vec rhs = a * (prior.mean() - x_true);
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(m);
  const Vec mu = cod.solve(rhs);
  out = prior.mean() - binv_at * mu;
  return true;
}

}  // namespace

StarPoint solve_x_star(const ForwardOperator& op, const PriorModel& prior,
                       const Vec& x_true, Domain domain, double tol) {
  const int p = op.p();
  if (prior.dim() != p) throw std::invalid_argument("solve_x_star: prior dimension mismatch");
  if (x_true.size() != p) throw std::invalid_argument("solve_x_star: x_true dimension mismatch");
  if (!(tol > 0.0)) throw std::invalid_argument("solve_x_star: tol must be positive");
  if (domain == Domain::NonNegOrthant && (x_true.array() < 0.0).any())
    throw std::invalid_argument("solve_x_star: x_true outside the nonnegative orthant");

  constexpr int kMaxNewton = 200;
  const Vec target = op.matrix() * x_true;

  auto finish = [&](Vec x) {
    StarPoint sp;
    if (domain == Domain::NonNegOrthant) {
      for (int i = 0; i < p; ++i)
        if (x[i] < 0.0 && x[i] > -1e-10) x[i] = 0.0;
      sp.interior = (x.array() > 0.0).all();
    } else {
      sp.interior = true;
    }
    sp.constraint_residual = (op.matrix() * x - target).norm();
    sp.x = std::move(x);
    return sp;
  };

  // Unconstrained-on-affine solution first.
  Vec x_free;
  if (op.null_dim() == 0) {
    x_free = x_true;  // the constraint pins x
  } else if (prior.is_gaussian()) {
    if (!gaussian_kkt(op, prior, x_true, x_free)) {
      // Improper prior: fall back to the null-space reduction, which only
      // needs the null-space block of the precision to be positive definite.
      x_free = minimize_on_affine(prior, x_true, op.null_basis(), tol, kMaxNewton);
    }
  } else {
    x_free = minimize_on_affine(prior, x_true, op.null_basis(), tol, kMaxNewton);
  }

  if (domain == Domain::AllReals || (x_free.array() >= -1e-10).all())
    return finish(std::move(x_free));

  // Active-set loop on {A x = A x_true, x >= 0}, starting from the feasible
  // point x_true.
  const Mat& a = op.matrix();
  Vec x = x_true;
  std::set<int> active;
  const int max_rounds = 3 * p + 10;
  for (int round = 0; round < max_rounds; ++round) {
    Mat c(a.rows() + static_cast<Eigen::Index>(active.size()), p);
    c.topRows(a.rows()) = a;
    int r = static_cast<int>(a.rows());
    for (int i : active) {
      c.row(r).setZero();
      c(r, i) = 1.0;
      ++r;
    }
    const Mat nb = null_space(c, p);
    Vec xc = minimize_on_affine(prior, x, nb, tol, kMaxNewton);
    for (int i : active) xc[i] = 0.0;

    double alpha = 1.0;
    int blocking = -1;
    for (int i = 0; i < p; ++i) {
      if (active.count(i)) continue;
      if (xc[i] < -1e-14 && x[i] > xc[i]) {
        const double ai = x[i] / (x[i] - xc[i]);
        if (ai < alpha) {
          alpha = ai;
          blocking = i;
        }
      }
    }
    if (blocking >= 0) {
      x = x + alpha * (xc - x);
      x[blocking] = 0.0;
      active.insert(blocking);
      continue;
    }
    x = xc;
    // KKT: grad g = A^T mu + lambda with lambda supported on the active set
    // and nonnegative there.
    if (active.empty()) return finish(std::move(x));
    Mat cols(p, a.rows() + static_cast<Eigen::Index>(active.size()));
    cols.leftCols(a.rows()) = a.transpose();
    int col = static_cast<int>(a.rows());
    std::vector<int> active_list(active.begin(), active.end());
    for (int i : active_list) {
      cols.col(col).setZero();
      cols(i, col) = 1.0;
      ++col;
    }
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(cols);
    const Vec coeff = cod.solve(prior.grad(x));
    int worst = -1;
    double worst_val = -10.0 * tol - 1e-12;
    for (std::size_t k = 0; k < active_list.size(); ++k) {
      const double lam = coeff[static_cast<Eigen::Index>(a.rows()) + static_cast<Eigen::Index>(k)];
      if (lam < worst_val) {
        worst_val = lam;
        worst = active_list[k];
      }
    }
    if (worst < 0) return finish(std::move(x));
    active.erase(worst);
  }
  throw std::runtime_error("solve_x_star: active-set loop did not converge");
}

}  // namespace glip

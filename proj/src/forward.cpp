#include "glip/forward.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace glip {

//============================================================================
// Decomposition
//============================================================================

RankSplit rank_split(const Mat& a, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("rank_split: tol must be positive");
  const int p = static_cast<int>(a.cols());
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeFullV);
  const Vec& sv = svd.singularValues();
  const double smax = sv.size() ? sv[0] : 0.0;

  RankSplit rs;
  rs.p0 = 0;
  if (smax > 0.0) {
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv[i] > tol * smax) ++rs.p0;
  }
  rs.p1 = p - rs.p0;
  rs.basis = svd.matrixV();  // columns: range(A^T) basis first, then null(A)
  rs.projector = rs.basis.leftCols(rs.p0) * rs.basis.leftCols(rs.p0).transpose();
  return rs;
}

RankSplit rank_split(const ForwardOperator& op, double tol) {
  return rank_split(op.matrix(), tol);
}

void ForwardOperator::decompose(double rank_tol) {
  Eigen::JacobiSVD<Mat> svd(a_, Eigen::ComputeFullV);
  singular_values_ = svd.singularValues();
  split_ = rank_split(a_, rank_tol);
}

ForwardOperator ForwardOperator::dense(Mat a, double rank_tol) {
  if (a.rows() < 1 || a.cols() < 1)
    throw std::invalid_argument("dense: matrix must be nonempty");
  ForwardOperator op;
  op.a_ = std::move(a);
  op.prov_ = Provenance::Dense;
  op.decompose(rank_tol);
  return op;
}

ForwardOperator ForwardOperator::spectral(double alpha, int p, double rank_tol) {
  if (!(alpha > 0.0)) throw std::invalid_argument("spectral: alpha must be positive");
  if (p < 1) throw std::invalid_argument("spectral: p must be >= 1");
  Mat a = Mat::Zero(p, p);
  for (int j = 0; j < p; ++j) a(j, j) = std::pow(static_cast<double>(j + 1), -alpha);
  ForwardOperator op;
  op.a_ = std::move(a);
  op.prov_ = Provenance::Spectral;
  op.alpha_ = alpha;
  op.decompose(rank_tol);
  return op;
}

ForwardOperator ForwardOperator::grid(const std::string& kernel, int n, int p,
                                      double rank_tol) {
  if (n < 1 || p < 1) throw std::invalid_argument("grid: n and p must be >= 1");
  Mat a(n, p);
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i + 1) / n;
    for (int j = 0; j < p; ++j) {
      const double u = static_cast<double>(j + 1) / p;
      double k;
      if (kernel == "volterra") {
        k = (u <= t) ? 1.0 : 0.0;
      } else if (kernel == "gaussian_blur") {
        const double w = 0.1;
        k = std::exp(-0.5 * (t - u) * (t - u) / (w * w));
      } else {
        throw std::invalid_argument("grid: unknown kernel id '" + kernel + "'");
      }
      a(i, j) = k / p;  // quadrature weight folded into the matrix
    }
  }
  ForwardOperator op;
  op.a_ = std::move(a);
  op.prov_ = Provenance::Grid;
  op.kernel_ = kernel;
  op.decompose(rank_tol);
  return op;
}

ForwardOperator build_grid(const std::string& kernel, int n, int p) {
  return ForwardOperator::grid(kernel, n, p);
}

Vec ForwardOperator::apply(const Vec& x) const {
  if (x.size() != a_.cols()) {
    std::ostringstream os;
    os << "apply: dimension mismatch, operator is " << a_.rows() << "x" << a_.cols()
       << ", x has size " << x.size();
    throw std::invalid_argument(os.str());
  }
  return a_ * x;
}

Vec ForwardOperator::apply_adjoint(const Vec& v) const {
  if (v.size() != a_.rows()) {
    std::ostringstream os;
    os << "apply_adjoint: dimension mismatch, operator is " << a_.rows() << "x"
       << a_.cols() << ", v has size " << v.size();
    throw std::invalid_argument(os.str());
  }
  return a_.transpose() * v;
}

bool ForwardOperator::is_diagonal() const {
  if (a_.rows() != a_.cols()) return false;
  if (prov_ == Provenance::Spectral) return true;
  for (Eigen::Index i = 0; i < a_.rows(); ++i)
    for (Eigen::Index j = 0; j < a_.cols(); ++j)
      if (i != j && a_(i, j) != 0.0) return false;
  return true;
}

nlohmann::json ForwardOperator::to_json() const {
  nlohmann::json j;
  switch (prov_) {
    case Provenance::Dense: {
      j["provenance"] = "dense";
      nlohmann::json rows = nlohmann::json::array();
      for (Eigen::Index i = 0; i < a_.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index k = 0; k < a_.cols(); ++k) row.push_back(a_(i, k));
        rows.push_back(row);
      }
      j["matrix"] = rows;
      break;
    }
    case Provenance::Spectral:
      j["provenance"] = "spectral";
      j["alpha"] = alpha_;
      j["p"] = p();
      break;
    case Provenance::Grid:
      j["provenance"] = "grid";
      j["kernel"] = kernel_;
      j["n"] = n();
      j["p"] = p();
      break;
  }
  return j;
}

ForwardOperator ForwardOperator::from_json(const nlohmann::json& j) {
  const std::string prov = j.at("provenance").get<std::string>();
  if (prov == "dense") {
    const auto& rows = j.at("matrix");
    const int n = static_cast<int>(rows.size());
    if (n == 0) throw std::invalid_argument("operator json: empty matrix");
    const int p = static_cast<int>(rows[0].size());
    Mat a(n, p);
    for (int i = 0; i < n; ++i) {
      if (static_cast<int>(rows[i].size()) != p)
        throw std::invalid_argument("operator json: ragged matrix");
      for (int k = 0; k < p; ++k) a(i, k) = rows[i][k].get<double>();
    }
    return dense(std::move(a));
  }
  if (prov == "spectral")
    return spectral(j.at("alpha").get<double>(), j.at("p").get<int>());
  if (prov == "grid")
    return grid(j.at("kernel").get<std::string>(), j.at("n").get<int>(),
                j.at("p").get<int>());
  throw std::invalid_argument("operator json: unknown provenance '" + prov + "'");
}

//============================================================================
// Link maps
//============================================================================

LinkMap LinkMap::identity() {
  LinkMap l;
  l.identity_ = true;
  return l;
}

LinkMap LinkMap::componentwise(Fn g, Fn ginv, Fn dg, Fn d2g, double domain_lo,
                               double domain_hi) {
  if (!g || !ginv || !dg)
    throw std::invalid_argument("componentwise link: g, ginv, dg are required");
  LinkMap l;
  l.identity_ = false;
  l.g_ = std::move(g);
  l.ginv_ = std::move(ginv);
  l.dg_ = std::move(dg);
  l.d2g_ = std::move(d2g);
  l.lo_ = domain_lo;
  l.hi_ = domain_hi;
  return l;
}

LinkMap LinkMap::exp_link() {
  return componentwise([](double t) { return std::exp(t); },
                       [](double t) { return std::log(t); },
                       [](double t) { return std::exp(t); },
                       [](double t) { return std::exp(t); });
}

bool LinkMap::in_domain(const Vec& mu) const {
  if (identity_) return true;
  return (mu.array() > lo_).all() && (mu.array() < hi_).all();
}

void LinkMap::require_domain(const Vec& mu) const {
  if (!in_domain(mu)) throw std::domain_error("link: argument outside the link domain");
}

Vec LinkMap::apply(const Vec& mu) const {
  if (identity_) return mu;
  require_domain(mu);
  Vec out(mu.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i) out[i] = g_(mu[i]);
  return out;
}

Vec LinkMap::inverse(const Vec& eta) const {
  if (identity_) return eta;
  Vec out(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) out[i] = ginv_(eta[i]);
  return out;
}

Vec LinkMap::jacobian_diag(const Vec& mu) const {
  if (identity_) return Vec::Ones(mu.size());
  require_domain(mu);
  Vec out(mu.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i) out[i] = dg_(mu[i]);
  return out;
}

Vec LinkMap::second_derivative_diag(const Vec& mu) const {
  if (identity_) return Vec::Zero(mu.size());
  require_domain(mu);
  Vec out(mu.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    if (d2g_) {
      out[i] = d2g_(mu[i]);
    } else {
      const double h = 1e-6 * (1.0 + std::abs(mu[i]));
      out[i] = (dg_(mu[i] + h) - dg_(mu[i] - h)) / (2.0 * h);
    }
  }
  return out;
}

}  // namespace glip

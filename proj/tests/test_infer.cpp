#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "glip/infer.hpp"
#include "glip/metrics.hpp"
#include "test_helpers.hpp"

using namespace glip;
using glip_test::fd_gradient;
using glip_test::ks_distance;
using glip_test::random_matrix;
using glip_test::random_spd;

namespace {

GlipProblem conjugate_1d(double tau, double sigma2, double gamma, double x_true) {
  Vec s2(1), xt(1);
  s2 << sigma2;
  xt << x_true;
  return GlipProblem(NoiseFamily::gaussian(s2), ForwardOperator::dense(Mat::Identity(1, 1)),
                     LinkMap::identity(),
                     PriorModel::gaussian(Mat::Identity(1, 1), Vec::Zero(1), gamma), xt,
                     Domain::AllReals, tau);
}

GlipProblem poisson_1d(double tau, double x_true, double gamma) {
  Vec xt(1);
  xt << x_true;
  return GlipProblem(NoiseFamily::scaled_poisson(1),
                     ForwardOperator::dense(Mat::Identity(1, 1)), LinkMap::identity(),
                     PriorModel::gaussian(Mat::Identity(1, 1), Vec::Zero(1), gamma), xt,
                     Domain::NonNegOrthant, tau);
}

}  // namespace

TEST_CASE("h assembles the gaussian quadratic exactly") {
  // identity A and link, unit noise: h(x) = sum(x^2/2 - y x) + nu x^2/2
  auto prob = conjugate_1d(0.1, 1.0, 1.0, 0.5);
  Vec y(1);
  y << 1.0;
  const double nu = prob.nu();
  const auto he = h_value_grad_hess(prob, y, y);
  CHECK(he.grad[0] == doctest::Approx(nu * y[0]).epsilon(1e-12));
  Vec x(1);
  x << -0.7;
  const auto h2 = h_value_grad_hess(prob, y, x);
  CHECK(h2.value ==
        doctest::Approx(0.5 * x[0] * x[0] - y[0] * x[0] + nu * 0.5 * x[0] * x[0]));
  CHECK(h2.hess(0, 0) == doctest::Approx(1.0 + nu));
}

TEST_CASE("h gradient agrees with finite differences at random points") {
  RngStream rng(31);
  const Mat a = (random_matrix(3, 2, rng) * 0.4).array() + 0.8;
  auto prob = GlipProblem(NoiseFamily::scaled_poisson(3), ForwardOperator::dense(a),
                          LinkMap::identity(),
                          PriorModel::gaussian(random_spd(2, rng), Vec::Zero(2), 1.2),
                          Vec::Ones(2), Domain::NonNegOrthant, 0.2);
  // y on the tau-lattice so the likelihood is defined
  Vec y(3);
  y << 0.2 * 4, 0.2 * 2, 0.2 * 7;
  for (int rep = 0; rep < 50; ++rep) {
    Vec x(2);
    x << 0.5 + rng.uniform(), 0.5 + rng.uniform();
    const auto he = h_value_grad_hess(prob, y, x);
    const Vec fd = fd_gradient([&](const Vec& z) { return h_value(prob, y, z); }, x);
    CHECK((he.grad - fd).norm() < 1e-6 * (1.0 + fd.norm()));
  }
}

TEST_CASE("h supports componentwise links with exact derivatives") {
  RngStream rng(37);
  auto link = LinkMap::exp_link();
  Mat a(2, 2);
  a << 0.6, 0.2, 0.1, 0.8;
  auto prob = GlipProblem(NoiseFamily::scaled_poisson(2), ForwardOperator::dense(a), link,
                          PriorModel::gaussian(Mat::Identity(2, 2), Vec::Zero(2), 1.0),
                          Vec::Zero(2), Domain::AllReals, 0.5);
  Vec y(2);
  y << 0.5 * 3, 0.5 * 1;
  for (int rep = 0; rep < 20; ++rep) {
    Vec x(2);
    x << rng.normal() * 0.3, rng.normal() * 0.3;
    const auto he = h_value_grad_hess(prob, y, x);
    const Vec fd = fd_gradient([&](const Vec& z) { return h_value(prob, y, z); }, x);
    CHECK((he.grad - fd).norm() < 1e-6 * (1.0 + fd.norm()));
  }
}

TEST_CASE("map estimate matches the conjugate closed form") {
  // posterior mode y/(1+nu) for identity A, unit sigma, zero prior mean
  auto prob = conjugate_1d(0.1, 1.0, 1.0, 0.5);
  Vec y(1);
  y << 1.0;
  const Vec xm = map_estimate(prob, y, Vec::Zero(1), 1e-12);
  CHECK(xm[0] == doctest::Approx(10.0 / 11.0).epsilon(1e-10));
}

TEST_CASE("map with exact data and a vanishing prior recovers x_true") {
  RngStream rng(41);
  const Mat a = random_spd(3, rng);  // full rank
  Vec xt(3);
  xt << 0.4, -0.2, 1.1;
  // gamma = inf makes nu = 0 (improper flat prior)
  auto prob = GlipProblem(NoiseFamily::gaussian(Vec::Ones(3)), ForwardOperator::dense(a),
                          LinkMap::identity(),
                          PriorModel::gaussian(Mat::Identity(3, 3), Vec::Zero(3),
                                               std::numeric_limits<double>::infinity()),
                          xt, Domain::AllReals, 0.01);
  const Vec xm = map_estimate(prob, prob.y_exact(), Vec::Zero(3), 1e-11);
  CHECK((xm - xt).norm() < 1e-8);
}

TEST_CASE("boundary poisson map is exactly zero") {
  auto prob = poisson_1d(1e-3, 0.0, 1.0);
  Vec y = Vec::Zero(1);
  const Vec xm = map_estimate(prob, y, Vec::Zero(1), 1e-10);
  CHECK(xm[0] == 0.0);
  // also from a positive start
  const Vec xm2 = map_estimate(prob, y, Vec::Ones(1), 1e-10);
  CHECK(xm2[0] == 0.0);
}

TEST_CASE("map is a fixed point of itself") {
  auto prob = poisson_1d(0.05, 2.0, 1.0);
  Vec y(1);
  y << 0.05 * 42;
  const Vec xm = map_estimate(prob, y, Vec::Ones(1), 1e-10);
  int iters = 0;
  const Vec xm2 = map_estimate(prob, y, xm, 1e-10, 200, &iters);
  CHECK(iters <= 2);
  CHECK((xm2 - xm).norm() < 1e-12);
}

TEST_CASE("laplace summary on the conjugate diagonal problem") {
  const int p = 3;
  const double tau = 0.01, nu = 0.01;
  auto prob = GlipProblem(NoiseFamily::gaussian(Vec::Ones(p)),
                          ForwardOperator::dense(Mat::Identity(p, p)), LinkMap::identity(),
                          PriorModel::gaussian(Mat::Identity(p, p), Vec::Zero(p),
                                               std::sqrt(tau / nu)),
                          Vec::Ones(p), Domain::AllReals, tau);
  const auto xs = solve_x_star(prob);
  const auto s = laplace_summary(prob, prob.y_exact(), xs);
  CHECK((s.h_nu - 1.01 * Mat::Identity(p, p)).norm() < 1e-12);
  CHECK(s.trace_h_nu_inv == doctest::Approx(p / 1.01).epsilon(1e-12));
  // exact data: x0 = nu H^{-1} grad g(x*)
  const Vec expected_x0 = nu * s.h.inverse() * prob.prior().grad(xs.x);
  CHECK((s.x0 - expected_x0).norm() < 1e-12);
  CHECK((s.h * s.x0 -
         (prob.op().matrix().transpose() * Vec::Zero(p) + nu * prob.prior().grad(xs.x)))
            .norm() < 1e-8);
}

TEST_CASE("block determinants agree with an eigendecomposition oracle") {
  RngStream rng(47);
  Mat a(3, 4);
  a.setZero();
  a.row(0) << 1.0, 0.5, 0.0, 0.2;
  a.row(1) << 0.0, 1.0, 0.5, -0.1;
  a.row(2) = a.row(0) + a.row(1);  // rank 2
  const Mat b = random_spd(4, rng);
  auto prob = GlipProblem(NoiseFamily::gaussian(Vec::Ones(3)), ForwardOperator::dense(a),
                          LinkMap::identity(), PriorModel::gaussian(b, Vec::Zero(4), 1.0),
                          Vec::Ones(4), Domain::AllReals, 0.01);
  const auto xs = solve_x_star(prob);
  const auto s = laplace_summary(prob, prob.y_exact(), xs);

  const Mat u0 = prob.op().range_basis();
  const Mat u1 = prob.op().null_basis();
  const Mat fy = a.transpose() * a;  // V = I for unit gaussian noise
  auto det_by_eigen = [](const Mat& m) {
    if (m.rows() == 0) return 1.0;
    Eigen::SelfAdjointEigenSolver<Mat> es(m);
    double d = 1.0;
    for (int i = 0; i < es.eigenvalues().size(); ++i) d *= es.eigenvalues()[i];
    return d;
  };
  CHECK(s.det_omega00 ==
        doctest::Approx(det_by_eigen(u0.transpose() * fy * u0)).epsilon(1e-8));
  CHECK(s.det_b11 == doctest::Approx(det_by_eigen(u1.transpose() * b * u1)).epsilon(1e-8));
}

TEST_CASE("h_nu eigenvalues respect the prior curvature floor") {
  Mat a(2, 2);
  a << 1.0, 1.0, 1.0, 1.0;  // rank 1
  const double nu = 1e-4;
  Mat b = Mat::Identity(2, 2) * 2.0;
  auto prob = GlipProblem(NoiseFamily::gaussian(Vec::Ones(2)), ForwardOperator::dense(a),
                          LinkMap::identity(),
                          PriorModel::gaussian(b, Vec::Zero(2), std::sqrt(0.01 / nu)),
                          Vec::Ones(2), Domain::AllReals, 0.01);
  const auto xs = solve_x_star(prob);
  const auto s = laplace_summary(prob, prob.y_exact(), xs);
  const Mat u1 = prob.op().null_basis();
  Eigen::SelfAdjointEigenSolver<Mat> es(u1.transpose() * b * u1);
  CHECK(s.lambda_min_h_nu >= nu * es.eigenvalues().minCoeff() - 1e-12);
}

TEST_CASE("conjugate sampling matches the closed-form posterior") {
  RngStream rng(53);
  const int p = 3, n = 4;
  const Mat a = random_matrix(n, p, rng);
  const Mat b = random_spd(p, rng);
  Vec s2(n);
  for (int i = 0; i < n; ++i) s2[i] = 0.5 + rng.uniform();
  Vec xt(p), m0(p);
  for (int j = 0; j < p; ++j) {
    xt[j] = rng.normal();
    m0[j] = 0.3 * rng.normal();
  }
  const double tau = 0.05, gamma = 0.8;
  auto prob = GlipProblem(NoiseFamily::gaussian(s2), ForwardOperator::dense(a),
                          LinkMap::identity(), PriorModel::gaussian(b, m0, gamma), xt,
                          Domain::AllReals, tau);
  RngStream data_rng(54);
  const Vec y = prob.noise().sample(prob.y_exact(), tau, data_rng);

  // closed form
  const double nu = prob.nu();
  const Mat h = a.transpose() * s2.cwiseInverse().asDiagonal() * a + nu * b;
  const Vec mean = h.llt().solve(a.transpose() * (y.array() / s2.array()).matrix() +
                                 nu * b * m0);
  const Mat cov = tau * h.inverse();

  // laplace summary reproduces it exactly
  const auto xs = solve_x_star(prob);
  const auto s = laplace_summary(prob, y, xs);
  CHECK((s.laplace_mean - mean).norm() < 1e-10);
  CHECK((s.laplace_cov - cov).norm() < 1e-10);

  // moments of exact draws within monte carlo error
  const int count = 100000;
  RngStream draw_rng(55);
  const auto res = sample_posterior(prob, y, count, draw_rng);
  CHECK(res.acceptance_rate == 1.0);
  Vec mc_mean = Vec::Zero(p);
  for (int k = 0; k < count; ++k) mc_mean += res.draws.row(k).transpose();
  mc_mean /= count;
  for (int j = 0; j < p; ++j) {
    const double se = std::sqrt(cov(j, j) / count);
    CHECK(std::abs(mc_mean[j] - mean[j]) < 5.0 * se);
  }
  Mat mc_cov = Mat::Zero(p, p);
  for (int k = 0; k < count; ++k) {
    const Vec d = res.draws.row(k).transpose() - mc_mean;
    mc_cov += d * d.transpose();
  }
  mc_cov /= (count - 1);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) {
      const double se =
          std::sqrt((cov(i, i) * cov(j, j) + cov(i, j) * cov(i, j)) / count);
      CHECK(std::abs(mc_cov(i, j) - cov(i, j)) < 5.0 * se);
    }
}

TEST_CASE("metropolis marginal matches a quadrature oracle") {
  const double tau = 0.05;
  auto prob = poisson_1d(tau, 2.0, 1.0);
  Vec y(1);
  y << tau * 36;  // a lattice observation near eta = 1.8

  // quadrature oracle on a fine grid
  const int grid_n = 10000;
  const double lo = 1e-8, hi = 6.0;
  std::vector<double> grid(grid_n), dens(grid_n);
  const double nu = prob.nu();
  for (int i = 0; i < grid_n; ++i) {
    const double x = lo + (hi - lo) * i / (grid_n - 1.0);
    grid[i] = x;
    const double h = (x - y[0] * std::log(x)) + nu * 0.5 * x * x;
    dens[i] = std::exp(-h / tau);
  }
  std::vector<double> cdf(grid_n, 0.0);
  for (int i = 1; i < grid_n; ++i)
    cdf[i] = cdf[i - 1] + 0.5 * (dens[i] + dens[i - 1]) * (grid[i] - grid[i - 1]);
  for (auto& c : cdf) c /= cdf.back();

  RngStream rng(57);
  SamplerConfig cfg;
  cfg.burn_in = 3000;
  cfg.thin = 5;
  const auto res = sample_posterior(prob, y, 100000, rng, cfg);
  CHECK(res.acceptance_rate > 0.05);
  CHECK(res.acceptance_rate < 0.8);
  std::vector<double> draws(100000);
  for (int k = 0; k < 100000; ++k) draws[k] = res.draws(k, 0);
  CHECK(ks_distance(draws, grid, cdf) < 0.02);
}

TEST_CASE("sampling is reproducible for a fixed seed") {
  auto prob = poisson_1d(0.1, 1.5, 1.0);
  Vec y(1);
  y << 0.1 * 12;
  RngStream a(99, 7), b(99, 7);
  const auto ra = sample_posterior(prob, y, 1, a);
  const auto rb = sample_posterior(prob, y, 1, b);
  CHECK(ra.draws(0, 0) == rb.draws(0, 0));
}

TEST_CASE("posterior covariance equals tau times the inverse curvature in the conjugate case") {
  RngStream rng(61);
  const Mat a = random_matrix(3, 3, rng);
  const Mat b = random_spd(3, rng);
  auto prob = GlipProblem(NoiseFamily::gaussian(Vec::Ones(3)), ForwardOperator::dense(a),
                          LinkMap::identity(), PriorModel::gaussian(b, Vec::Zero(3), 1.0),
                          Vec::Ones(3), Domain::AllReals, 0.02);
  const auto xs = solve_x_star(prob);
  const auto s = laplace_summary(prob, prob.y_exact(), xs);
  const Mat h = a.transpose() * a + prob.nu() * b;
  CHECK((s.laplace_cov - 0.02 * h.inverse()).norm() < 1e-10);
}

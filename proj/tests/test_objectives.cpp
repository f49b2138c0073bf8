#include <catch2/catch.hpp>

#include <cmath>

#include "sgdlab/objective.hpp"
#include "sgdlab/rng.hpp"

using namespace sgdlab;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Vec central_diff_grad(const ObjectiveModel& m, const Vec& theta, double h = 1e-5) {
  Vec g(m.dim);
  for (int i = 0; i < m.dim; ++i) {
    Vec p = theta, q = theta;
    p[i] += h;
    q[i] -= h;
    g[i] = (m.value(p) - m.value(q)) / (2 * h);
  }
  return g;
}

Mat central_diff_hessian(const ObjectiveModel& m, const Vec& theta, double h = 1e-5) {
  Mat out(m.dim, m.dim);
  for (int i = 0; i < m.dim; ++i) {
    Vec p = theta, q = theta;
    p[i] += h;
    q[i] -= h;
    out.col(i) = (m.grad(p) - m.grad(q)) / (2 * h);
  }
  return 0.5 * (out + out.transpose());
}

}  // namespace

TEST_CASE("quadratic_mean examples") {
  const auto m = make_quadratic_mean(v2(0, 1), 1.0);
  CHECK((eval_grad(m, v2(2, 3)) - v2(2, 2)).norm() == 0.0);
  CHECK(eval_value(m, v2(0, 1)) == Approx((1.0 + 1.0) / 2.0));

  const auto m05 = make_quadratic_mean(v2(0, 1), 0.5);
  const Mat nc = eval_noise_cov(m05, v2(3, -7));
  CHECK(nc(0, 0) == Approx(0.25));
  CHECK(nc(1, 1) == Approx(1.0));
  CHECK(nc(0, 1) == 0.0);
  CHECK(eval_hessian(m, v2(5, 5)).isIdentity(1e-15));

  CHECK_THROWS_AS(make_quadratic_mean(v2(0, 1), 0.0), DomainError);
  CHECK_THROWS_AS(make_quadratic_mean(v2(0, -1), 1.0), DomainError);
  CHECK_THROWS_AS(eval_grad(m, Vec::Zero(3)), ShapeError);
}

TEST_CASE("linreg_random matches the Section 5 parameterization") {
  Mat alpha = Mat::Zero(2, 2);
  alpha(0, 0) = 0.02;
  alpha(1, 1) = 0.005;
  const auto m = make_linreg_random(alpha, 0.1, v2(0, 0));
  // constant term is tau^2/2; the quadratic part matches the displayed
  // (0.02 th1^2 + 0.005 th2^2)/2 exactly
  CHECK(eval_value(m, v2(0, 0)) == Approx(0.005));
  CHECK(eval_value(m, v2(1, 1)) - eval_value(m, v2(0, 0)) ==
        Approx((0.02 + 0.005) / 2.0));
  const Mat nc0 = eval_noise_cov(m, v2(0, 0));
  CHECK(nc0(0, 0) == Approx(2e-4));
  CHECK(nc0(1, 1) == Approx(5e-5));
  CHECK(std::abs(nc0(0, 1)) <= 1e-18);
  CHECK(eval_noise_cov(m, v2(1, 1))(0, 1) == Approx(1e-4));
  CHECK((eval_grad(m, v2(1, 2)) - v2(0.02, 0.01)).norm() <= 1e-16);

  Mat bad = Mat::Zero(2, 2);
  bad(0, 0) = -1.0;
  CHECK_THROWS_AS(make_linreg_random(bad, 0.1, v2(0, 0)), DomainError);
}

TEST_CASE("linreg_fixed orthogonal design") {
  for (std::int64_t n : {4, 7, 100, 1001}) {
    const auto m = make_linreg_fixed(v2(0, 0), 0.1, n);
    CHECK((eval_grad(m, v2(1, 0)) - v2(1, 0)).norm() == 0.0);
    const Mat nc = eval_noise_cov(m, v2(3, 4));
    CHECK(nc(0, 0) == Approx(0.01));
    CHECK(nc(1, 1) == Approx(0.01));
    CHECK(eval_value(m, v2(0, 0)) == Approx(0.005));
    // the constructed design satisfies D'D/n = I exactly
    Mat dtd = Mat::Zero(2, 2);
    RngStream rng(1);
    Vec datum(3);
    for (std::int64_t i = 0; i < n; ++i) {
      m.indexed_sampler(i, rng, datum);
      dtd += datum.tail(2) * datum.tail(2).transpose();
    }
    CHECK((dtd / double(n) - Mat::Identity(2, 2)).norm() <= 1e-12);
  }
  CHECK_THROWS_AS(make_linreg_fixed(v2(0, 0), 0.1, 1), DomainError);
}

TEST_CASE("tensor model moments and Hessian-analog") {
  const TensorMoments tm = tensor_moments(WDist::uniform_sym);
  CHECK(tm.psi[4] == Approx(1.8));
  CHECK(tm.psi[6] == Approx(27.0 / 7.0));
  CHECK(tm.psi[8] == Approx(9.0));

  const auto m = make_tensor4_d2(WDist::uniform_sym);
  const Mat h_saddle = eval_hessian(m, v2(1, 0));
  CHECK(h_saddle(0, 0) == Approx(-8.0));
  CHECK(h_saddle(1, 1) == Approx(4.0));
  const double invsq = 1.0 / std::sqrt(2.0);
  const Mat h_min = eval_hessian(m, v2(invsq, -invsq));
  CHECK(h_min(0, 0) == Approx(-4.0));
  CHECK(h_min(1, 1) == Approx(-4.0));
  CHECK(std::abs(h_min(0, 1)) <= 1e-14);
}

TEST_CASE("tensor noise covariance matches the critical-point closed forms") {
  const auto m = make_tensor4_d2(WDist::uniform_sym);
  const TensorMoments tm = tensor_moments(WDist::uniform_sym);
  const double p4 = tm.psi[4], p6 = tm.psi[6], p8 = tm.psi[8];
  // sigma^2(beta) = 16 Cov[(beta'W)^3 W]; at the saddle the covariance factor
  // is diag(psi8 - psi4^2, psi6)
  const Mat s_saddle = eval_noise_cov(m, v2(1, 0));
  CHECK(s_saddle(0, 0) == Approx(16.0 * (p8 - p4 * p4)));
  CHECK(s_saddle(1, 1) == Approx(16.0 * p6));
  CHECK(std::abs(s_saddle(0, 1)) <= 1e-12);
  // minimizer 2^{-1/2}(1,-1): the 1/8 [...] matrix with psi3 = psi5 = 0
  const double invsq = 1.0 / std::sqrt(2.0);
  const Mat s_min = eval_noise_cov(m, v2(invsq, -invsq));
  const double diag =
      16.0 * (p8 + 16 * p6 + 15 * p4 * p4 - (p4 + 3) * (p4 + 3)) / 8.0;
  const double off =
      16.0 * (-12 * p6 - 20 * p4 * p4 + (p4 + 3) * (p4 + 3)) / 8.0;
  CHECK(s_min(0, 0) == Approx(diag));
  CHECK(s_min(0, 1) == Approx(off));
  CHECK(s_min(1, 1) == Approx(diag));
  // PSD along the sphere
  RngStream rng(3);
  for (int i = 0; i < 20; ++i) {
    const double phi = 2 * M_PI * rng.uniform();
    const Mat s = eval_noise_cov(m, v2(std::cos(phi), std::sin(phi)));
    Eigen::SelfAdjointEigenSolver<Mat> es(s);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("gradient consistency against finite differences") {
  RngStream rng(11);
  std::vector<ObjectiveModel> models;
  models.push_back(make_quadratic_mean(v2(0.4, 1.3), 0.8));
  Mat alpha(2, 2);
  alpha << 0.6, 0.1, 0.1, 0.4;
  models.push_back(make_linreg_random(alpha, 0.5, v2(0.2, -0.3)));
  models.push_back(make_linreg_fixed(v2(1.0, 2.0), 0.7, 64));
  for (const auto& m : models) {
    for (int trial = 0; trial < 10; ++trial) {
      Vec theta(2);
      theta << 4.0 * rng.uniform() - 2.0, 4.0 * rng.uniform() - 2.0;
      const Vec g = m.grad(theta);
      const Vec fd = central_diff_grad(m, theta);
      CHECK((g - fd).norm() <= 1e-5 * (1.0 + g.norm()));
      const Mat h = m.hessian(theta);
      const Mat fdh = central_diff_hessian(m, theta);
      CHECK((h - fdh).norm() <= 1e-4 * (1.0 + h.norm()));
    }
  }
}

TEST_CASE("tensor gradient is the sphere-projected finite difference") {
  const auto m = make_tensor4_d2(WDist::uniform_sym);
  RngStream rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const double phi = 2 * M_PI * rng.uniform();
    const Vec x = v2(std::cos(phi), std::sin(phi));
    const Vec fd = central_diff_grad(m, x);
    const Vec fd_tan = fd - x * x.dot(fd);
    CHECK((m.grad(x) - fd_tan).norm() <= 1e-5 * (1.0 + m.grad(x).norm()));
  }
}

TEST_CASE("datum gradients are unbiased with matching covariance") {
  struct Case {
    ObjectiveModel model;
    Vec theta;
  };
  Mat alpha(2, 2);
  alpha << 0.6, 0.1, 0.1, 0.4;
  std::vector<Case> cases;
  cases.push_back({make_quadratic_mean(v2(0, 1), 1.0), v2(0.3, 1.7)});
  cases.push_back({make_linreg_random(alpha, 0.5, v2(0.2, -0.3)), v2(1.0, 1.0)});
  // fixed design: sigma^2(theta) is exact at the minimizer
  cases.push_back({make_linreg_fixed(v2(1.0, 2.0), 0.7, 64), v2(1.0, 2.0)});

  const int n = 100000;
  for (const auto& c : cases) {
    RngStream rng(77);
    Vec datum(c.model.datum_dim), g(2);
    Vec mean = Vec::Zero(2);
    Mat second = Mat::Zero(2, 2);
    for (int i = 0; i < n; ++i) {
      c.model.datum_sampler(rng, datum);
      c.model.datum_grad(c.theta, datum, g);
      mean += g;
      second += g * g.transpose();
    }
    mean /= double(n);
    const Mat cov = second / double(n) - mean * mean.transpose();
    const Vec expected = c.model.grad(c.theta);
    const Mat expected_cov = c.model.noise_cov(c.theta);
    for (int i = 0; i < 2; ++i) {
      const double se = std::sqrt(expected_cov(i, i) / n);
      CHECK(std::abs(mean[i] - expected[i]) <= 4.0 * se);
    }
    CHECK((cov - expected_cov).norm() <= 0.05 * expected_cov.norm());
  }
}

TEST_CASE("minimizer is a stationary point") {
  const auto a = make_quadratic_mean(v2(0.5, 2.0), 1.0);
  CHECK(eval_grad(a, *a.minimizer).norm() <= 1e-12);
  Mat alpha(2, 2);
  alpha << 0.6, 0.1, 0.1, 0.4;
  const auto b = make_linreg_random(alpha, 0.5, v2(0.2, -0.3));
  CHECK(eval_grad(b, *b.minimizer).norm() <= 1e-12);
  const auto c = make_linreg_fixed(v2(1.0, 2.0), 0.7, 64);
  CHECK(eval_grad(c, *c.minimizer).norm() <= 1e-12);
}

TEST_CASE("tensor datum_grad matches the online update term") {
  const auto m = make_tensor4_d2(WDist::rademacher);
  Vec w(2), g(2);
  w << 1.0, -1.0;
  const Vec x = v2(0.6, 0.8);
  m.datum_grad(x, w, g);
  const double dot = 0.6 - 0.8;
  CHECK(g[0] == Approx(-4.0 * dot * dot * dot * 1.0));
  CHECK(g[1] == Approx(-4.0 * dot * dot * dot * -1.0));
  // projection hook renormalizes
  Vec y = v2(3.0, 4.0);
  m.post_step(y);
  CHECK(y.norm() == Approx(1.0).epsilon(1e-15));
}

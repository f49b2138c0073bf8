#include <catch2/catch.hpp>

#include <cmath>

#include "sgdlab/oracles.hpp"
#include "sgdlab/solvers.hpp"

using namespace sgdlab;

namespace {

// Independent power-series oracle: 30 explicit terms of
// sum_j (-1)^j (u/2)^{2j+1} / (j! (j+1)!), written without reusing the
// implementation's accumulation scheme.
double j1_series_oracle(double u) {
  long double sum = 0.0L;
  for (int j = 0; j < 30; ++j) {
    long double num = 1.0L;
    for (int i = 0; i < 2 * j + 1; ++i) num *= static_cast<long double>(u) / 2.0L;
    long double fact_j = 1.0L, fact_j1 = 1.0L;
    for (int i = 2; i <= j; ++i) fact_j *= i;
    for (int i = 2; i <= j + 1; ++i) fact_j1 *= i;
    const long double term = num / (fact_j * fact_j1);
    sum += (j % 2 == 0) ? term : -term;
  }
  return static_cast<double>(sum);
}

double fd_derivative(double (*f)(double), double u, double h) {
  return (f(u + h) - f(u - h)) / (2.0 * h);
}

}  // namespace

TEST_CASE("bessel_j1 basics") {
  CHECK(bessel_j1(0.0) == 0.0);
  CHECK(bessel_j1(1e-6) == Approx(5e-7).margin(1e-13));  // J1(u) ~ u/2
  CHECK(bessel_j1(2.0) == Approx(j1_series_oracle(2.0)).margin(1e-12));
  CHECK(bessel_j1(1.0) == Approx(j1_series_oracle(1.0)).margin(1e-13));
  CHECK_THROWS_AS(bessel_j1(-1.0), DomainError);
}

TEST_CASE("bessel_j1 large-argument asymptotics") {
  // leading Hankel term sqrt(2/(pi u)) cos(u - 3pi/4)
  for (double u : {30.0, 60.0, 120.0}) {
    const double lead =
        std::sqrt(2.0 / (M_PI * u)) * std::cos(u - 0.75 * M_PI);
    CHECK(bessel_j1(u) == Approx(lead).margin(2.0 / (u * std::sqrt(u))));
  }
}

TEST_CASE("series/asymptotic crossover continuity") {
  const double below = bessel_j1(std::nextafter(20.0, 0.0));
  const double above = bessel_j1(std::nextafter(20.0, 30.0));
  CHECK(std::abs(below - above) <= 1e-10);
  const double yb = bessel_y1(std::nextafter(20.0, 0.0));
  const double ya = bessel_y1(std::nextafter(20.0, 30.0));
  CHECK(std::abs(yb - ya) <= 1e-10);
}

TEST_CASE("bessel_y1 values and limits") {
  // high-precision reference for Y1(2): independent libm implementation
  CHECK(bessel_y1(2.0) == Approx(-0.10703243154093756).margin(1e-10));
  CHECK(bessel_y1(2.0) == Approx(std::cyl_neumann(1.0, 2.0)).margin(1e-10));
  CHECK(1e-6 * bessel_y1(1e-6) == Approx(-2.0 / M_PI).margin(1e-6));
  CHECK_THROWS_AS(bessel_y1(0.0), SingularityError);
}

TEST_CASE("bessel Wronskian identity") {
  for (double u : {0.5, 2.0, 10.0}) {
    const double j1 = bessel_j1(u);
    const double y1 = bessel_y1(u);
    const double dj1 = fd_derivative(&bessel_j1, u, 1e-5);
    const double dy1 = fd_derivative(&bessel_y1, u, 1e-5);
    CHECK(j1 * dy1 - dj1 * y1 == Approx(2.0 / (M_PI * u)).margin(1e-10));
  }
}

TEST_CASE("exp_decay_path") {
  Vec tc(2), x0(2);
  tc << 0.0, 1.0;
  x0 << 1.0, 2.0;
  CHECK((exp_decay_path(tc, x0, 0.0) - x0).norm() == 0.0);
  CHECK((exp_decay_path(tc, x0, 50.0) - tc).norm() <= 1e-20 * (x0 - tc).norm());
  const Vec x = exp_decay_path(tc, x0, 1.0);
  CHECK(x[0] == Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(x[1] == Approx(1.0 + std::exp(-1.0)).epsilon(1e-15));
  CHECK_THROWS_AS(exp_decay_path(tc, x0, -1.0), DomainError);
}

TEST_CASE("exp_decay_path satisfies the first-order ODE") {
  Vec tc(2), x0(2);
  tc << 0.3, 1.2;
  x0 << -1.0, 2.0;
  const double h = 1e-5;
  for (double t : {0.2, 1.0, 3.0}) {
    const Vec xdot =
        (exp_decay_path(tc, x0, t + h) - exp_decay_path(tc, x0, t - h)) / (2 * h);
    const Vec residual = xdot + (exp_decay_path(tc, x0, t) - tc);
    CHECK(residual.norm() <= 1e-6);
  }
}

TEST_CASE("bessel_path") {
  Vec tc(1), x0(1);
  tc << 0.0;
  x0 << 1.0;
  CHECK((bessel_path(tc, x0, 0.0) - x0).norm() == 0.0);
  CHECK(bessel_path(tc, x0, 2.0)[0] ==
        Approx(j1_series_oracle(2.0)).margin(1e-12));  // 2 J1(2)/2
}

TEST_CASE("bessel_path envelope decays like t^(-3/2)") {
  Vec tc(1), x0(1);
  tc << 0.0;
  x0 << 1.0;
  auto window_max = [&](double t) {
    double mx = 0.0;
    for (double s = t; s <= t + 2.0 * M_PI; s += 0.01)
      mx = std::max(mx, std::abs(bessel_path(tc, x0, s)[0]));
    return mx;
  };
  const double ratio = window_max(80.0) / window_max(20.0);
  CHECK(ratio == Approx(std::pow(20.0 / 80.0, 1.5)).epsilon(0.3));
}

TEST_CASE("bessel_path satisfies the singular second-order ODE") {
  Vec tc(2), x0(2);
  tc << 0.0, 1.0;
  x0 << 1.0, 2.0;
  const double h = 1e-4;
  for (double t = 0.5; t <= 10.0; t += 0.5) {
    const Vec xm = bessel_path(tc, x0, t - h);
    const Vec xc = bessel_path(tc, x0, t);
    const Vec xp = bessel_path(tc, x0, t + h);
    const Vec xddot = (xp - 2 * xc + xm) / (h * h);
    const Vec xdot = (xp - xm) / (2 * h);
    const Vec residual = xddot + (3.0 / t) * xdot + (xc - tc);
    CHECK(residual.norm() <= 1e-4);
  }
}

TEST_CASE("ou_variance") {
  Vec h(2), s(2);
  h << 2.0, 1.0;
  s << 1.0, 3.0;
  CHECK(ou_variance(h, s, 0.0).norm() == 0.0);
  // t -> infinity limit agrees with the diagonal Lyapunov solution
  const Mat inf = ou_variance(h, s, 60.0);
  const Mat gamma = lyapunov_stationary(Vec(h).asDiagonal().toDenseMatrix(),
                                        Vec(s.array().square()).asDiagonal().toDenseMatrix());
  CHECK((inf - gamma).norm() <= 1e-12);
  Vec h1(1), s1(1);
  h1 << 1.0;
  s1 << 1.0;
  CHECK(ou_variance(h1, s1, 1.0)(0, 0) ==
        Approx((1.0 - std::exp(-2.0)) / 2.0).epsilon(1e-14));
  Vec hbad(1);
  hbad << -1.0;
  CHECK_THROWS_AS(ou_variance(hbad, s1, 1.0), DomainError);
}

TEST_CASE("ou_variance solves the scalar Lyapunov flow") {
  Vec h(1), s(1);
  h << 0.7;
  s << 1.3;
  const double dt = 1e-4;
  for (double t : {0.3, 1.0, 2.5}) {
    const double gdot =
        (ou_variance(h, s, t + dt)(0, 0) - ou_variance(h, s, t - dt)(0, 0)) /
        (2 * dt);
    const double residual =
        gdot + 2.0 * h[0] * ou_variance(h, s, t)(0, 0) - s[0] * s[0];
    CHECK(std::abs(residual) <= 1e-8);
  }
}

TEST_CASE("tensor_flow_x1sq") {
  CHECK(tensor_flow_x1sq(1.0, 0.0) == 1.0);
  CHECK(tensor_flow_x1sq(1.0, 3.7) == 1.0);  // c = 0 fixed point
  // c = 0.8^{-2} - 1 = 0.5625, inverted at t = 0
  CHECK(tensor_flow_x1sq(0.9, 0.0) == Approx(0.9).epsilon(1e-12));
  const double c = 1.0 / (0.8 * 0.8) - 1.0;
  CHECK(c == Approx(0.5625).epsilon(1e-15));
  CHECK(tensor_flow_x1sq(0.9, 2.0) ==
        Approx(0.5 + 0.5 / std::sqrt(1.0 + c * std::exp(-8.0))).epsilon(1e-14));
  // monotone to 1
  double prev = 0.9;
  for (double t = 0.1; t <= 10.0; t += 0.1) {
    const double cur = tensor_flow_x1sq(0.9, t);
    CHECK(cur >= prev - 1e-15);
    prev = cur;
  }
  CHECK(tensor_flow_x1sq(0.9, 50.0) == Approx(1.0).margin(1e-12));
  CHECK_THROWS_AS(tensor_flow_x1sq(0.5, 1.0), DomainError);
  CHECK_THROWS_AS(tensor_flow_x1sq(0.2, 1.0), DomainError);
}

TEST_CASE("adaptive_simpson") {
  auto r = adaptive_simpson([](double x) { return x * x; }, 0.0, 1.0);
  CHECK(r.value == Approx(1.0 / 3.0).margin(1e-12));
  auto osc = adaptive_simpson([](double x) { return std::sin(10.0 * x); }, 0.0, 2.0);
  CHECK(osc.value == Approx((1.0 - std::cos(20.0)) / 10.0).margin(1e-9));
  CHECK(osc.est_error >= 0.0);
}

TEST_CASE("accel_limit_variance basics") {
  CHECK(accel_limit_variance(0.0, 2.0).value == 0.0);
  CHECK(accel_limit_variance(1.0, 1e-3).value <= 1e-8);
  CHECK(accel_limit_variance(1.0, 0.0).value == 0.0);
  // scales as sigma^2
  const double v1 = accel_limit_variance(1.0, 2.0).value;
  const double v2 = accel_limit_variance(2.0, 2.0).value;
  CHECK(v2 == Approx(4.0 * v1).epsilon(1e-10));
  CHECK_THROWS_AS(accel_limit_variance(-1.0, 2.0), DomainError);
}

TEST_CASE("accel_limit_variance bounded on [0, 50]") {
  double mx = 0.0, tail_min = 1e300, tail_max = 0.0;
  for (double t = 2.0; t <= 50.0; t += 2.0) {
    const double v = accel_limit_variance(1.0, t).value;
    CHECK(v > 0.0);
    mx = std::max(mx, v);
    if (t >= 20.0) {
      tail_min = std::min(tail_min, v);
      tail_max = std::max(tail_max, v);
    }
  }
  CHECK(mx < 10.0);
  CHECK(tail_max / tail_min < 3.0);
}

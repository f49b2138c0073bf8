#include <catch2/catch.hpp>

#include <cmath>

#include "sgdlab/data.hpp"
#include "sgdlab/descent.hpp"
#include "sgdlab/objective.hpp"
#include "sgdlab/oracles.hpp"
#include "sgdlab/solvers.hpp"
#include "sgdlab/stats.hpp"

using namespace sgdlab;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

const Vec kTheta = v2(0, 1);
const Vec kX0 = v2(1, 2);

}  // namespace

TEST_CASE("solve_gd_ode against the exponential solution") {
  const auto model = make_quadratic_mean(kTheta, 1.0);
  Path p = solve_gd_ode(exact_field(model), kX0, 1e-5, 1.0);
  CHECK((p.state_at(p.steps()) - exp_decay_path(kTheta, kX0, 1.0)).norm() <= 1e-4);
  // equilibrium start stays put
  Path q = solve_gd_ode(exact_field(model), kTheta, 1e-3, 1.0);
  CHECK((q.state_at(q.steps()) - kTheta).norm() == 0.0);
}

TEST_CASE("solve_gd_ode with the full-data field") {
  const auto model = make_quadratic_mean(kTheta, 1.0);
  const Dataset ds = generate_dataset(model, 2000, 10);
  const Vec ubar = ds.records.colwise().mean().transpose();
  VecField field = [&](const Vec& x, Vec& out) { out = empirical_grad(model, ds, x); };
  Path p = solve_gd_ode(field, kX0, 1e-4, 1.0);
  const Vec expect = ubar + (kX0 - ubar) * std::exp(-1.0);
  CHECK((p.state_at(p.steps()) - expect).norm() <= 1e-4);
}

TEST_CASE("solve_nesterov_ode against the Bessel solution") {
  const auto model = make_quadratic_mean(kTheta, 1.0);
  Path p = solve_nesterov_ode(exact_field(model), v2(1, 1), 1e-5, 2.0, 1e-5);
  const Vec expect = bessel_path(kTheta, v2(1, 1), 2.0);
  CHECK((p.state_at(p.steps()) - expect).norm() <= 1e-3);

  Path q = solve_nesterov_ode(exact_field(model), kTheta, 1e-3, 1.0, 1e-3);
  CHECK((q.state_at(q.steps()) - kTheta).norm() == 0.0);
  CHECK(q.velocities.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("solve_nesterov_ode small-time expansion") {
  const auto model = make_quadratic_mean(kTheta, 1.0);
  Path p = solve_nesterov_ode(exact_field(model), kX0, 1e-5, 0.01, 1e-5);
  const Vec expect = -model.grad(kX0) * 0.01 * 0.01 / 8.0;
  const Vec got = p.state_at(p.steps()) - kX0;
  CHECK((got - expect).norm() <= 0.05 * expect.norm());
}

TEST_CASE("eta_sing insensitivity") {
  const auto model = make_quadratic_mean(kTheta, 1.0);
  const double h = 1e-4;
  Path a = solve_nesterov_ode(exact_field(model), kX0, h, 2.0, h);
  Path b = solve_nesterov_ode(exact_field(model), kX0, h, 2.0, h / 2.0);
  CHECK((a.state_at(a.steps()) - b.state_at(b.steps())).norm() <=
        1e-6 * (1.0 + a.state_at(a.steps()).norm()));
}

TEST_CASE("Euler halving order for the deterministic solvers") {
  const auto model = make_quadratic_mean(kTheta, 1.0);
  auto gd_err = [&](double h) {
    Path p = solve_gd_ode(exact_field(model), kX0, h, 2.0);
    double e = 0.0;
    for (std::int64_t j = 0; j <= p.steps(); ++j)
      e = std::max(e, (p.state_at(j) - exp_decay_path(kTheta, kX0, p.times[j])).norm());
    return e;
  };
  const double r1 = gd_err(5e-4) / gd_err(1e-3);
  CHECK(r1 >= 0.4);
  CHECK(r1 <= 0.6);
  auto nag_err = [&](double h) {
    Path p = solve_nesterov_ode(exact_field(model), kX0, h, 2.0, h);
    double e = 0.0;
    for (std::int64_t j = 0; j <= p.steps(); ++j)
      e = std::max(e, (p.state_at(j) - bessel_path(kTheta, kX0, p.times[j])).norm());
    return e;
  };
  const double r2 = nag_err(5e-4) / nag_err(1e-3);
  CHECK(r2 >= 0.4);
  CHECK(r2 <= 0.6);
}

TEST_CASE("zero-noise SDE solvers bit-match their ODE counterparts") {
  const auto model = make_quadratic_mean(kTheta, 1.0);
  NoiseSpec zero{0.0, SigmaMode::state_dependent, 7};
  Path sde = solve_gd_sde(model, kX0, 0.01, 10, 1e-3, 1.0, zero);
  Path ode = solve_gd_ode(exact_field(model), kX0, 1e-3, 1.0);
  CHECK((sde.states - ode.states).cwiseAbs().maxCoeff() == 0.0);

  Path nsde = solve_nesterov_sde(model, kX0, 0.01, 10, 1e-3, 1.0, 1e-3, zero);
  Path node = solve_nesterov_ode(exact_field(model), kX0, 1e-3, 1.0, 1e-3);
  CHECK((nsde.states - node.states).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gd SDE fluctuations follow the OU law") {
  const auto model = make_quadratic_mean(kTheta, 1.0);
  const double delta = 0.01, m = 10, h = 1e-3, T = 1.0;
  const Path ref = solve_gd_ode(exact_field(model), kX0, h, T);
  const int R = 10000;
  RngStream seeds(100);
  Vec mean = Vec::Zero(2), second = Vec::Zero(2);
  for (int r = 0; r < R; ++r) {
    NoiseSpec noise{std::nullopt, SigmaMode::frozen_on_reference, seeds.next_u64()};
    Path p = solve_gd_sde(model, kX0, delta, m, h, T, noise, &ref);
    const Vec dev = p.state_at(p.steps()) - ref.state_at(ref.steps());
    mean += dev;
    second += dev.cwiseProduct(dev);
  }
  mean /= double(R);
  const Vec var = second / double(R) - mean.cwiseProduct(mean);
  const double factor = (delta / m) * (1.0 - std::exp(-2.0 * T)) / 2.0;
  CHECK(var[0] == Approx(factor * 1.0).epsilon(0.05));
  CHECK(var[1] == Approx(factor * 1.0).epsilon(0.05));  // theta2 = 1
  for (int c = 0; c < 2; ++c)
    CHECK(std::abs(mean[c]) <= 4.0 * std::sqrt(var[c] / R));
}

TEST_CASE("frozen and state-dependent sigma coincide for constant sigma") {
  const auto model = make_quadratic_mean(kTheta, 1.0);
  const double h = 1e-3, T = 1.0;
  const Path ref = solve_gd_ode(exact_field(model), kX0, h, T);
  NoiseSpec frozen{std::nullopt, SigmaMode::frozen_on_reference, 42};
  NoiseSpec state{std::nullopt, SigmaMode::state_dependent, 42};
  Path a = solve_gd_sde(model, kX0, 0.01, 10, h, T, frozen, &ref);
  Path b = solve_gd_sde(model, kX0, 0.01, 10, h, T, state);
  CHECK((a.states - b.states).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("frozen mode requires a reference path") {
  const auto model = make_quadratic_mean(kTheta, 1.0);
  NoiseSpec frozen{std::nullopt, SigmaMode::frozen_on_reference, 42};
  CHECK_THROWS_AS(solve_gd_sde(model, kX0, 0.01, 10, 1e-3, 1.0, frozen), ConfigError);
}

TEST_CASE("nesterov SDE ensemble mean follows the Bessel path") {
  const auto model = make_quadratic_mean(kTheta, 1.0);
  const Vec x0 = v2(1, kTheta[1]);  // x0 - theta = (1, 0)
  const double delta = 1e-3, m = 100, h = 1e-3, T = 2.0;
  const int R = 10000;
  RngStream seeds(200);
  Vec mean1 = Vec::Zero(2), mean2 = Vec::Zero(2), second = Vec::Zero(2);
  const Path det = solve_nesterov_ode(exact_field(model), x0, h, T, h);
  const auto j1 = det.index_of(1.0);
  for (int r = 0; r < R; ++r) {
    NoiseSpec noise{std::nullopt, SigmaMode::state_dependent, seeds.next_u64()};
    Path p = solve_nesterov_sde(model, x0, delta, m, h, T, h, noise);
    mean1 += p.state_at(j1);
    mean2 += p.state_at(p.steps());
    const Vec dev = p.state_at(p.steps()) - det.state_at(det.steps());
    second += dev.cwiseProduct(dev);
  }
  mean1 /= double(R);
  mean2 /= double(R);
  const double scale2 = std::sqrt(delta / (m * m));  // (delta/m^2)^{1/2}
  const double target_var = scale2 * accel_limit_variance(1.0, T).value;
  const double band = 4.0 * std::sqrt(target_var / R);
  CHECK(std::abs(mean1[0] - bessel_path(kTheta, x0, 1.0)[0]) <= band + 2e-3);
  CHECK(std::abs(mean2[0] - bessel_path(kTheta, x0, 2.0)[0]) <= band + 2e-3);

  // variance against the Green's-representation quadrature oracle
  const Vec var = second / double(R) - (mean2 - det.state_at(det.steps()))
                                           .cwiseProduct(mean2 - det.state_at(det.steps()));
  CHECK(var[0] == Approx(target_var).epsilon(0.10));
}

TEST_CASE("pi ODE matches the closed-form fluctuation factors") {
  const double tau = 0.8;
  const auto model = make_quadratic_mean(kTheta, tau);
  const double h = 1e-5;
  {
    const Path ref = solve_gd_ode(exact_field(model), kX0, h, 1.0);
    MatrixPath pi = solve_pi_ode(model, ref, h, 1.0, SdeOrder::first, h);
    Mat expect = Mat::Zero(2, 2);
    expect(0, 0) = -(1.0 - std::exp(-1.0)) * tau;
    expect(1, 1) = -(1.0 - std::exp(-1.0)) * kTheta[1];
    CHECK((pi.matrices.back() - expect).norm() <= 1e-4);
  }
  {
    const Path ref = solve_nesterov_ode(exact_field(model), kX0, h, 2.0, h);
    MatrixPath pi = solve_pi_ode(model, ref, h, 2.0, SdeOrder::second, h);
    Mat expect = Mat::Zero(2, 2);
    const double factor = -(1.0 - bessel_j1(2.0));  // 1 - 2 J1(2)/2
    expect(0, 0) = factor * tau;
    expect(1, 1) = factor * kTheta[1];
    CHECK((pi.matrices.back() - expect).norm() <= 1e-3);
  }
}

TEST_CASE("pi ODE vanishes for zero noise") {
  ObjectiveModel quiet;
  quiet.dim = 2;
  quiet.datum_dim = 2;
  quiet.grad = [](const Vec& x) -> Vec { return x; };
  quiet.value = [](const Vec& x) { return 0.5 * x.squaredNorm(); };
  quiet.hessian = [](const Vec&) -> Mat { return Mat::Identity(2, 2); };
  quiet.noise_cov = [](const Vec&) -> Mat { return Mat::Zero(2, 2); };
  const Path ref = solve_gd_ode(exact_field(quiet), kX0, 1e-3, 1.0);
  MatrixPath pi = solve_pi_ode(quiet, ref, 1e-3, 1.0, SdeOrder::first, 1e-3);
  for (const auto& m : pi.matrices) CHECK(m.norm() == 0.0);
  RngStream rng(1);
  Path v = solve_limit_sde(quiet, ref, 1e-3, 1.0, SdeOrder::first, 1e-3, rng);
  CHECK(v.states.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("limit SDE variance matches the constant-coefficient OU oracle") {
  const auto model = make_quadratic_mean(kTheta, 1.0);
  const double h = 1e-3, T = 1.0;
  const Path ref = solve_gd_ode(exact_field(model), kX0, h, T);
  const int R = 10000;
  RngStream rng(300);
  Vec second = Vec::Zero(2), mean = Vec::Zero(2);
  for (int r = 0; r < R; ++r) {
    RngStream sub = rng.substream(r);
    Path v = solve_limit_sde(model, ref, h, T, SdeOrder::first, h, sub);
    const Vec vt = v.state_at(v.steps());
    mean += vt;
    second += vt.cwiseProduct(vt);
  }
  mean /= double(R);
  const Vec var = second / double(R) - mean.cwiseProduct(mean);
  Vec hdiag(2), sdiag(2);
  hdiag << 1.0, 1.0;
  sdiag << 1.0, kTheta[1];
  const Mat target = ou_variance(hdiag, sdiag, T);
  CHECK(var[0] == Approx(target(0, 0)).epsilon(0.05));
  CHECK(var[1] == Approx(target(1, 1)).epsilon(0.05));
}

TEST_CASE("limit SDE agrees with the pathwise quadrature representation") {
  // V(t) = -int_0^t exp(-(t-u)) sigma dB(u) for the quadratic model; rebuild
  // the same increments from the stream and compare.
  const auto model = make_quadratic_mean(kTheta, 1.0);
  const double h = 1e-3, T = 1.0;
  const Path ref = solve_gd_ode(exact_field(model), kX0, h, T);
  RngStream a(555), b(555);
  Path v = solve_limit_sde(model, ref, h, T, SdeOrder::first, h, a);
  const auto n = v.steps();
  Vec oracle = Vec::Zero(2);
  const double sqrt_h = std::sqrt(h);
  for (std::int64_t j = 0; j < n; ++j) {
    Vec db(2);
    db << sqrt_h * b.normal(), sqrt_h * b.normal();
    const double weight = std::exp(-(T - j * h));
    oracle -= weight * Vec(Vec(model.noise_cov(ref.state_at(j)).diagonal().cwiseSqrt())
                               .cwiseProduct(db));
  }
  CHECK((v.state_at(n) - oracle).norm() <= std::sqrt(h));
}

TEST_CASE("limit SDE Gaussianity at fixed time") {
  const auto model = make_quadratic_mean(kTheta, 1.0);
  const double h = 1e-3, T = 1.0;
  const Path ref = solve_gd_ode(exact_field(model), kX0, h, T);
  const int R = 10000;
  RngStream rng(400);
  std::vector<double> c1(R), c2(R);
  for (int r = 0; r < R; ++r) {
    RngStream sub = rng.substream(r);
    Path v = solve_limit_sde(model, ref, h, T, SdeOrder::first, h, sub);
    c1[r] = v.states(v.steps(), 0);
    c2[r] = v.states(v.steps(), 1);
  }
  const double sd = std::sqrt((1.0 - std::exp(-2.0)) / 2.0);
  CHECK(ks_test_normal(c1, 0.0, sd, 0.01).passed);
  CHECK(ks_test_normal(c2, 0.0, sd, 0.01).passed);
}

TEST_CASE("lyapunov_stationary") {
  CHECK((lyapunov_stationary(Mat::Identity(3, 3), 2.0 * Mat::Identity(3, 3)) -
         Mat::Identity(3, 3))
            .norm() <= 1e-12);
  Mat h = Mat::Zero(2, 2), s = Mat::Zero(2, 2);
  h << 2, 0, 0, 1;
  s << 4, 0, 0, 2;
  CHECK((lyapunov_stationary(h, s) - Mat::Identity(2, 2)).norm() <= 1e-12);

  // random PD H / PSD S, checked against the eigendecomposition oracle
  RngStream rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    Mat a(4, 4), b(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        a(i, j) = rng.normal();
        b(i, j) = rng.normal();
      }
    const Mat H = a * a.transpose() + 0.5 * Mat::Identity(4, 4);
    const Mat S = b * b.transpose();
    const Mat G = lyapunov_stationary(H, S);
    CHECK((G * H + H * G - S).norm() <= 1e-10 * S.norm());
    CHECK((G - G.transpose()).norm() <= 1e-12 * G.norm());
    Eigen::SelfAdjointEigenSolver<Mat> es(G);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10 * G.norm());
    // independent route: Gamma = Q [ (Q'SQ)_{ij} / (lambda_i + lambda_j) ] Q'
    Eigen::SelfAdjointEigenSolver<Mat> eh(H);
    const Mat q = eh.eigenvectors();
    const Vec lam = eh.eigenvalues();
    Mat core = q.transpose() * S * q;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) core(i, j) /= lam[i] + lam[j];
    const Mat oracle = q * core * q.transpose();
    CHECK((G - oracle).norm() <= 1e-10 * (1.0 + oracle.norm()));
  }

  Mat notpd = -Mat::Identity(2, 2);
  CHECK_THROWS_AS(lyapunov_stationary(notpd, s), DomainError);
}

TEST_CASE("partial sum process") {
  const auto model = make_quadratic_mean(kTheta, 1.0);
  const double delta = 0.01, T = 1.0;
  const auto K = static_cast<std::int64_t>(std::llround(T / delta));
  const double m = 50;
  const Path ref = solve_gd_ode(exact_field(model), kTheta, delta, T);

  // deterministic data (grad l = grad g exactly) gives H identically zero
  {
    ObjectiveModel noiseless = model;
    noiseless.datum_grad = [&](const Vec& th, const DatumRef&, Vec& out) {
      out = th - kTheta;
    };
    noiseless.datum_sampler = [](RngStream&, Eigen::Ref<Vec> out) { out.setZero(); };
    RngStream rng(1);
    Trajectory traj = run_plain_gd(
        GradientSource::minibatch(noiseless, 50, BatchMode::population), kTheta,
        delta, K, StepSchedule::constant(), rng);
    Path hp = partial_sum_process(noiseless, traj, ref, m, delta, SdeOrder::first);
    CHECK(hp.states.cwiseAbs().maxCoeff() <= 1e-12);
  }

  // Ito isometry: Var H(T) over replicates is T diag(tau^2, theta2^2)
  {
    const int R = 1000;
    RngStream rng(2);
    Vec mean = Vec::Zero(2), second = Vec::Zero(2);
    Vec half_a = Vec::Zero(2), half_b = Vec::Zero(2);
    double cross1 = 0.0;
    for (int r = 0; r < R; ++r) {
      RngStream sub = rng.substream(r);
      Trajectory traj = run_plain_gd(
          GradientSource::minibatch(model, 50, BatchMode::population), kTheta,
          delta, K, StepSchedule::constant(), sub);
      Path hp = partial_sum_process(model, traj, ref, m, delta, SdeOrder::first);
      const Vec ht = hp.state_at(K);
      const Vec hhalf = hp.state_at(K / 2);
      mean += ht;
      second += ht.cwiseProduct(ht);
      half_a += hhalf;
      half_b += ht - hhalf;
      cross1 += hhalf[0] * (ht - hhalf)[0];
    }
    mean /= double(R);
    const Vec var = second / double(R) - mean.cwiseProduct(mean);
    CHECK(var[0] == Approx(T * 1.0).epsilon(0.10));
    CHECK(var[1] == Approx(T * kTheta[1] * kTheta[1]).epsilon(0.10));
    // disjoint-window increments are uncorrelated
    const double corr =
        (cross1 / R - (half_a[0] / R) * (half_b[0] / R)) /
        std::sqrt((T / 2.0) * (T / 2.0));
    CHECK(std::abs(corr) <= 0.05);
  }
}

TEST_CASE("brownian increment coarsening sums pairs") {
  RowMat fine = brownian_increments(77, 8, 2, 0.5);
  RowMat coarse = coarsen_increments(fine, 2);
  CHECK(coarse.rows() == 4);
  CHECK((coarse.row(0) - (fine.row(0) + fine.row(1))).norm() == 0.0);
}

TEST_CASE("coupling is exact for constant sigma") {
  // quadratic_mean has state-free sigma, so Eq.(25) and Eq.(26) coincide and
  // sup|X - Xcheck| / sup|X - X(t)| is exactly zero.
  const auto model = make_quadratic_mean(kTheta, 1.0);
  const double h = 1e-3, T = 1.0;
  const Path ref = solve_gd_ode(exact_field(model), kX0, h, T);
  NoiseSpec frozen{std::nullopt, SigmaMode::frozen_on_reference, 91};
  NoiseSpec state{std::nullopt, SigmaMode::state_dependent, 91};
  Path a = solve_gd_sde(model, kX0, 0.01, 10, h, T, frozen, &ref);
  Path b = solve_gd_sde(model, kX0, 0.01, 10, h, T, state);
  double sup_pair = 0.0, sup_dev = 0.0;
  for (std::int64_t j = 0; j <= a.steps(); ++j) {
    sup_pair = std::max(sup_pair, (a.state_at(j) - b.state_at(j)).norm());
    sup_dev = std::max(sup_dev, (a.state_at(j) - ref.state_at(j)).norm());
  }
  CHECK(sup_pair == 0.0);
  CHECK(sup_dev > 0.0);
}

TEST_CASE("diminishing-rate solver flag rescales drift by (t+1)^-alpha") {
  // zero noise: dX = -(t+1)^{-alpha} (X - theta) dt has the closed form
  // X(t) = theta + (x0 - theta) exp(-((t+1)^{1-alpha} - 1)/(1 - alpha))
  const auto model = make_quadratic_mean(kTheta, 1.0);
  const double alpha = 0.5, h = 1e-4, T = 1.0;
  NoiseSpec zero{0.0, SigmaMode::state_dependent, 3};
  Path p = solve_gd_sde(model, kX0, 0.01, 10, h, T, zero, nullptr, nullptr, alpha);
  const double exponent = (std::pow(T + 1.0, 1.0 - alpha) - 1.0) / (1.0 - alpha);
  const Vec expect = kTheta + (kX0 - kTheta) * std::exp(-exponent);
  CHECK((p.state_at(p.steps()) - expect).norm() <= 1e-3);
}

TEST_CASE("divergence error carries the step index") {
  ObjectiveModel unstable;
  unstable.dim = 1;
  unstable.datum_dim = 1;
  unstable.grad = [](const Vec& x) -> Vec { return -x; };
  unstable.value = [](const Vec& x) { return -0.5 * x.squaredNorm(); };
  Vec one = Vec::Ones(1);
  try {
    solve_gd_ode(exact_field(unstable), one, 1.0, 100.0);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.step > 0);
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

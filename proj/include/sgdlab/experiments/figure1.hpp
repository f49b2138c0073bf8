#pragma once

#include <vector>

#include "sgdlab/data.hpp"
#include "sgdlab/descent.hpp"
#include "sgdlab/objective.hpp"
#include "sgdlab/solvers.hpp"

namespace sgdlab::experiments {

namespace detail2 {

// Least-squares estimator from a regression dataset (payload = (U1, U2)).
inline Vec least_squares(const Dataset& ds, int p) {
  Mat a = Mat::Zero(p, p);
  Vec b = Vec::Zero(p);
  for (std::int64_t i = 0; i < ds.n(); ++i) {
    const auto row = ds.records.row(i);
    const Vec u2 = row.tail(p).transpose();
    a += u2 * u2.transpose();
    b += u2 * row[0];
  }
  return a.ldlt().solve(b);
}

// grad L^n for the regression loss is the affine map (U2'U2/n) theta - U2'U1/n.
inline VecField regression_full_data_field(const Dataset& ds, int p) {
  Mat a = Mat::Zero(p, p);
  Vec b = Vec::Zero(p);
  for (std::int64_t i = 0; i < ds.n(); ++i) {
    const auto row = ds.records.row(i);
    const Vec u2 = row.tail(p).transpose();
    a += u2 * u2.transpose();
    b += u2 * row[0];
  }
  a /= static_cast<double>(ds.n());
  b /= static_cast<double>(ds.n());
  return [a, b](const Vec& x, Vec& out) { out = a * x - b; };
}

}  // namespace detail2

// --------------------------------------------------------------------------
// Figure 1 regeneration on the random-design regression example: estimator
// scatter and sandwich covariance, and the accelerated/plain sample paths
// against their differential equations, with endpoint convergence checks.

inline ExperimentReport run_figure1(const ExperimentSpec& spec) {
  ExperimentReport report;
  report.spec = spec;
  const std::uint64_t seed = detail::experiment_seed(spec);
  const auto n = spec.at_int("n");
  const auto m = spec.at_int("m");
  const double delta = spec.at("delta");
  const double tau = spec.at("tau");
  const auto R_scatter = spec.at_int("r_scatter");
  const auto R_cov = spec.at_int("r_cov");
  Mat alpha = Mat::Zero(2, 2);
  alpha(0, 0) = spec.at("alpha11");
  alpha(1, 1) = spec.at("alpha22");
  Vec tc = Vec::Zero(2);
  Vec x0(2);
  x0 << spec.at("x01"), spec.at("x02");
  const auto model = make_linreg_random(alpha, tau, tc);
  const double sqrt_n = std::sqrt(static_cast<double>(n));

  // Estimator replicates: sqrt(n)(thetahat - check) covariance vs the
  // sandwich formula H^{-1} sigma^2 H^{-1} = tau^2 alpha^{-1}.
  auto sim = [&](std::int64_t, RngStream& rng) -> Vec {
    Dataset ds = generate_dataset(model, n, rng.next_u64());
    return detail2::least_squares(ds, 2);
  };
  Ensemble ens = run_ensemble(sim, R_cov, seed, spec.threads);

  {
    Mat scaled = sqrt_n * ens.replicates;
    const Vec mean = scaled.colwise().mean().transpose();
    Mat centered = scaled;
    centered.rowwise() -= mean.transpose();
    const Mat cov = centered.transpose() * centered / static_cast<double>(R_cov - 1);
    Mat target = tau * tau * alpha.inverse();
    report.results.push_back(detail::rel_frobenius_test(
        "sqrt(n)(thetahat) covariance vs tau^2 alpha^{-1}", cov, target, 0.15,
        R_cov));
  }
  {
    // scatter mean within 4 standard errors of the true parameter (0,0)
    Mat scatter = ens.replicates.topRows(R_scatter);
    const Vec mean = scatter.colwise().mean().transpose();
    Mat centered = scatter;
    centered.rowwise() -= mean.transpose();
    const Vec sd = (centered.colwise().squaredNorm() /
                    static_cast<double>(R_scatter - 1)).cwiseSqrt().transpose();
    double worst = 0.0;
    for (int c = 0; c < 2; ++c)
      worst = std::max(worst, std::abs(mean[c]) * std::sqrt(double(R_scatter)) /
                                  (4.0 * sd[c]));
    report.results.push_back(make_test_result(
        "thetahat scatter mean within 4 SE of (0,0)", worst, 1.0, R_scatter));
    CsvBuilder csv({"theta1", "theta2"});
    for (Eigen::Index r = 0; r < scatter.rows(); ++r)
      csv.row({scatter(r, 0), scatter(r, 1)});
    report.artifacts.push_back({"scatter.csv", csv.str()});
  }

  // Sample-path panels on a single reference dataset.
  RngStream rng(hash64(seed, 1));
  Dataset ds0 = generate_dataset(model, n, rng.next_u64());
  const Vec theta_hat = detail2::least_squares(ds0, 2);

  const auto K_accel = spec.at_int("k_accel");
  const double sqrt_delta = std::sqrt(delta);
  const double T_ode = K_accel * sqrt_delta;
  const double h_ode = spec.at("h_ode");

  Trajectory accel_alg = run_nesterov(GradientSource::full_data(model, ds0), x0,
                                      delta, K_accel, rng);
  Path ode12 = solve_nesterov_ode(detail2::regression_full_data_field(ds0, 2), x0,
                                  h_ode, T_ode, h_ode);
  Path ode6 = solve_nesterov_ode(exact_field(model), x0, h_ode, T_ode, h_ode);

  report.results.push_back(make_test_result(
      "accelerated full-data endpoint vs least-squares estimator",
      (accel_alg.at(K_accel) - theta_hat).norm(), 1e-3, 1));
  report.results.push_back(make_test_result(
      "accelerated full-data ODE endpoint vs least-squares estimator",
      (ode12.state_at(ode12.steps()) - theta_hat).norm(), 1e-3, 1));
  report.results.push_back(make_test_result(
      "deterministic accelerated ODE endpoint vs true parameter",
      (ode6.state_at(ode6.steps()) - tc).norm(), 1e-3, 1));

  {
    const auto K_plain = spec.at_int("k_plain");
    Trajectory plain_det = run_plain_gd(GradientSource::exact(model), x0, delta,
                                        K_plain, StepSchedule::constant(), rng);
    report.results.push_back(make_test_result(
        "plain deterministic GD endpoint vs true parameter",
        (plain_det.at(K_plain) - tc).norm(), 1e-3, 1));
    CsvBuilder csv({"k", "t", "x1", "x2"});
    const std::int64_t stride = std::max<std::int64_t>(1, K_plain / 500);
    for (std::int64_t k = 0; k <= K_plain; k += stride)
      csv.row({static_cast<double>(k), k * delta, plain_det.iterates(k, 0),
               plain_det.iterates(k, 1)});
    report.artifacts.push_back({"plain_det_path.csv", csv.str()});
  }

  // SGD sample paths (bootstrap mini-batches from the reference dataset).
  {
    const auto n_paths = spec.at_int("sgd_paths");
    const auto K_sgd = spec.at_int("k_sgd");
    CsvBuilder csv({"path", "k", "t", "x1", "x2"});
    for (std::int64_t pth = 0; pth < n_paths; ++pth) {
      RngStream prng = rng.substream(100 + pth);
      Trajectory traj = run_plain_gd(
          GradientSource::minibatch(model, m, BatchMode::bootstrap, &ds0), x0,
          delta, K_sgd, StepSchedule::constant(), prng);
      const std::int64_t stride = std::max<std::int64_t>(1, K_sgd / 400);
      for (std::int64_t k = 0; k <= K_sgd; k += stride)
        csv.row({static_cast<double>(pth), static_cast<double>(k), k * delta,
                 traj.iterates(k, 0), traj.iterates(k, 1)});
    }
    report.artifacts.push_back({"sgd_paths.csv", csv.str()});
  }

  {
    CsvBuilder csv({"k", "t", "x1", "x2", "y1", "y2"});
    const std::int64_t stride = std::max<std::int64_t>(1, K_accel / 500);
    for (std::int64_t k = 0; k <= K_accel; k += stride)
      csv.row({static_cast<double>(k), k * sqrt_delta, accel_alg.iterates(k, 0),
               accel_alg.iterates(k, 1), accel_alg.aux(k, 0), accel_alg.aux(k, 1)});
    report.artifacts.push_back({"accel_alg_path.csv", csv.str()});
    report.artifacts.push_back(
        {"accel_ode12_path.csv", path_csv(ode12, std::max<std::int64_t>(1, ode12.steps() / 500))});
    report.artifacts.push_back(
        {"accel_ode6_path.csv", path_csv(ode6, std::max<std::int64_t>(1, ode6.steps() / 500))});
  }
  return report;
}

inline ExperimentInfo info_figure1() {
  ExperimentInfo info;
  info.name = "exp_figure1";
  info.description =
      "regression-example estimator scatter, sandwich covariance, and "
      "algorithm-vs-ODE sample paths";
  info.anchor = "Figure 1 (Section 5, Example 3); Theorem 3.3(3)";
  info.schema = {
      {"delta", {0.05, 1e-6, 0.5}},   {"n", {1000, 10, 1e7}},
      {"m", {200, 1, 1e6}},           {"tau", {0.1, 1e-6, 100.0}},
      {"alpha11", {0.02, 1e-8, 100.0}},
      {"alpha22", {0.005, 1e-8, 100.0}},
      {"x01", {0.1, -100.0, 100.0}},  {"x02", {0.1, -100.0, 100.0}},
      {"r_scatter", {500, 10, 1e6}},  {"r_cov", {2000, 10, 1e6}},
      {"k_accel", {8000, 100, 1e7}},  {"k_plain", {24000, 100, 1e8}},
      {"k_sgd", {2000, 10, 1e7}},     {"sgd_paths", {5, 1, 100}},
      {"h_ode", {0.01, 1e-5, 0.5}},
  };
  info.run = &run_figure1;
  return info;
}

}  // namespace sgdlab::experiments

#pragma once

#include <algorithm>
#include <vector>

#include "sgdlab/data.hpp"
#include "sgdlab/descent.hpp"
#include "sgdlab/objective.hpp"
#include "sgdlab/oracles.hpp"
#include "sgdlab/solvers.hpp"

namespace sgdlab::experiments {

// --------------------------------------------------------------------------
// Deterministic oracle-vs-solver check: Euler solutions of the plain and
// accelerated limit equations against the exponential / Bessel closed forms,
// including the halving-order ratio.

inline ExperimentReport run_oracle_vs_solver(const ExperimentSpec& spec) {
  ExperimentReport report;
  report.spec = spec;
  const double h = spec.at("h");
  const double T = spec.at("t_max");
  const double tau = spec.at("tau");
  Vec tc(2), x0(2);
  tc << 0.0, spec.at("theta2");
  x0 << spec.at("x01"), spec.at("x02");
  const auto model = make_quadratic_mean(tc, tau);

  auto max_err_plain = [&](double step) {
    Path p = solve_gd_ode(exact_field(model), x0, step, T);
    double err = 0.0;
    for (std::int64_t j = 0; j <= p.steps(); ++j)
      err = std::max(err, (p.state_at(j) - exp_decay_path(tc, x0, p.times[j])).norm());
    return err;
  };
  auto max_err_accel = [&](double step) {
    Path p = solve_nesterov_ode(exact_field(model), x0, step, T, step);
    double err = 0.0;
    for (std::int64_t j = 0; j <= p.steps(); ++j)
      err = std::max(err, (p.state_at(j) - bessel_path(tc, x0, p.times[j])).norm());
    return err;
  };

  const double ep1 = max_err_plain(h), ep2 = max_err_plain(h / 2.0);
  const double ea1 = max_err_accel(h), ea2 = max_err_accel(h / 2.0);

  report.results.push_back(
      make_test_result("plain Euler max error vs exponential closed form", ep1, 1e-3, 1));
  report.results.push_back(detail::band_test(
      "plain Euler halving ratio in [0.4, 0.6]", ep2 / ep1, 0.5, 0.1, 1));
  report.results.push_back(
      make_test_result("accelerated Euler max error vs Bessel closed form", ea1, 1e-3, 1));
  report.results.push_back(detail::band_test(
      "accelerated Euler halving ratio in [0.4, 0.6]", ea2 / ea1, 0.5, 0.1, 1));

  CsvBuilder csv({"h", "plain_max_err", "accel_max_err"});
  csv.row({h, ep1, ea1});
  csv.row({h / 2.0, ep2, ea2});
  report.artifacts.push_back({"euler_errors.csv", csv.str()});
  return report;
}

inline ExperimentInfo info_oracle_vs_solver() {
  ExperimentInfo info;
  info.name = "exp_oracle_vs_solver";
  info.description =
      "Euler solutions of the plain/accelerated limit ODEs vs exponential and "
      "Bessel closed forms, with halving-order check";
  info.anchor = "Example 1 (Section 3.5), Eq. (3) and Eq. (6)";
  info.schema = {
      {"h", {1e-5, 1e-8, 1e-2}},       {"t_max", {5.0, 0.1, 50.0}},
      {"tau", {1.0, 1e-6, 100.0}},     {"theta2", {1.0, 1e-6, 100.0}},
      {"x01", {1.0, -100.0, 100.0}},   {"x02", {2.0, -100.0, 100.0}},
  };
  info.run = &run_oracle_vs_solver;
  return info;
}

// --------------------------------------------------------------------------
// Discrete-to-continuum rates: sup-error of the discrete iterations against
// the closed-form limit curves as delta shrinks (slope 1 plain, 0.5
// accelerated), plus the n-scaling of full-data vs exact trajectories.

inline ExperimentReport run_discrete_vs_continuum(const ExperimentSpec& spec) {
  ExperimentReport report;
  report.spec = spec;
  const std::uint64_t seed = detail::experiment_seed(spec);
  const double T = spec.at("t_max");
  Vec tc(2), x0(2);
  tc << 0.0, 1.0;
  x0 << spec.at("x01"), spec.at("x02");
  const auto model = make_quadratic_mean(tc, spec.at("tau"));
  const std::vector<double> deltas = {spec.at("delta1"), spec.at("delta2"),
                                      spec.at("delta3")};

  RngStream rng(seed);
  std::vector<double> plain_errs, accel_errs;
  for (double d : deltas) {
    const auto K = static_cast<std::int64_t>(std::llround(T / d));
    Trajectory traj = run_plain_gd(GradientSource::exact(model), x0, d, K,
                                   StepSchedule::constant(), rng);
    double err = 0.0;
    for (std::int64_t k = 0; k <= K; ++k)
      err = std::max(err, (traj.at(k) - exp_decay_path(tc, x0, k * d)).norm());
    plain_errs.push_back(err);

    const double sd = std::sqrt(d);
    const auto Ka = static_cast<std::int64_t>(std::llround(T / sd));
    Trajectory atraj = run_nesterov(GradientSource::exact(model), x0, d, Ka, rng);
    double aerr = 0.0;
    for (std::int64_t k = 0; k <= Ka; ++k)
      aerr = std::max(aerr, (atraj.at(k) - bessel_path(tc, x0, k * sd)).norm());
    accel_errs.push_back(aerr);
  }
  const double plain_slope = rate_slope(deltas, plain_errs);
  const double accel_slope = rate_slope(deltas, accel_errs);
  report.results.push_back(detail::band_test(
      "plain sup-error slope vs delta (Euler order)", plain_slope, 1.0, 0.15, 3));
  report.results.push_back(detail::band_test(
      "accelerated sup-error slope vs delta", accel_slope, 0.5, 0.15, 3));

  // sup |x^n_delta - x_delta| shrinks like n^{-1/2} at fixed delta.
  const double dn = spec.at("delta_n");
  const auto Kn = static_cast<std::int64_t>(std::llround(T / dn));
  const auto Rn = spec.at_int("r_n");
  const std::vector<double> ns = {spec.at("n1"), spec.at("n2"), spec.at("n3")};
  Trajectory exact_traj = run_plain_gd(GradientSource::exact(model), x0, dn, Kn,
                                       StepSchedule::constant(), rng);
  std::vector<double> n_medians;
  for (double nd : ns) {
    const auto n = static_cast<std::int64_t>(std::llround(nd));
    std::vector<double> sups(Rn);
    for (std::int64_t r = 0; r < Rn; ++r) {
      Dataset ds = generate_dataset(model, n, rng.next_u64());
      Trajectory full = run_plain_gd(GradientSource::full_data(model, ds), x0, dn,
                                     Kn, StepSchedule::constant(), rng);
      double sup = 0.0;
      for (std::int64_t k = 0; k <= Kn; ++k)
        sup = std::max(sup, (full.at(k) - exact_traj.at(k)).norm());
      sups[r] = sup;
    }
    std::nth_element(sups.begin(), sups.begin() + Rn / 2, sups.end());
    n_medians.push_back(sups[Rn / 2]);
  }
  const double n_slope = rate_slope(ns, n_medians);
  report.results.push_back(detail::band_test(
      "full-data deviation slope vs n", n_slope, -0.5, 0.15, Rn * 3));

  CsvBuilder rates({"delta", "plain_sup_err", "accel_sup_err"});
  for (std::size_t i = 0; i < deltas.size(); ++i)
    rates.row({deltas[i], plain_errs[i], accel_errs[i]});
  report.artifacts.push_back({"rates.csv", rates.str()});
  CsvBuilder nscale({"n", "median_sup_dev"});
  for (std::size_t i = 0; i < ns.size(); ++i) nscale.row({ns[i], n_medians[i]});
  report.artifacts.push_back({"n_scaling.csv", nscale.str()});
  return report;
}

inline ExperimentInfo info_discrete_vs_continuum() {
  ExperimentInfo info;
  info.name = "exp_discrete_vs_continuum";
  info.description =
      "sup-error rates of discrete iterations vs their limit curves in delta "
      "and in n";
  info.anchor = "Theorem 3.2; Theorem 4.3";
  info.schema = {
      {"delta1", {1e-2, 1e-8, 0.5}}, {"delta2", {3e-3, 1e-8, 0.5}},
      {"delta3", {1e-3, 1e-8, 0.5}}, {"t_max", {2.0, 0.1, 20.0}},
      {"tau", {1.0, 1e-6, 100.0}},   {"x01", {1.0, -100.0, 100.0}},
      {"x02", {2.0, -100.0, 100.0}}, {"delta_n", {0.02, 1e-6, 0.5}},
      {"n1", {1000, 10, 1e8}},       {"n2", {3000, 10, 1e8}},
      {"n3", {10000, 10, 1e8}},      {"r_n", {50, 3, 1e6}},
  };
  info.run = &run_discrete_vs_continuum;
  return info;
}

}  // namespace sgdlab::experiments

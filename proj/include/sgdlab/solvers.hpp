#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sgdlab/data.hpp"
#include "sgdlab/descent.hpp"
#include "sgdlab/objective.hpp"
#include "sgdlab/rng.hpp"
#include "sgdlab/types.hpp"

namespace sgdlab {

// Gradient field evaluated in place; solvers call this once per step.
using VecField = std::function<void(const Vec&, Vec&)>;

inline VecField exact_field(const ObjectiveModel& model) {
  return [&model](const Vec& x, Vec& out) { out = model.grad(x); };
}

// Continuous-time numerical solution on a uniform grid.
struct Path {
  Vec times;
  RowMat states;
  RowMat velocities;  // second-order systems only
  std::string solver;
  double h = 0.0;
  double eta_sing = 0.0;
  double noise_scale = 0.0;

  std::int64_t steps() const { return times.size() - 1; }
  int dim() const { return static_cast<int>(states.cols()); }
  bool has_velocity() const { return velocities.size() > 0; }
  Vec state_at(std::int64_t j) const { return states.row(j).transpose(); }
  Vec velocity_at(std::int64_t j) const { return velocities.row(j).transpose(); }

  // Index of grid time t (must lie on the grid).
  std::int64_t index_of(double t) const {
    const auto j = static_cast<std::int64_t>(std::llround(t / h));
    if (j < 0 || j > steps() || std::abs(j * h - t) > 1e-9 * std::max(1.0, t))
      throw RangeError("Path: time not on grid");
    return j;
  }
};

struct MatrixPath {
  Vec times;
  std::vector<Mat> matrices;
};

enum class SigmaMode { frozen_on_reference, state_dependent };

struct NoiseSpec {
  std::optional<double> scale;  // overrides the (delta/m)-derived prefactor
  SigmaMode sigma_mode = SigmaMode::state_dependent;
  std::uint64_t brownian_seed = 0;
};

enum class SdeOrder { first, second };

namespace detail {

inline std::int64_t grid_steps(double h, double T) {
  if (h <= 0.0) throw DomainError("solver: h must be positive");
  if (T < h) throw DomainError("solver: need T >= h");
  return static_cast<std::int64_t>(std::llround(T / h));
}

inline Vec make_times(std::int64_t n, double h) {
  Vec t(n + 1);
  for (std::int64_t j = 0; j <= n; ++j) t[j] = j * h;
  return t;
}

// Matrix square root of a PSD covariance (LLT when PD, eigen-sqrt fallback).
inline Mat matrix_sqrt_psd(const Mat& s) {
  Eigen::LLT<Mat> llt(s);
  if (llt.info() == Eigen::Success) return Mat(llt.matrixL());
  Eigen::SelfAdjointEigenSolver<Mat> es(s);
  return es.eigenvectors() *
         es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

inline void check_grid_match(const Path& ref, double h, std::int64_t n,
                             const char* where) {
  if (std::abs(ref.h - h) > 1e-12 * std::max(1.0, h) || ref.steps() < n)
    throw ConfigError(std::string(where) + ": reference path grid mismatch");
}

}  // namespace detail

// Brownian increments dB_j ~ N(0, h I), one row per step. Regenerating with
// the same (seed, h, n, p) is bit-identical, which is what couples solves.
inline RowMat brownian_increments(std::uint64_t seed, std::int64_t n_steps, int p,
                                  double h) {
  RowMat db(n_steps, p);
  RngStream rng(seed);
  const double s = std::sqrt(h);
  for (std::int64_t j = 0; j < n_steps; ++j)
    for (int i = 0; i < p; ++i) db(j, i) = s * rng.normal();
  return db;
}

// Sum adjacent fine increments so a coarse grid sees the same Brownian path.
inline RowMat coarsen_increments(const RowMat& fine, int factor) {
  if (fine.rows() % factor != 0)
    throw ConfigError("coarsen_increments: step count not divisible");
  RowMat out(fine.rows() / factor, fine.cols());
  for (std::int64_t j = 0; j < out.rows(); ++j) {
    out.row(j) = fine.row(j * factor);
    for (int k = 1; k < factor; ++k) out.row(j) += fine.row(j * factor + k);
  }
  return out;
}

// Explicit Euler for Xdot + field(X) = 0.
inline Path solve_gd_ode(const VecField& grad_field, const Vec& x0, double h,
                         double T) {
  const std::int64_t n = detail::grid_steps(h, T);
  Path path;
  path.solver = "euler_gd_ode";
  path.h = h;
  path.times = detail::make_times(n, h);
  path.states.resize(n + 1, x0.size());
  path.states.row(0) = x0.transpose();
  Vec x = x0, g(x0.size());
  for (std::int64_t j = 0; j < n; ++j) {
    grad_field(x, g);
    x -= h * g;
    check_finite(x, j + 1);
    path.states.row(j + 1) = x.transpose();
  }
  return path;
}

// Euler on the first-order system for Xddot + 3/max(t,eta) Xdot + field(X) = 0,
// X(0) = x0, Xdot(0) = 0.
inline Path solve_nesterov_ode(const VecField& grad_field, const Vec& x0, double h,
                               double T, double eta_sing) {
  if (eta_sing <= 0.0) throw DomainError("solve_nesterov_ode: eta_sing must be positive");
  const std::int64_t n = detail::grid_steps(h, T);
  Path path;
  path.solver = "euler_nesterov_ode";
  path.h = h;
  path.eta_sing = eta_sing;
  path.times = detail::make_times(n, h);
  path.states.resize(n + 1, x0.size());
  path.velocities.setZero(n + 1, x0.size());
  path.states.row(0) = x0.transpose();
  Vec x = x0, z = Vec::Zero(x0.size()), g(x0.size());
  for (std::int64_t j = 0; j < n; ++j) {
    const double t = j * h;
    const double damp = 3.0 / std::max(t, eta_sing);
    grad_field(x, g);
    const Vec z_new = z - h * (damp * z + g);
    x += h * z;
    z = z_new;
    check_finite(x, j + 1);
    path.states.row(j + 1) = x.transpose();
    path.velocities.row(j + 1) = z.transpose();
  }
  return path;
}

// Euler-Maruyama for the SGD diffusion
//   dX = -grad g(X) dt - scale * sigma(.) dB,   scale = sqrt(delta/m),
// with sigma evaluated on the deterministic reference path (frozen mode) or on
// the current state. `increments` may inject a shared Brownian path; otherwise
// the increments derive from noise.brownian_seed.
inline Path solve_gd_sde(const ObjectiveModel& model, const Vec& x0, double delta,
                         double m, double h, double T, const NoiseSpec& noise,
                         const Path* reference_path = nullptr,
                         const RowMat* increments = nullptr,
                         double poly_rate_alpha = 0.0) {
  require_dim(x0, model.dim, "solve_gd_sde");
  const std::int64_t n = detail::grid_steps(h, T);
  const double scale = noise.scale ? *noise.scale : std::sqrt(delta / m);
  if (scale < 0.0) throw DomainError("solve_gd_sde: negative noise scale");
  if (noise.sigma_mode == SigmaMode::frozen_on_reference) {
    if (reference_path == nullptr)
      throw ConfigError("solve_gd_sde: frozen sigma mode requires a reference path");
    detail::check_grid_match(*reference_path, h, n, "solve_gd_sde");
  }
  RowMat local_db;
  if (increments == nullptr) {
    local_db = brownian_increments(noise.brownian_seed, n, model.dim, h);
    increments = &local_db;
  } else if (increments->rows() < n || increments->cols() != model.dim) {
    throw ConfigError("solve_gd_sde: increment matrix does not cover the grid");
  }

  Path path;
  path.solver = "euler_maruyama_gd";
  path.h = h;
  path.noise_scale = scale;
  path.times = detail::make_times(n, h);
  path.states.resize(n + 1, model.dim);
  path.states.row(0) = x0.transpose();
  Vec x = x0;
  for (std::int64_t j = 0; j < n; ++j) {
    const double rate =
        poly_rate_alpha > 0.0 ? std::pow(j * h + 1.0, -poly_rate_alpha) : 1.0;
    Vec drift = model.grad(x);
    Vec diffusion = Vec::Zero(model.dim);
    if (scale > 0.0) {
      const Vec& sigma_arg = (noise.sigma_mode == SigmaMode::frozen_on_reference)
                                 ? reference_path->state_at(j)
                                 : x;
      const Mat sig = detail::matrix_sqrt_psd(model.noise_cov(sigma_arg));
      diffusion = sig * increments->row(j).transpose();
    }
    x -= rate * (h * drift + scale * diffusion);
    check_finite(x, j + 1);
    path.states.row(j + 1) = x.transpose();
  }
  return path;
}

// Euler-Maruyama for the accelerated SGD diffusion
//   Xddot + 3/max(t,eta) Xdot + grad g(X) + scale * sigma(X_ref(t)) Bdot = 0,
// scale = (delta/m^2)^{1/4}; sigma is frozen along the deterministic
// second-order limit path, which is integrated internally on the same grid.
inline Path solve_nesterov_sde(const ObjectiveModel& model, const Vec& x0,
                               double delta, double m, double h, double T,
                               double eta_sing, const NoiseSpec& noise,
                               const RowMat* increments = nullptr) {
  require_dim(x0, model.dim, "solve_nesterov_sde");
  const std::int64_t n = detail::grid_steps(h, T);
  const double scale = noise.scale ? *noise.scale : std::pow(delta / (m * m), 0.25);
  if (scale < 0.0) throw DomainError("solve_nesterov_sde: negative noise scale");
  RowMat local_db;
  if (increments == nullptr) {
    local_db = brownian_increments(noise.brownian_seed, n, model.dim, h);
    increments = &local_db;
  } else if (increments->rows() < n || increments->cols() != model.dim) {
    throw ConfigError("solve_nesterov_sde: increment matrix does not cover the grid");
  }

  Path ref = solve_nesterov_ode(exact_field(model), x0, h, T, eta_sing);

  Path path;
  path.solver = "euler_maruyama_nesterov";
  path.h = h;
  path.eta_sing = eta_sing;
  path.noise_scale = scale;
  path.times = ref.times;
  path.states.resize(n + 1, model.dim);
  path.velocities.setZero(n + 1, model.dim);
  path.states.row(0) = x0.transpose();
  Vec x = x0, z = Vec::Zero(model.dim);
  for (std::int64_t j = 0; j < n; ++j) {
    const double t = j * h;
    const double damp = 3.0 / std::max(t, eta_sing);
    Vec g = model.grad(x);
    Vec diffusion = Vec::Zero(model.dim);
    if (scale > 0.0) {
      const Mat sig = detail::matrix_sqrt_psd(model.noise_cov(ref.state_at(j)));
      diffusion = sig * increments->row(j).transpose();
    }
    const Vec z_new = z - h * (damp * z + g) - scale * diffusion;
    x += h * z;
    z = z_new;
    check_finite(x, j + 1);
    path.states.row(j + 1) = x.transpose();
    path.velocities.row(j + 1) = z.transpose();
  }
  return path;
}

// Deterministic matrix fluctuation equations along a reference path:
//   first order:  Pidot + Hg(X(t)) Pi + sigma(X(t)) = 0, Pi(0) = 0
//   second order: Piddot + 3/max(t,eta) Pidot + Hg(X(t)) Pi + sigma(X(t)) = 0
inline MatrixPath solve_pi_ode(const ObjectiveModel& model, const Path& reference_path,
                               double h, double T, SdeOrder order, double eta_sing) {
  const std::int64_t n = detail::grid_steps(h, T);
  detail::check_grid_match(reference_path, h, n, "solve_pi_ode");
  const int p = model.dim;
  MatrixPath out;
  out.times = detail::make_times(n, h);
  out.matrices.reserve(n + 1);
  Mat pi = Mat::Zero(p, p), dpi = Mat::Zero(p, p);
  out.matrices.push_back(pi);
  for (std::int64_t j = 0; j < n; ++j) {
    const Vec xj = reference_path.state_at(j);
    const Mat hg = model.hessian(xj);
    const Mat sig = detail::matrix_sqrt_psd(model.noise_cov(xj));
    if (order == SdeOrder::first) {
      pi -= h * (hg * pi + sig);
    } else {
      const double t = j * h;
      const double damp = 3.0 / std::max(t, eta_sing);
      const Mat dpi_new = dpi - h * (damp * dpi + hg * pi + sig);
      pi += h * dpi;
      dpi = dpi_new;
    }
    out.matrices.push_back(pi);
  }
  return out;
}

// Linear fluctuation SDEs along a reference path:
//   first order:  dV = -Hg(X(t)) V dt - sigma(X(t)) dB, V(0) = 0
//   second order: Vddot + 3/max(t,eta) Vdot + Hg(X(t)) V + sigma(X(t)) Bdot = 0
inline Path solve_limit_sde(const ObjectiveModel& model, const Path& reference_path,
                            double h, double T, SdeOrder order, double eta_sing,
                            RngStream& rng) {
  const std::int64_t n = detail::grid_steps(h, T);
  detail::check_grid_match(reference_path, h, n, "solve_limit_sde");
  const int p = model.dim;
  const double sqrt_h = std::sqrt(h);

  Path path;
  path.solver = order == SdeOrder::first ? "euler_maruyama_limit1" : "euler_maruyama_limit2";
  path.h = h;
  path.eta_sing = eta_sing;
  path.times = detail::make_times(n, h);
  path.states.setZero(n + 1, p);
  if (order == SdeOrder::second) path.velocities.setZero(n + 1, p);

  Vec v = Vec::Zero(p), dv = Vec::Zero(p), db(p);
  for (std::int64_t j = 0; j < n; ++j) {
    const Vec xj = reference_path.state_at(j);
    const Mat hg = model.hessian(xj);
    const Mat sig = detail::matrix_sqrt_psd(model.noise_cov(xj));
    for (int i = 0; i < p; ++i) db[i] = sqrt_h * rng.normal();
    if (order == SdeOrder::first) {
      v -= h * (hg * v) + sig * db;
    } else {
      const double t = j * h;
      const double damp = 3.0 / std::max(t, eta_sing);
      const Vec dv_new = dv - h * (damp * dv + hg * v) - sig * db;
      v += h * dv;
      dv = dv_new;
      path.velocities.row(j + 1) = dv.transpose();
    }
    check_finite(v, j + 1);
    path.states.row(j + 1) = v.transpose();
  }
  return path;
}

// Unique symmetric solution of Gamma H + H Gamma = S for symmetric positive
// definite H. Kronecker linear solve; the eigendecomposition route stays in
// the tests as the independent check.
inline Mat lyapunov_stationary(const Mat& H, const Mat& S) {
  const auto p = H.rows();
  if (H.cols() != p || S.rows() != p || S.cols() != p)
    throw ShapeError("lyapunov_stationary: H and S must be p x p");
  if (!H.isApprox(H.transpose(), 1e-10))
    throw DomainError("lyapunov_stationary: H must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(H);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw DomainError("lyapunov_stationary: H must be positive definite");

  Mat A = Mat::Zero(p * p, p * p);
  const Mat I = Mat::Identity(p, p);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = 0; j < p; ++j)
      for (Eigen::Index k = 0; k < p; ++k)
        for (Eigen::Index l = 0; l < p; ++l)
          A(i * p + j, k * p + l) = H(i, k) * I(j, l) + I(i, k) * H(j, l);
  Eigen::Map<const Vec> s_vec(S.data(), p * p);
  Vec gamma_vec = A.partialPivLu().solve(Vec(s_vec));
  Mat gamma = Eigen::Map<Mat>(gamma_vec.data(), p, p);
  return 0.5 * (gamma + gamma.transpose());
}

// Normalized cumulative-sum diagnostic
//   H^m_delta(t) = prefactor * sum_{t_k <= t} [ghat_k - grad g(at_k)],
// prefactor (m delta)^{1/2} (plain) or (m^2 delta)^{1/4} (accelerated).
// The realized batch gradients are recovered from the recursion:
// plain ghat_k = (x_{k-1} - x_k)/delta, accelerated ghat_k = (y_{k-1} - x_k)/delta.
// Each summand is centered at the gradient-evaluation point at_k (x_{k-1},
// resp. y_{k-1}), which makes the summands martingale differences and the
// cumulative sum converge to int sigma(X) dB with variance int sigma^2(X) du.
inline Path partial_sum_process(const ObjectiveModel& model, const Trajectory& traj,
                                const Path& reference_path, double m, double delta,
                                SdeOrder order) {
  if (traj.schedule.kind != ScheduleKind::constant)
    throw ConfigError("partial_sum_process: constant schedule required");
  if (model.has_post_step())
    throw ConfigError("partial_sum_process: projection hooks break gradient recovery");
  if (std::abs(traj.delta - delta) > 1e-12 * std::max(1.0, delta))
    throw ConfigError("partial_sum_process: delta does not match trajectory");
  if (order == SdeOrder::second && !traj.has_aux())
    throw ConfigError("partial_sum_process: accelerated form needs Nesterov aux points");
  const double t_step = traj.step_scale;
  const double ratio = t_step / reference_path.h;
  const auto stride = static_cast<std::int64_t>(std::llround(ratio));
  if (stride < 1 || std::abs(stride * reference_path.h - t_step) > 1e-9 * t_step)
    throw ConfigError("partial_sum_process: reference grid does not align with steps");
  const std::int64_t K = traj.steps();
  if (reference_path.steps() < K * stride)
    throw ConfigError("partial_sum_process: reference path too short");

  const double prefactor = order == SdeOrder::first
                               ? std::sqrt(m * delta)
                               : std::pow(m * m * delta, 0.25);
  Path out;
  out.solver = "partial_sum_process";
  out.h = t_step;
  out.times = detail::make_times(K, t_step);
  out.states.setZero(K + 1, model.dim);
  Vec acc = Vec::Zero(model.dim);
  for (std::int64_t k = 1; k <= K; ++k) {
    const Vec base = order == SdeOrder::first ? traj.at(k - 1) : traj.aux_at(k - 1);
    const Vec ghat = (base - traj.at(k)) / delta;
    acc += ghat - model.grad(base);
    out.states.row(k) = (prefactor * acc).transpose();
  }
  return out;
}

}  // namespace sgdlab

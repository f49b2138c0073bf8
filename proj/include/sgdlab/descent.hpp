#pragma once

#include <cmath>
#include <cstdint>

#include "sgdlab/data.hpp"
#include "sgdlab/objective.hpp"
#include "sgdlab/rng.hpp"
#include "sgdlab/types.hpp"

namespace sgdlab {

enum class ScheduleKind { constant, polynomial };

// Learning-rate schedule: constant delta, or delta_k = eta k^{-alpha}, k >= 1.
struct StepSchedule {
  ScheduleKind kind = ScheduleKind::constant;
  double eta = 0.0;
  double alpha = 0.0;

  static StepSchedule constant() { return {}; }
  static StepSchedule polynomial(double eta, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0) || eta <= 0.0)
      throw DomainError("StepSchedule: need alpha in (0,1), eta > 0");
    return {ScheduleKind::polynomial, eta, alpha};
  }

  double step(std::int64_t k, double delta) const {
    if (kind == ScheduleKind::constant) return delta;
    return eta * std::pow(static_cast<double>(k), -alpha);
  }
};

enum class GradKind { exact, full_data, minibatch };

// Unifies the three gradient evaluators: grad g, grad L^n, grad Lhat^m.
struct GradientSource {
  GradKind kind = GradKind::exact;
  const ObjectiveModel* model = nullptr;
  const Dataset* dataset = nullptr;
  std::int64_t batch_size = 0;
  BatchMode batch_mode = BatchMode::population;

  static GradientSource exact(const ObjectiveModel& m) {
    return {GradKind::exact, &m, nullptr, 0, BatchMode::population};
  }
  static GradientSource full_data(const ObjectiveModel& m, const Dataset& ds) {
    return {GradKind::full_data, &m, &ds, 0, BatchMode::population};
  }
  static GradientSource minibatch(const ObjectiveModel& m, std::int64_t batch_size,
                                  BatchMode mode, const Dataset* ds = nullptr) {
    return {GradKind::minibatch, &m, ds, batch_size, mode};
  }

  void validate() const {
    if (model == nullptr) throw ConfigError("GradientSource: missing model");
    if (kind == GradKind::full_data && dataset == nullptr)
      throw ConfigError("GradientSource: full_data requires a dataset");
    if (kind == GradKind::minibatch) {
      if (batch_size < 1) throw ConfigError("GradientSource: minibatch requires batch_size");
      if (batch_mode != BatchMode::population && dataset == nullptr)
        throw ConfigError("GradientSource: subsample mode requires a dataset");
    }
  }
};

// Discrete iterate sequence x_0..x_K together with its step-process embedding
// scale (delta for plain, sqrt(delta) for accelerated) and, for Nesterov runs,
// the interpolation points y_k.
struct Trajectory {
  RowMat iterates;   // (K+1) x p
  RowMat aux;        // y_0..y_K for Nesterov, empty otherwise
  double step_scale = 0.0;
  double delta = 0.0;
  StepSchedule schedule;

  std::int64_t steps() const { return iterates.rows() - 1; }
  Vec at(std::int64_t k) const { return iterates.row(k).transpose(); }
  Vec aux_at(std::int64_t k) const { return aux.row(k).transpose(); }
  bool has_aux() const { return aux.size() > 0; }
};

namespace detail {

struct GradEvaluator {
  const GradientSource& src;
  RngStream& rng;
  Vec scratch;

  explicit GradEvaluator(const GradientSource& s, RngStream& r)
      : src(s), rng(r), scratch(s.model->dim) {}

  // Gradient at `theta` for iteration k (fresh substream per iteration for
  // the minibatch case, so batches are independent across k).
  void eval(const Vec& theta, std::int64_t k, Vec& out) {
    switch (src.kind) {
      case GradKind::exact:
        out = src.model->grad(theta);
        return;
      case GradKind::full_data: {
        out.setZero();
        const Dataset& ds = *src.dataset;
        for (std::int64_t i = 0; i < ds.n(); ++i) {
          src.model->datum_grad(theta, ds.record(i), scratch);
          out += scratch;
        }
        out /= static_cast<double>(ds.n());
        return;
      }
      case GradKind::minibatch: {
        RngStream sub = rng.substream(static_cast<std::uint64_t>(k));
        Batch b = draw_minibatch(*src.model, src.dataset, src.batch_size,
                                 src.batch_mode, sub);
        minibatch_grad_into(*src.model, b, theta, scratch, out);
        return;
      }
    }
  }
};

}  // namespace detail

// x_k = x_{k-1} - delta_k * gradient(x_{k-1})
inline Trajectory run_plain_gd(const GradientSource& source, const Vec& x0,
                               double delta, std::int64_t K,
                               StepSchedule schedule, RngStream& rng) {
  source.validate();
  if (delta <= 0.0) throw DomainError("run_plain_gd: delta must be positive");
  if (K < 1) throw DomainError("run_plain_gd: need K >= 1");
  require_dim(x0, source.model->dim, "run_plain_gd");

  Trajectory traj;
  traj.delta = delta;
  traj.step_scale = delta;
  traj.schedule = schedule;
  traj.iterates.resize(K + 1, source.model->dim);
  traj.iterates.row(0) = x0.transpose();

  detail::GradEvaluator ge(source, rng);
  Vec x = x0, g(source.model->dim);
  for (std::int64_t k = 1; k <= K; ++k) {
    ge.eval(x, k, g);
    x -= schedule.step(k, delta) * g;
    if (source.model->has_post_step()) source.model->post_step(x);
    check_finite(x, k);
    traj.iterates.row(k) = x.transpose();
  }
  return traj;
}

// x_k = y_{k-1} - delta grad(y_{k-1}),  y_k = x_k + (k-1)/(k+2) (x_k - x_{k-1})
inline Trajectory run_nesterov(const GradientSource& source, const Vec& x0,
                               double delta, std::int64_t K, RngStream& rng) {
  source.validate();
  if (delta <= 0.0) throw DomainError("run_nesterov: delta must be positive");
  if (K < 1) throw DomainError("run_nesterov: need K >= 1");
  require_dim(x0, source.model->dim, "run_nesterov");

  Trajectory traj;
  traj.delta = delta;
  traj.step_scale = std::sqrt(delta);
  traj.iterates.resize(K + 1, source.model->dim);
  traj.aux.resize(K + 1, source.model->dim);
  traj.iterates.row(0) = x0.transpose();
  traj.aux.row(0) = x0.transpose();

  detail::GradEvaluator ge(source, rng);
  Vec x_prev = x0, y = x0, x(source.model->dim), g(source.model->dim);
  for (std::int64_t k = 1; k <= K; ++k) {
    ge.eval(y, k, g);
    x = y - delta * g;
    if (source.model->has_post_step()) source.model->post_step(x);
    check_finite(x, k);
    const double momentum = static_cast<double>(k - 1) / static_cast<double>(k + 2);
    y = x + momentum * (x - x_prev);
    x_prev = x;
    traj.iterates.row(k) = x.transpose();
    traj.aux.row(k) = y.transpose();
  }
  return traj;
}

// Step-process embedding x_delta(t) = x_k for k*scale <= t < (k+1)*scale.
inline Vec step_process(const Trajectory& traj, double t) {
  if (t < 0.0) throw RangeError("step_process: t must be nonnegative");
  const double horizon = traj.steps() * traj.step_scale;
  if (t > horizon * (1.0 + 1e-12))
    throw RangeError("step_process: t beyond trajectory horizon");
  auto k = static_cast<std::int64_t>(std::floor(t / traj.step_scale * (1.0 + 1e-12) + 1e-12));
  if (k > traj.steps()) k = traj.steps();
  return traj.at(k);
}

}  // namespace sgdlab

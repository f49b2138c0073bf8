#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "sgdlab/rng.hpp"
#include "sgdlab/types.hpp"

namespace sgdlab {

// One observation U ~ Q. Interpretation is model-specific: the quadratic-mean
// model stores U itself, the regression models store (response, covariates),
// the tensor model stores W.
using DatumRef = Eigen::Ref<const Eigen::VectorXd>;

// An optimization problem bundle: population objective g with derivatives,
// per-datum loss gradient, gradient-noise covariance, and the data law Q.
// All evaluation maps are pure; samplers consume a caller-supplied stream.
struct ObjectiveModel {
  int dim = 0;
  std::string name;

  std::function<double(const Vec&)> value;      // g(theta)
  std::function<Vec(const Vec&)> grad;          // grad g
  std::function<Mat(const Vec&)> hessian;       // Hg, symmetric
  std::function<Mat(const Vec&)> noise_cov;     // sigma^2(theta) = Var[grad l], PSD

  // Draws U ~ Q into `out` (resized by the caller to datum_dim).
  std::function<void(RngStream&, Eigen::Ref<Vec>)> datum_sampler;
  // grad of the per-datum loss l(theta; u), written into `out`.
  std::function<void(const Vec&, const DatumRef&, Vec&)> datum_grad;

  std::optional<Vec> minimizer;
  int datum_dim = 0;

  // Optional per-step projection (tensor model: renormalize to the sphere).
  std::function<void(Vec&)> post_step;

  // Fixed-design models generate datum i deterministically up to noise.
  std::function<void(std::int64_t, RngStream&, Eigen::Ref<Vec>)> indexed_sampler;
  std::int64_t design_n = 0;

  bool has_post_step() const { return static_cast<bool>(post_step); }
  bool is_fixed_design() const { return design_n > 0; }
};

inline double eval_value(const ObjectiveModel& m, const Vec& theta) {
  require_dim(theta, m.dim, "eval_value");
  return m.value(theta);
}

inline Vec eval_grad(const ObjectiveModel& m, const Vec& theta) {
  require_dim(theta, m.dim, "eval_grad");
  return m.grad(theta);
}

inline Mat eval_hessian(const ObjectiveModel& m, const Vec& theta) {
  require_dim(theta, m.dim, "eval_hessian");
  return m.hessian(theta);
}

inline Mat eval_noise_cov(const ObjectiveModel& m, const Vec& theta) {
  require_dim(theta, m.dim, "eval_noise_cov");
  return m.noise_cov(theta);
}

// --------------------------------------------------------------------------
// Example 1: U1 ~ N(theta1, tau^2), U2 ~ Exp(mean theta2) independently,
// l(theta; U) = |U - theta|^2 / 2.
inline ObjectiveModel make_quadratic_mean(const Vec& theta_check, double tau) {
  require_dim(theta_check, 2, "make_quadratic_mean");
  if (tau <= 0.0) throw DomainError("make_quadratic_mean: tau must be positive");
  if (theta_check[1] <= 0.0)
    throw DomainError("make_quadratic_mean: exponential mean theta2 must be positive");

  ObjectiveModel m;
  m.dim = 2;
  m.datum_dim = 2;
  m.name = "quadratic_mean";
  const Vec tc = theta_check;
  const double tau2 = tau * tau;
  const double th2sq = tc[1] * tc[1];

  m.value = [tc, tau2, th2sq](const Vec& th) {
    return 0.5 * ((th - tc).squaredNorm() + tau2 + th2sq);
  };
  m.grad = [tc](const Vec& th) -> Vec { return th - tc; };
  m.hessian = [](const Vec&) -> Mat { return Mat::Identity(2, 2); };
  m.noise_cov = [tau2, th2sq](const Vec&) -> Mat {
    Mat s = Mat::Zero(2, 2);
    s(0, 0) = tau2;
    s(1, 1) = th2sq;
    return s;
  };
  m.datum_sampler = [tc, tau](RngStream& rng, Eigen::Ref<Vec> out) {
    out[0] = rng.normal(tc[0], tau);
    out[1] = rng.exponential(tc[1]);
  };
  m.datum_grad = [](const Vec& th, const DatumRef& u, Vec& out) {
    out = th - u;
  };
  m.minimizer = tc;
  return m;
}

// --------------------------------------------------------------------------
// Example 3, random design: U1 = U2' theta + eps, U2 ~ N(0, alpha),
// eps ~ N(0, tau^2). Datum payload is (U1, U2). sigma^2 uses the Gaussian
// fourth-moment identity: (b'ab) a + (ab)(ab)' + tau^2 a with b = theta - check.
inline ObjectiveModel make_linreg_random(const Mat& alpha, double tau,
                                         const Vec& theta_check) {
  const int p = static_cast<int>(theta_check.size());
  if (alpha.rows() != p || alpha.cols() != p)
    throw ShapeError("make_linreg_random: alpha must be p x p");
  if (tau <= 0.0) throw DomainError("make_linreg_random: tau must be positive");
  if (!alpha.isApprox(alpha.transpose(), 1e-12))
    throw DomainError("make_linreg_random: alpha must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(alpha);
  if (es.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, alpha.norm()))
    throw DomainError("make_linreg_random: alpha must be PSD");
  Mat sqrt_alpha =
      es.eigenvectors() *
      es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
      es.eigenvectors().transpose();

  ObjectiveModel m;
  m.dim = p;
  m.datum_dim = p + 1;
  m.name = "linreg_random";
  const Vec tc = theta_check;
  const Mat a = alpha;
  const double tau2 = tau * tau;

  m.value = [tc, a, tau2](const Vec& th) {
    const Vec b = th - tc;
    return 0.5 * tau2 + 0.5 * b.dot(a * b);
  };
  m.grad = [tc, a](const Vec& th) -> Vec { return a * (th - tc); };
  m.hessian = [a](const Vec&) -> Mat { return a; };
  m.noise_cov = [tc, a, tau2](const Vec& th) -> Mat {
    const Vec b = th - tc;
    const Vec ab = a * b;
    return b.dot(ab) * a + ab * ab.transpose() + tau2 * a;
  };
  m.datum_sampler = [tc, sqrt_alpha, tau, p](RngStream& rng, Eigen::Ref<Vec> out) {
    Vec z(p);
    for (int i = 0; i < p; ++i) z[i] = rng.normal();
    const Vec u2 = sqrt_alpha * z;
    out[0] = u2.dot(tc) + rng.normal(0.0, tau);
    out.tail(p) = u2;
  };
  m.datum_grad = [p](const Vec& th, const DatumRef& u, Vec& out) {
    const auto u2 = u.tail(p);
    out = u2 * (u2.dot(th) - u[0]);
  };
  m.minimizer = tc;
  return m;
}

namespace detail {

// Deterministic n x p design with D'D = n I: sign-pattern seed columns,
// modified Gram-Schmidt, columns rescaled to norm sqrt(n).
inline Mat orthogonal_design(std::int64_t n, int p) {
  Mat d(n, p);
  for (std::int64_t i = 0; i < n; ++i) {
    d(i, 0) = 1.0;
    for (int j = 1; j < p; ++j)
      d(i, j) = ((i >> (j - 1)) & 1) == 0 ? 1.0 : -1.0;
  }
  for (int j = 0; j < p; ++j) {
    for (int k = 0; k < j; ++k)
      d.col(j) -= d.col(k).dot(d.col(j)) / d.col(k).squaredNorm() * d.col(k);
    const double nrm = d.col(j).norm();
    if (nrm < 1e-9)
      throw DomainError("orthogonal_design: rank-deficient seed columns");
    d.col(j) *= std::sqrt(static_cast<double>(n)) / nrm;
  }
  return d;
}

}  // namespace detail

// --------------------------------------------------------------------------
// Example 3, fixed orthogonal design: U2'U2/n = I by construction,
// g(theta) = [|theta - check|^2 + tau^2]/2, sigma^2 = tau^2 I.
// Datum payload is (U1_i, row_i). The sampler draws a uniformly random row.
inline ObjectiveModel make_linreg_fixed(const Vec& theta_check, double tau,
                                        std::int64_t n) {
  const int p = static_cast<int>(theta_check.size());
  if (tau <= 0.0) throw DomainError("make_linreg_fixed: tau must be positive");
  if (n < p) throw DomainError("make_linreg_fixed: need n >= p");

  auto design = std::make_shared<Mat>(detail::orthogonal_design(n, p));

  ObjectiveModel m;
  m.dim = p;
  m.datum_dim = p + 1;
  m.name = "linreg_fixed";
  m.design_n = n;
  const Vec tc = theta_check;
  const double tau2 = tau * tau;

  m.value = [tc, tau2](const Vec& th) {
    return 0.5 * ((th - tc).squaredNorm() + tau2);
  };
  m.grad = [tc](const Vec& th) -> Vec { return th - tc; };
  m.hessian = [p](const Vec&) -> Mat { return Mat::Identity(p, p); };
  m.noise_cov = [p, tau2](const Vec&) -> Mat {
    return tau2 * Mat::Identity(p, p);
  };
  m.indexed_sampler = [design, tc, tau, p](std::int64_t i, RngStream& rng,
                                           Eigen::Ref<Vec> out) {
    const auto row = design->row(i);
    out[0] = row.dot(tc) + rng.normal(0.0, tau);
    out.tail(p) = row.transpose();
  };
  m.datum_sampler = [design, tc, tau, p, n](RngStream& rng, Eigen::Ref<Vec> out) {
    const std::int64_t i = static_cast<std::int64_t>(rng.uniform_below(n));
    const auto row = design->row(i);
    out[0] = row.dot(tc) + rng.normal(0.0, tau);
    out.tail(p) = row.transpose();
  };
  m.datum_grad = [p](const Vec& th, const DatumRef& u, Vec& out) {
    const auto u2 = u.tail(p);
    out = u2 * (u2.dot(th) - u[0]);
  };
  m.minimizer = tc;
  return m;
}

// --------------------------------------------------------------------------
// Example 2 (d = 2): orthogonal tensor decomposition in transformed
// coordinates x = A'u (A = I without loss). The drift field is the
// sphere-projected gradient of -|x|_4^4; iterates are renormalized to the
// unit sphere after every step. datum_grad is the paper's online update term.
enum class WDist { uniform_sym, rademacher };

struct TensorMoments {
  // psi[k] = E W^k, k = 0..8
  double psi[9];
};

inline TensorMoments tensor_moments(WDist w) {
  TensorMoments tm{};
  tm.psi[0] = 1.0;
  if (w == WDist::uniform_sym) {
    // uniform on [-sqrt(3), sqrt(3)]: E W^{2k} = 3^k / (2k+1)
    tm.psi[2] = 1.0;
    tm.psi[4] = 9.0 / 5.0;
    tm.psi[6] = 27.0 / 7.0;
    tm.psi[8] = 9.0;
  } else {
    tm.psi[2] = tm.psi[4] = tm.psi[6] = tm.psi[8] = 1.0;
  }
  return tm;
}

inline ObjectiveModel make_tensor4_d2(WDist w_dist) {
  const TensorMoments tm = tensor_moments(w_dist);
  if (std::abs(tm.psi[4] - 3.0) < 1e-12)
    throw DomainError("unidentifiable tensor structure for psi4=3");

  ObjectiveModel m;
  m.dim = 2;
  m.datum_dim = 2;
  m.name = (w_dist == WDist::uniform_sym) ? "tensor4_d2_uniform" : "tensor4_d2_rademacher";

  m.value = [](const Vec& x) {
    return -(x[0] * x[0] * x[0] * x[0] + x[1] * x[1] * x[1] * x[1]);
  };
  m.grad = [](const Vec& x) -> Vec {
    const double s = x[0] * x[0] * x[0] * x[0] + x[1] * x[1] * x[1] * x[1];
    Vec g(2);
    g[0] = -4.0 * (x[0] * x[0] * x[0] - x[0] * s);
    g[1] = -4.0 * (x[1] * x[1] * x[1] - x[1] * s);
    return g;
  };
  m.hessian = [](const Vec& x) -> Mat {
    const double s = x[0] * x[0] * x[0] * x[0] + x[1] * x[1] * x[1] * x[1];
    Mat h = 4.0 * s * Mat::Identity(2, 2);
    h(0, 0) -= 12.0 * x[0] * x[0];
    h(1, 1) -= 12.0 * x[1] * x[1];
    return h;
  };
  m.noise_cov = [tm](const Vec& u) -> Mat {
    const double* psi = tm.psi;
    // E[(u'W)^3 W]
    Vec mean(2);
    mean[0] = psi[4] * u[0] * u[0] * u[0] + 3.0 * u[0] * u[1] * u[1];
    mean[1] = psi[4] * u[1] * u[1] * u[1] + 3.0 * u[0] * u[0] * u[1];
    // E[(u'W)^6 W_i W_j] from the binomial moment expansion
    static const double binom6[7] = {1, 6, 15, 20, 15, 6, 1};
    double m11 = 0.0, m22 = 0.0, m12 = 0.0;
    for (int l = 0; l <= 6; ++l) {
      const double p1 = std::pow(u[0], l) * std::pow(u[1], 6 - l);
      const double p2 = std::pow(u[1], l) * std::pow(u[0], 6 - l);
      m11 += binom6[l] * p1 * psi[l + 2] * psi[6 - l];
      m22 += binom6[l] * p2 * psi[l + 2] * psi[6 - l];
      m12 += binom6[l] * p1 * psi[l + 1] * psi[7 - l];
    }
    Mat s(2, 2);
    s(0, 0) = m11 - mean[0] * mean[0];
    s(0, 1) = m12 - mean[0] * mean[1];
    s(1, 0) = s(0, 1);
    s(1, 1) = m22 - mean[1] * mean[1];
    return 16.0 * s;
  };
  if (w_dist == WDist::uniform_sym) {
    const double a = std::sqrt(3.0);
    m.datum_sampler = [a](RngStream& rng, Eigen::Ref<Vec> out) {
      out[0] = a * (2.0 * rng.uniform() - 1.0);
      out[1] = a * (2.0 * rng.uniform() - 1.0);
    };
  } else {
    m.datum_sampler = [](RngStream& rng, Eigen::Ref<Vec> out) {
      out[0] = (rng.next_u64() & 1) ? 1.0 : -1.0;
      out[1] = (rng.next_u64() & 1) ? 1.0 : -1.0;
    };
  }
  m.datum_grad = [](const Vec& x, const DatumRef& w, Vec& out) {
    const double dot = x[0] * w[0] + x[1] * w[1];
    const double c = -4.0 * dot * dot * dot;
    out.resize(2);
    out[0] = c * w[0];
    out[1] = c * w[1];
  };
  m.post_step = [](Vec& x) { x /= x.norm(); };
  return m;
}

}  // namespace sgdlab

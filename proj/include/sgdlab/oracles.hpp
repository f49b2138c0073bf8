#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "sgdlab/types.hpp"

namespace sgdlab {

enum class OracleMethod { series, asymptotic, quadrature, algebraic };

struct OracleResult {
  double value = 0.0;
  OracleMethod method = OracleMethod::algebraic;
  double est_error = 0.0;
};

namespace detail {

constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kEulerGamma = 0.577215664901532860606512090082402431;

// Crossover between the power series and the Hankel asymptotic expansion.
constexpr double kBesselCrossover = 20.0;

// Hankel P/Q sums for order one (mu = 4), truncated where the terms bottom out
// for u >= 20; see the term-size check in the tests.
inline void hankel_pq_order1(double u, double& P, double& Q) {
  const double inv = 1.0 / (8.0 * u);
  double term = 1.0;
  P = 1.0;
  Q = 0.0;
  // term_k = prod_{j=1..k} (mu - (2j-1)^2) / (k * 8u)
  for (int k = 1; k <= 14; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= (4.0 - odd * odd) * inv / k;
    if (k % 2 == 1)
      Q += (((k - 1) / 2) % 2 == 0) ? term : -term;
    else
      P += ((k / 2) % 2 == 0) ? term : -term;
  }
}

}  // namespace detail

// Bessel function of the first kind, order one. Power series
// sum_j (-1)^j (u/2)^{2j+1} / (j! (j+1)!) below the crossover (long double
// accumulation controls cancellation near u = 20), Hankel expansion above.
inline OracleResult bessel_j1_result(double u) {
  if (u < 0.0) throw DomainError("bessel_j1: negative argument");
  OracleResult r;
  if (u == 0.0) {
    r.value = 0.0;
    r.method = OracleMethod::series;
    return r;
  }
  if (u <= detail::kBesselCrossover) {
    const long double half = static_cast<long double>(u) / 2.0L;
    const long double x2 = half * half;
    long double term = half;  // j = 0
    long double sum = term;
    long double max_mag = std::fabs((double)term);
    for (int j = 1; j < 200; ++j) {
      term *= -x2 / (static_cast<long double>(j) * (j + 1));
      sum += term;
      max_mag = std::max<long double>(max_mag, term > 0 ? term : -term);
      if ((term > 0 ? term : -term) < 1e-15L * (sum > 0 ? sum : -sum) &&
          (term > 0 ? term : -term) < 1e-18L)
        break;
    }
    r.value = static_cast<double>(sum);
    r.method = OracleMethod::series;
    r.est_error = static_cast<double>(max_mag) * 1e-18;
    return r;
  }
  double P, Q;
  detail::hankel_pq_order1(u, P, Q);
  const double w = u - 0.75 * detail::kPi;
  r.value = std::sqrt(2.0 / (detail::kPi * u)) * (std::cos(w) * P - std::sin(w) * Q);
  r.method = OracleMethod::asymptotic;
  r.est_error = 1e-13;
  return r;
}

inline double bessel_j1(double u) { return bessel_j1_result(u).value; }

// Bessel function of the second kind, order one. Log-coupled series (A&S
// 9.1.11) below the crossover, Hankel expansion above. Diverges at the origin.
inline OracleResult bessel_y1_result(double u) {
  if (u <= 0.0) throw SingularityError("bessel_y1: argument must be positive");
  OracleResult r;
  if (u <= detail::kBesselCrossover) {
    const long double half = static_cast<long double>(u) / 2.0L;
    const long double x2 = half * half;
    // sum_k (-1)^k [psi(k+1) + psi(k+2)] / (k! (k+1)!) (u/2)^{2k+1}
    long double psi1 = -static_cast<long double>(detail::kEulerGamma);  // psi(k+1)
    long double psi2 = psi1 + 1.0L;                                     // psi(k+2)
    long double coeff = half;  // (u/2)^{2k+1} / (k!(k+1)!)
    long double sum = coeff * (psi1 + psi2);
    for (int k = 1; k < 200; ++k) {
      psi1 += 1.0L / k;
      psi2 += 1.0L / (k + 1);
      coeff *= -x2 / (static_cast<long double>(k) * (k + 1));
      const long double term = coeff * (psi1 + psi2);
      sum += term;
      if ((term > 0 ? term : -term) < 1e-18L) break;
    }
    const double j1 = bessel_j1(u);
    r.value = (2.0 / detail::kPi) * std::log(u / 2.0) * j1 - 2.0 / (detail::kPi * u) -
              static_cast<double>(sum) / detail::kPi;
    r.method = OracleMethod::series;
    r.est_error = 1e-14 * (1.0 + std::abs(r.value));
    return r;
  }
  double P, Q;
  detail::hankel_pq_order1(u, P, Q);
  const double w = u - 0.75 * detail::kPi;
  r.value = std::sqrt(2.0 / (detail::kPi * u)) * (std::sin(w) * P + std::cos(w) * Q);
  r.method = OracleMethod::asymptotic;
  r.est_error = 1e-13;
  return r;
}

inline double bessel_y1(double u) { return bessel_y1_result(u).value; }

// X(t) = theta + (x0 - theta) e^{-t}, the plain-GD limit solution.
inline Vec exp_decay_path(const Vec& theta, const Vec& x0, double t) {
  if (t < 0.0) throw DomainError("exp_decay_path: t must be nonnegative");
  require_dim(x0, theta.size(), "exp_decay_path");
  return theta + (x0 - theta) * std::exp(-t);
}

// X(t) = theta + 2 (x0 - theta) J1(t)/t, the accelerated limit solution;
// the t = 0 value is the limit 2 J1(t)/t -> 1.
inline Vec bessel_path(const Vec& theta, const Vec& x0, double t) {
  if (t < 0.0) throw DomainError("bessel_path: t must be nonnegative");
  require_dim(x0, theta.size(), "bessel_path");
  const double factor = (t == 0.0) ? 1.0 : 2.0 * bessel_j1(t) / t;
  return theta + (x0 - theta) * factor;
}

// Constant-coefficient OU variance diag(sigma_i^2 (1 - e^{-2 h_i t}) / (2 h_i)).
inline Mat ou_variance(const Vec& h_diag, const Vec& sigma_diag, double t) {
  require_dim(sigma_diag, h_diag.size(), "ou_variance");
  Mat out = Mat::Zero(h_diag.size(), h_diag.size());
  for (Eigen::Index i = 0; i < h_diag.size(); ++i) {
    if (h_diag[i] <= 0.0) throw DomainError("ou_variance: h entries must be positive");
    out(i, i) = sigma_diag[i] * sigma_diag[i] * (1.0 - std::exp(-2.0 * h_diag[i] * t)) /
                (2.0 * h_diag[i]);
  }
  return out;
}

// Closed-form tensor gradient flow X1^2(t) = 0.5 + 0.5 [1 + c e^{-4t}]^{-1/2},
// c = (2 x - 1)^{-2} - 1, valid for X1^2(0) in (0.5, 1].
inline double tensor_flow_x1sq(double x1sq_0, double t) {
  if (t < 0.0) throw DomainError("tensor_flow_x1sq: t must be nonnegative");
  if (!(x1sq_0 > 0.5) || x1sq_0 > 1.0)
    throw DomainError("tensor_flow_x1sq: initial X1^2 must lie in (0.5, 1]");
  const double b = 2.0 * x1sq_0 - 1.0;
  const double c = 1.0 / (b * b) - 1.0;
  return 0.5 + 0.5 / std::sqrt(1.0 + c * std::exp(-4.0 * t));
}

// Adaptive Simpson quadrature; absolute tolerance, panel splitting capped at
// 2^20 (recursion depth 20). Returns the value and an error estimate.
inline OracleResult adaptive_simpson(const std::function<double(double)>& f, double a,
                                     double b, double abs_tol = 1e-10) {
  struct Impl {
    const std::function<double(double)>& f;
    double err_acc = 0.0;
    double recurse(double a, double m, double b, double fa, double fm, double fb,
                   double whole, double tol, int depth) {
      const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
      const double flm = f(lm), frm = f(rm);
      const double h = b - a;
      const double left = h / 12.0 * (fa + 4.0 * flm + fm);
      const double right = h / 12.0 * (fm + 4.0 * frm + fb);
      const double delta = left + right - whole;
      if (depth >= 20 || std::abs(delta) <= 15.0 * tol) {
        err_acc += std::abs(delta) / 15.0;
        return left + right + delta / 15.0;
      }
      return recurse(a, lm, m, fa, flm, fm, left, tol / 2.0, depth + 1) +
             recurse(m, rm, b, fm, frm, fb, right, tol / 2.0, depth + 1);
    }
  };
  OracleResult r;
  r.method = OracleMethod::quadrature;
  if (a == b) return r;
  Impl impl{f};
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  r.value = impl.recurse(a, m, b, fa, fm, fb, whole, abs_tol, 0);
  r.est_error = impl.err_acc;
  return r;
}

// Var V(t) for the accelerated fluctuation SDE in the Hessian = I scalar case:
// (pi/2)^2 sigma^2 / t^2 * int_0^t [J1(t) Y1(u) - Y1(t) J1(u)]^2 u^4 du.
inline OracleResult accel_limit_variance(double sigma, double t) {
  if (sigma < 0.0) throw DomainError("accel_limit_variance: sigma must be nonnegative");
  if (t < 0.0) throw DomainError("accel_limit_variance: t must be nonnegative");
  OracleResult r;
  r.method = OracleMethod::quadrature;
  if (t == 0.0 || sigma == 0.0) return r;
  const double j1t = bessel_j1(t);
  const double y1t = bessel_y1(t);
  auto integrand = [&](double u) {
    if (u <= 0.0) return 0.0;
    const double g = j1t * bessel_y1(u) - y1t * bessel_j1(u);
    return g * g * u * u * u * u;
  };
  // u Y1(u) -> -2/pi at the origin, so the integrand is ~ u^2 near 0; start the
  // panel at 0 with the integrand pinned to its limit value there.
  OracleResult q = adaptive_simpson(integrand, 0.0, t, 1e-12);
  const double pref = (detail::kPi / 2.0) * (detail::kPi / 2.0) * sigma * sigma / (t * t);
  r.value = pref * q.value;
  r.est_error = pref * q.est_error;
  return r;
}

}  // namespace sgdlab

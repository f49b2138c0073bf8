#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "sgdlab/objective.hpp"
#include "sgdlab/oracles.hpp"
#include "sgdlab/rng.hpp"
#include "sgdlab/solvers.hpp"
#include "sgdlab/types.hpp"

namespace sgdlab {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Chunked index-parallel loop; work is partitioned by index so results are
// independent of the thread count.
inline void parallel_for(std::int64_t n, int threads,
                         const std::function<void(std::int64_t, std::int64_t)>& body) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;
  threads = static_cast<int>(std::min<std::int64_t>(threads, n));
  if (threads <= 1 || n <= 1) {
    body(0, n);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  const std::int64_t chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const std::int64_t lo = t * chunk;
    const std::int64_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi] {
      try {
        body(lo, hi);
      } catch (...) {
        std::scoped_lock lk(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// R replicate outcome vectors; replicate r runs on the stream derived from
// (master_seed, r), so results are reproducible under any schedule.
struct Ensemble {
  RowMat replicates;
  std::uint64_t master_seed = 0;
  std::vector<std::uint64_t> per_replicate_seeds;

  std::int64_t size() const { return replicates.rows(); }
  int width() const { return static_cast<int>(replicates.cols()); }
  Vec column(int j) const { return replicates.col(j); }
};

using ReplicateSim = std::function<Vec(std::int64_t r, RngStream& rng)>;

inline Ensemble run_ensemble(const ReplicateSim& sim, std::int64_t R,
                             std::uint64_t master_seed, int threads = 0) {
  if (R < 2) throw DomainError("run_ensemble: need R >= 2");
  Ensemble ens;
  ens.master_seed = master_seed;
  ens.per_replicate_seeds.resize(R);
  for (std::int64_t r = 0; r < R; ++r)
    ens.per_replicate_seeds[r] = hash64(master_seed, static_cast<std::uint64_t>(r));

  std::int64_t width = -1;
  {
    RngStream rng(ens.per_replicate_seeds[0]);
    Vec first = sim(0, rng);
    width = first.size();
    ens.replicates.resize(R, width);
    ens.replicates.row(0) = first.transpose();
  }
  parallel_for(R - 1, threads, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i) {
      const std::int64_t r = i + 1;
      RngStream rng(ens.per_replicate_seeds[r]);
      Vec out;
      try {
        out = sim(r, rng);
      } catch (const std::exception& e) {
        throw Error("replicate " + std::to_string(r) + " failed: " + e.what());
      }
      if (out.size() != width)
        throw ShapeError("run_ensemble: replicate outcome width changed");
      ens.replicates.row(r) = out.transpose();
    }
  });
  return ens;
}

// Unbiased sample mean and covariance (divisor R-1).
inline std::pair<Vec, Mat> empirical_mean_cov(const Ensemble& ens) {
  if (ens.size() < 2) throw DomainError("empirical_mean_cov: need R >= 2");
  const Vec mean = ens.replicates.colwise().mean().transpose();
  Mat centered = ens.replicates;
  centered.rowwise() -= mean.transpose();
  Mat cov = centered.transpose() * centered / static_cast<double>(ens.size() - 1);
  return {mean, cov};
}

struct TestResult {
  std::string description;
  double statistic = 0.0;
  double threshold = 0.0;
  bool passed = false;
  std::int64_t n_samples = 0;
};

inline TestResult make_test_result(std::string description, double statistic,
                                   double threshold, std::int64_t n_samples) {
  TestResult t;
  t.description = std::move(description);
  t.statistic = statistic;
  t.threshold = threshold;
  t.passed = statistic <= threshold;
  t.n_samples = n_samples;
  return t;
}

// One-sample Kolmogorov-Smirnov against Normal(mean, sd^2); asymptotic
// thresholds c(0.05) = 1.358, c(0.01) = 1.628.
inline TestResult ks_test_normal(const std::vector<double>& samples, double mean,
                                 double sd, double level,
                                 const std::string& label = "ks_normal") {
  if (sd <= 0.0) throw DomainError("ks_test_normal: sd must be positive");
  if (samples.size() < 50)
    throw InsufficientSamplesError("ks_test_normal: need at least 50 samples");
  double c;
  if (std::abs(level - 0.05) < 1e-12)
    c = 1.358;
  else if (std::abs(level - 0.01) < 1e-12)
    c = 1.628;
  else
    throw DomainError("ks_test_normal: level must be 0.01 or 0.05");

  std::vector<double> z(samples);
  std::sort(z.begin(), z.end());
  const auto n = static_cast<double>(z.size());
  double d = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double cdf = normal_cdf((z[i] - mean) / sd);
    d = std::max(d, std::abs((i + 1.0) / n - cdf));
    d = std::max(d, std::abs(cdf - i / n));
  }
  return make_test_result(label, d, c / std::sqrt(n),
                          static_cast<std::int64_t>(z.size()));
}

// Least-squares slope of log(error) against log(scale).
inline double rate_slope(const std::vector<double>& scales,
                         const std::vector<double>& errors) {
  if (scales.size() != errors.size() || scales.size() < 3)
    throw DomainError("rate_slope: need >= 3 matched points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < scales.size(); ++i) {
    if (scales[i] <= 0.0 || errors[i] <= 0.0)
      throw DomainError("rate_slope: inputs must be positive");
    const double x = std::log(scales[i]), y = std::log(errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const auto n = static_cast<double>(scales.size());
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// First grid time with |X(t) - center| > rho, or nullopt if the path never
// leaves within its horizon. The path must start inside the ball.
inline std::optional<double> escape_time(const Path& path, const Vec& center,
                                         double rho) {
  if (rho <= 0.0) throw DomainError("escape_time: rho must be positive");
  require_dim(center, path.dim(), "escape_time");
  if ((path.state_at(0) - center).norm() > rho)
    throw PreconditionError("escape_time: path starts outside the ball");
  for (std::int64_t j = 1; j <= path.steps(); ++j)
    if ((path.state_at(j) - center).norm() > rho) return path.times[j];
  return std::nullopt;
}

// Escape time computed directly on a discrete trajectory (t = k * step_scale).
inline std::optional<double> escape_time(const Trajectory& traj, const Vec& center,
                                         double rho) {
  if (rho <= 0.0) throw DomainError("escape_time: rho must be positive");
  if ((traj.at(0) - center).norm() > rho)
    throw PreconditionError("escape_time: trajectory starts outside the ball");
  for (std::int64_t k = 1; k <= traj.steps(); ++k)
    if ((traj.at(k) - center).norm() > rho) return k * traj.step_scale;
  return std::nullopt;
}

namespace detail {

// chi^2 upper quantiles for the 20-bin histogram (19 degrees of freedom).
inline double chi2_quantile_19(double level) {
  if (std::abs(level - 0.01) < 1e-12) return 36.1909;
  if (std::abs(level - 0.05) < 1e-12) return 30.1435;
  throw DomainError("gibbs_density_check: level must be 0.01 or 0.05");
}

}  // namespace detail

// Chi-square goodness of fit of long-run SDE samples against the stationary
// Gibbs density p(theta) ~ exp(-2m g(theta) / (delta sigma^2(min))), using 20
// equiprobable bins; the density is normalized by quadrature.
inline TestResult gibbs_density_check(const ObjectiveModel& model, double delta,
                                      double m, const std::vector<double>& samples,
                                      double level = 0.01) {
  if (model.dim != 1) throw DomainError("gibbs_density_check: scalar model required");
  if (!model.minimizer) throw DomainError("gibbs_density_check: model needs a minimizer");
  if (samples.size() < 1000)
    throw InsufficientSamplesError("gibbs_density_check: need >= 1000 samples");

  const double sigma2 = model.noise_cov(*model.minimizer)(0, 0);
  const double beta = 2.0 * m / (delta * sigma2);
  const double g0 = model.value(*model.minimizer);
  auto unnorm = [&](double th) {
    Vec v(1);
    v[0] = th;
    return std::exp(-beta * (model.value(v) - g0));
  };

  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  const double spread = std::max(*mx - *mn, 1e-12);
  const double lo = *mn - 0.5 * spread, hi = *mx + 0.5 * spread;

  // Cumulative density on a fine grid, then equiprobable bin edges.
  const int grid = 8192;
  std::vector<double> cdf(grid + 1, 0.0);
  const double dx = (hi - lo) / grid;
  double prev = unnorm(lo);
  for (int i = 1; i <= grid; ++i) {
    const double cur = unnorm(lo + i * dx);
    cdf[i] = cdf[i - 1] + 0.5 * (prev + cur) * dx;
    prev = cur;
  }
  const double total = cdf[grid];
  if (total <= 0.0) throw DomainError("gibbs_density_check: degenerate density");

  const int bins = 20;
  std::vector<double> edges(bins + 1);
  edges[0] = lo;
  edges[bins] = hi;
  int gi = 0;
  for (int b = 1; b < bins; ++b) {
    const double target = total * b / bins;
    while (gi < grid && cdf[gi + 1] < target) ++gi;
    const double seg = cdf[gi + 1] - cdf[gi];
    const double frac = seg > 0.0 ? (target - cdf[gi]) / seg : 0.0;
    edges[b] = lo + (gi + frac) * dx;
  }

  std::vector<std::int64_t> counts(bins, 0);
  for (double s : samples) {
    int b = static_cast<int>(std::upper_bound(edges.begin(), edges.end(), s) -
                             edges.begin()) - 1;
    b = std::clamp(b, 0, bins - 1);
    ++counts[b];
  }
  const double expected = static_cast<double>(samples.size()) / bins;
  double chi2 = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double diff = counts[b] - expected;
    chi2 += diff * diff / expected;
  }
  return make_test_result("gibbs_density_chi2", chi2, detail::chi2_quantile_19(level),
                          static_cast<std::int64_t>(samples.size()));
}

// Integrated autocorrelation time (in sample steps) via batch means.
inline double autocorr_time_batch_means(const std::vector<double>& x) {
  const auto n = static_cast<std::int64_t>(x.size());
  if (n < 64) return 1.0;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n - 1);
  if (var <= 0.0) return 1.0;
  const std::int64_t b = std::max<std::int64_t>(16, n / 32);
  const std::int64_t nb = n / b;
  double bvar = 0.0;
  for (std::int64_t k = 0; k < nb; ++k) {
    double bm = 0.0;
    for (std::int64_t i = 0; i < b; ++i) bm += x[k * b + i];
    bm /= static_cast<double>(b);
    bvar += (bm - mean) * (bm - mean);
  }
  bvar /= static_cast<double>(nb - 1);
  return std::max(1.0, b * bvar / var);
}

}  // namespace sgdlab

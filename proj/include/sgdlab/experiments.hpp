#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sgdlab/io.hpp"
#include "sgdlab/stats.hpp"
#include "sgdlab/types.hpp"

namespace sgdlab {

struct ExperimentSpec {
  std::string name;
  std::map<std::string, double> params;
  std::uint64_t master_seed = 42;
  int threads = 0;

  double at(const std::string& key) const {
    auto it = params.find(key);
    if (it == params.end())
      throw ConfigError("experiment parameter missing: " + key);
    return it->second;
  }
  std::int64_t at_int(const std::string& key) const {
    return static_cast<std::int64_t>(std::llround(at(key)));
  }
};

struct ExperimentReport {
  ExperimentSpec spec;
  std::vector<TestResult> results;
  std::vector<ArtifactFile> artifacts;
  double wall_time_seconds = 0.0;

  bool all_passed() const {
    for (const auto& r : results)
      if (!r.passed) return false;
    return true;
  }
};

struct ParamSpec {
  double def = 0.0;
  double min = -std::numeric_limits<double>::infinity();
  double max = std::numeric_limits<double>::infinity();
};

struct ExperimentInfo {
  std::string name;
  std::string description;
  std::string anchor;  // theorem/example the experiment checks
  std::map<std::string, ParamSpec> schema;
  ExperimentReport (*run)(const ExperimentSpec&);
};

namespace detail {

// Per-experiment RNG namespace: disjoint streams derive from the name hash.
inline std::uint64_t experiment_seed(const ExperimentSpec& spec) {
  return hash64(spec.master_seed, fnv1a64(spec.name));
}

inline TestResult band_test(std::string description, double value, double center,
                            double half_width, std::int64_t n_samples) {
  // |value - center| <= half_width, reported as a one-sided statistic.
  return make_test_result(std::move(description), std::abs(value - center),
                          half_width, n_samples);
}

inline TestResult rel_error_test(std::string description, double value,
                                 double target, double rel_tol,
                                 std::int64_t n_samples) {
  const double denom = std::max(std::abs(target), 1e-300);
  return make_test_result(std::move(description), std::abs(value - target) / denom,
                          rel_tol, n_samples);
}

inline TestResult rel_frobenius_test(std::string description, const Mat& value,
                                     const Mat& target, double rel_tol,
                                     std::int64_t n_samples) {
  return make_test_result(std::move(description),
                          (value - target).norm() / target.norm(), rel_tol,
                          n_samples);
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

const std::vector<ExperimentInfo>& experiment_registry();

inline const ExperimentInfo& find_experiment(const std::string& name) {
  for (const auto& e : experiment_registry())
    if (e.name == name) return e;
  throw UsageError("unknown experiment: " + name);
}

// Resolve defaults + overrides into a runnable spec; unknown keys and values
// outside the schema domain are rejected.
inline ExperimentSpec resolve_spec(const std::string& name,
                                   const std::map<std::string, double>& overrides,
                                   std::uint64_t master_seed, int threads) {
  const ExperimentInfo& info = find_experiment(name);
  ExperimentSpec spec;
  spec.name = name;
  spec.master_seed = master_seed;
  spec.threads = threads;
  for (const auto& [key, ps] : info.schema) spec.params[key] = ps.def;
  for (const auto& [key, value] : overrides) {
    auto it = info.schema.find(key);
    if (it == info.schema.end())
      throw UsageError("unknown parameter '" + key + "' for " + name);
    if (value < it->second.min || value > it->second.max)
      throw UsageError("parameter '" + key + "' out of domain for " + name);
    spec.params[key] = value;
  }
  return spec;
}

inline ExperimentReport run_experiment(const ExperimentSpec& spec) {
  const ExperimentInfo& info = find_experiment(spec.name);
  detail::Stopwatch watch;
  ExperimentReport report = info.run(spec);
  report.wall_time_seconds = watch.seconds();
  return report;
}

}  // namespace sgdlab

#include "sgdlab/experiments/deterministic.hpp"
#include "sgdlab/experiments/figure1.hpp"
#include "sgdlab/experiments/fluctuations.hpp"
#include "sgdlab/experiments/stationary.hpp"

namespace sgdlab {

inline const std::vector<ExperimentInfo>& experiment_registry() {
  static const std::vector<ExperimentInfo> registry = [] {
    std::vector<ExperimentInfo> v = {
        experiments::info_oracle_vs_solver(),
        experiments::info_example1_plain(),
        experiments::info_example1_accelerated(),
        experiments::info_discrete_vs_continuum(),
        experiments::info_figure1(),
        experiments::info_sgd_weak_convergence(),
        experiments::info_stationary(),
        experiments::info_saddle_batchsize(),
    };
    std::sort(v.begin(), v.end(),
              [](const ExperimentInfo& a, const ExperimentInfo& b) {
                return a.name < b.name;
              });
    return v;
  }();
  return registry;
}

}  // namespace sgdlab

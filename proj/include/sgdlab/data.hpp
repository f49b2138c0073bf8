#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "sgdlab/objective.hpp"
#include "sgdlab/rng.hpp"
#include "sgdlab/types.hpp"

namespace sgdlab {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// An i.i.d. sample U_1..U_n from Q (one record per row). Regeneration from
// (model, n, seed) is bit-identical.
struct Dataset {
  RowMat records;
  std::uint64_t seed = 0;

  std::int64_t n() const { return records.rows(); }
  int datum_dim() const { return static_cast<int>(records.cols()); }
  DatumRef record(std::int64_t i) const { return records.row(i); }
};

inline Dataset generate_dataset(const ObjectiveModel& model, std::int64_t n,
                                std::uint64_t seed) {
  if (n < 1) throw DomainError("generate_dataset: need n >= 1");
  if (model.is_fixed_design() && n != model.design_n)
    throw DomainError("generate_dataset: fixed-design model requires n == design size");
  Dataset ds;
  ds.seed = seed;
  ds.records.resize(n, model.datum_dim);
  RngStream rng(seed);
  for (std::int64_t i = 0; i < n; ++i) {
    if (model.is_fixed_design())
      model.indexed_sampler(i, rng, ds.records.row(i));
    else
      model.datum_sampler(rng, ds.records.row(i));
  }
  return ds;
}

// grad L^n(theta) = (1/n) sum_i grad l(theta; U_i)
inline Vec empirical_grad(const ObjectiveModel& model, const Dataset& ds,
                          const Vec& theta) {
  if (ds.n() < 1) throw DomainError("empirical_grad: empty dataset");
  require_dim(theta, model.dim, "empirical_grad");
  Vec acc = Vec::Zero(model.dim);
  Vec g(model.dim);
  for (std::int64_t i = 0; i < ds.n(); ++i) {
    model.datum_grad(theta, ds.record(i), g);
    acc += g;
  }
  return acc / static_cast<double>(ds.n());
}

enum class BatchMode { population, bootstrap, without_replacement };

inline const char* to_string(BatchMode m) {
  switch (m) {
    case BatchMode::population: return "population";
    case BatchMode::bootstrap: return "bootstrap";
    default: return "without_replacement";
  }
}

// A mini-batch U*_1..U*_m. Subsample modes keep the source indices.
struct Batch {
  RowMat records;
  BatchMode mode = BatchMode::population;
  std::vector<std::int64_t> source_indices;

  std::int64_t m() const { return records.rows(); }
  DatumRef record(std::int64_t i) const { return records.row(i); }
};

inline Batch draw_minibatch(const ObjectiveModel& model, const Dataset* dataset,
                            std::int64_t m, BatchMode mode, RngStream& rng) {
  if (m < 1) throw SamplingError("draw_minibatch: need m >= 1");
  Batch b;
  b.mode = mode;
  if (mode == BatchMode::population) {
    b.records.resize(m, model.datum_dim);
    for (std::int64_t i = 0; i < m; ++i) model.datum_sampler(rng, b.records.row(i));
    return b;
  }
  if (dataset == nullptr)
    throw SamplingError("draw_minibatch: subsample mode requires a dataset");
  const std::int64_t n = dataset->n();
  b.records.resize(m, dataset->datum_dim());
  b.source_indices.resize(m);
  if (mode == BatchMode::bootstrap) {
    for (std::int64_t i = 0; i < m; ++i) {
      const std::int64_t j = static_cast<std::int64_t>(rng.uniform_below(n));
      b.source_indices[i] = j;
      b.records.row(i) = dataset->records.row(j);
    }
    return b;
  }
  if (m > n)
    throw SamplingError("draw_minibatch: without_replacement needs m <= n");
  // Partial Fisher-Yates with a sparse displacement map: O(m) expected.
  std::unordered_map<std::int64_t, std::int64_t> displaced;
  displaced.reserve(2 * m);
  auto slot = [&](std::int64_t k) {
    auto it = displaced.find(k);
    return it == displaced.end() ? k : it->second;
  };
  for (std::int64_t i = 0; i < m; ++i) {
    const std::int64_t j = i + static_cast<std::int64_t>(rng.uniform_below(n - i));
    const std::int64_t vi = slot(i);
    const std::int64_t vj = slot(j);
    displaced[j] = vi;
    b.source_indices[i] = vj;
    b.records.row(i) = dataset->records.row(vj);
  }
  return b;
}

// grad Lhat^m(theta) = (1/m) sum over the batch
inline Vec minibatch_grad(const ObjectiveModel& model, const Batch& batch,
                          const Vec& theta) {
  if (batch.m() < 1) throw DomainError("minibatch_grad: empty batch");
  require_dim(theta, model.dim, "minibatch_grad");
  Vec acc = Vec::Zero(model.dim);
  Vec g(model.dim);
  for (std::int64_t i = 0; i < batch.m(); ++i) {
    model.datum_grad(theta, batch.record(i), g);
    acc += g;
  }
  return acc / static_cast<double>(batch.m());
}

// In-place variant for hot loops: accumulates into `out` without allocating.
inline void minibatch_grad_into(const ObjectiveModel& model, const Batch& batch,
                                const Vec& theta, Vec& scratch, Vec& out) {
  out.setZero();
  for (std::int64_t i = 0; i < batch.m(); ++i) {
    model.datum_grad(theta, batch.record(i), scratch);
    out += scratch;
  }
  out /= static_cast<double>(batch.m());
}

}  // namespace sgdlab

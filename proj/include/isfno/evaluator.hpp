#pragma once

// Long-horizon rollouts, accumulated error curves, spatial autocorrelation
// and CSV export.

#include "isfno/model.hpp"
#include "isfno/spectral_solver.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace isfno {

struct Rollout {
  /// Predicted fields (N..., d_v) at t_1..t_J, cut at the first non-finite one.
  std::vector<Tensor> states;
  std::size_t requested = 0;
  bool diverged = false;
  /// Number of finite steps (equals states.size()).
  std::size_t finite_steps() const { return states.size(); }
};

/// Feeds the n-th component back after every block; step j is component
/// ((j - 1) mod n) + 1 of block ceil(j / n). phi0 is (N..., d_v).
Rollout rollout(const Model &model, const Tensor &phi0, std::size_t steps);
/// Same for a batch of initial fields, advanced together.
std::vector<Rollout> rollout_ensemble(const Model &model, const std::vector<Tensor> &phi0,
                                      std::size_t steps);

struct ErrorCurve {
  std::vector<double> values; // J(1), J(2), ...
  std::size_t ensemble = 0;
  std::size_t truncated_members = 0;
  std::string sampler;
};

/// A model-free predictor used for testing and oracles: given phi0 (N...)
/// returns predictions at t_1..t_J (each (N...)), possibly fewer.
using Predictor = std::function<std::vector<Tensor>(const Tensor &phi0, std::size_t steps)>;

/// J(j) = mean over the ensemble of C(prediction_j, reference_j) with the
/// reference from the spectral solver at interval dt. The curve stops at the
/// first step where any member's prediction or reference is unavailable.
ErrorCurve horizon_error(const Predictor &predict, const EquationConfig &cfg,
                         const std::vector<Tensor> &ensemble, double dt, std::size_t steps);
ErrorCurve horizon_error(const Model &model, const EquationConfig &cfg,
                         const std::vector<Tensor> &ensemble, double dt, std::size_t steps);

/// K(r) for r = 0..N1-1 (shift in grid points along the first axis).
/// members[m][t] is a field (N...) or (N..., 1). Each member contributes
/// sum_t C_t(r) / sum_t C_t(0); members are averaged.
std::vector<double> autocorrelation(const std::vector<std::vector<Tensor>> &members);

/// FNV-1a 64-bit hash of the compact JSON dump.
std::uint64_t config_hash(const nlohmann::json &cfg);
std::string hash_hex(std::uint64_t h);

/// Header "index,<metric>;config_hash=<hex>" then "index,value" rows.
void export_csv(const std::filesystem::path &path, const std::string &metric,
                const std::vector<double> &values, std::uint64_t hash,
                std::size_t first_index = 0);

struct CsvSeries {
  std::string metric;
  std::string hash;
  std::vector<std::size_t> index;
  std::vector<double> values;
};
CsvSeries read_csv(const std::filesystem::path &path);

} // namespace isfno

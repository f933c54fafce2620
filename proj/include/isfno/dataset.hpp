#pragma once

// Trajectory datasets: initial-condition samplers, generation through the
// reference solvers, the ISFN binary format, and 1-to-n pair extraction.

#include "isfno/spectral_solver.hpp"
#include "isfno/tensor.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace isfno {

enum class InitKind { Uniform, LowWave, Solitons };

std::string init_name(InitKind k);
InitKind parse_init(const std::string &name);

struct DatasetSpec {
  EquationConfig equation = EquationConfig::standard(Family::KS, {64}, 4.0);
  std::size_t sequences = 32;
  std::size_t snapshots = 101;
  double dt = 0.15;
  InitKind init = InitKind::Uniform;
  std::pair<double, double> uniform_range{0.0, 0.03};
  std::size_t band = 9;
  std::pair<double, double> amp_range{0.0, 0.01};
  std::pair<std::size_t, std::size_t> soliton_count{3, 8};
  std::pair<double, double> speed_range{0.4, 2.0};
  std::uint64_t seed = 0;
  double validation_fraction = 0.1;
  /// Solver snapshots taken before the first stored one (transient skip).
  std::size_t burn_in = 0;

  /// Throws ContractError / UnsupportedError on invalid combinations.
  void validate() const;
  std::size_t validation_count() const;
};

nlohmann::json to_json(const DatasetSpec &spec);
DatasetSpec dataset_spec_from_json(const nlohmann::json &j);
nlohmann::json to_json(const EquationConfig &cfg);
EquationConfig equation_from_json(const nlohmann::json &j);

struct Dataset {
  DatasetSpec spec;
  Tensor data; // (Z, S, N..., 1)

  std::size_t sequences() const { return data.dim(0); }
  std::size_t snapshots() const { return data.dim(1); }
  Shape field_shape() const; // (N..., 1)
  std::size_t field_size() const;
  const double *snapshot(std::size_t seq, std::size_t time) const;
  /// One stored field as a grid tensor (N...).
  Tensor field(std::size_t seq, std::size_t time) const;
};

/// Uniform random sample per grid point in [lo, hi).
Tensor init_uniform(const Shape &grid, double lo, double hi, std::uint64_t seed);

/// Random-phase spectrum with |kappa| <= band (integer mode index) and
/// amplitudes in amp_range, unnormalized like the forward transform. KP
/// output is constraint-projected.
Tensor init_lowwave(const Shape &grid, std::size_t band, std::pair<double, double> amp_range,
                    std::uint64_t seed, bool kp = false);

/// Sum of M periodized one-solitons; M, speeds and crests drawn uniformly.
Tensor init_solitons(const EquationConfig &cfg, std::pair<std::size_t, std::size_t> count,
                     std::pair<double, double> speed_range, std::uint64_t seed);

/// Initial field of sequence `index` under the spec's sampler.
Tensor sample_initial(const DatasetSpec &spec, std::size_t index);

/// First stored field of sequence `index`: the sampled field advanced over
/// the burn-in snapshots.
Tensor initial_state(const DatasetSpec &spec, std::size_t index);

/// Runs the solver for every sequence (in parallel). A diverging sequence
/// aborts generation with its index in the message.
Dataset generate(const DatasetSpec &spec);

void save(const Dataset &ds, const std::filesystem::path &path);
Dataset load(const std::filesystem::path &path);
/// JSON header of an ISFN file.
nlohmann::json read_header(const std::filesystem::path &path);
/// Generation spec stored in an ISFN header.
DatasetSpec read_dataset_spec(const std::filesystem::path &path);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};
/// The last ceil(fraction * Z) sequences are validation.
SplitIndices split(const Dataset &ds);

struct PairIndex {
  std::size_t seq;
  std::size_t start;
};
/// Stride-1 windows (v, G^1 v, ..., G^n v) inside each listed sequence.
std::vector<PairIndex> pairs(const Dataset &ds, std::size_t n, std::span<const std::size_t> seqs);
/// Inputs (B, N..., 1).
Tensor batch_inputs(const Dataset &ds, std::span<const PairIndex> batch);
/// Targets (B, n, N..., 1).
Tensor batch_targets(const Dataset &ds, std::span<const PairIndex> batch, std::size_t n);

/// Per-sequence RNG seed derived from a base seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);
/// Uniform double in [0, 1) from a 64-bit draw.
double unit_uniform(std::uint64_t bits);

} // namespace isfno

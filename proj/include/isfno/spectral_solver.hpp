#pragma once

// Pseudo-spectral reference solvers for MS, KS, KdV and KP on periodic grids.
//
// Time stepping is the integrating-factor (Lawson) form of the Dormand-Prince
// 5(4) pair: the linear part is propagated exactly by e^{L h}, the nonlinear
// part by the embedded Runge-Kutta stages. Fields are plain grid arrays
// (N) or (N1, N2) without batch or channel axes.

#include "isfno/fft.hpp"
#include "isfno/tensor.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace isfno {

enum class Family { MS, KS, KdV, KP };

std::string family_name(Family f);
/// Case-insensitive "ms", "ks", "kdv", "kp"; throws ContractError otherwise.
Family parse_family(const std::string &name);

struct EquationConfig {
  Family family = Family::KS;
  Shape grid;                  // N per axis, even
  std::vector<double> length;  // domain length per axis
  double beta = 10.0;          // MS / KS only
  bool dealias = true;         // 2/3 rule on the quadratic term
  /// Drop the mean (DC) component of the nonlinear term. Removes the
  /// unbounded drift of the spatial mean in MS/KS; no effect on KdV/KP.
  bool pin_mean = true;

  /// Default domain for the family: 2*pi per axis for MS/KS, 20 for KdV/KP.
  static EquationConfig standard(Family family, Shape grid, double beta = 10.0);

  std::size_t dim() const noexcept { return grid.size(); }
  double tau() const noexcept { return beta / 10.0; }
  /// Throws ContractError / UnsupportedError / StiffnessError for invalid or
  /// known under-resolved configurations.
  void validate() const;
};

struct SolverOptions {
  double rtol = 1e-8;
  double atol = 1e-10;
  /// Attempted substeps allowed per output interval.
  std::size_t max_substeps = 200000;
  /// Fixed number of equal substeps per output interval (no error control).
  std::optional<std::size_t> fixed_substeps;
};

struct SolverState {
  Tensor phi;        // real field on cfg.grid
  double t = 0.0;
  double dt = 0.1;   // output interval
  double h = 0.0;    // last accepted substep; 0 lets the controller pick
};

/// Signed physical wavenumber vector (per axis) of a mode index.
double wavenumber(long index, double length);

/// Linear growth rate of the mode with physical wavenumber kappa.
Complex linear_symbol(const EquationConfig &cfg, std::span<const double> kappa);

/// F^-1(|kappa| F(phi)) with physical wavenumbers for the given domain lengths
/// (defaults to 2*pi per axis).
Tensor gamma_op(const Tensor &field, std::vector<double> length = {});

/// Zeroes the kappa_1 = 0, kappa_2 != 0 modes of a 2d field.
Tensor kp_project(const Tensor &field);

/// Integrates `steps` output intervals of length state.dt.
SolverState advance(const EquationConfig &cfg, SolverState state, std::size_t steps,
                    const SolverOptions &options = {});

/// `snapshots` fields at t = 0, dt, ..., including the initial field.
std::vector<Tensor> solve_trajectory(const EquationConfig &cfg, const Tensor &phi0, double dt,
                                     std::size_t snapshots, const SolverOptions &options = {});

} // namespace isfno

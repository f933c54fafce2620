#pragma once

// Inverse scattering tools for 1d KdV, phi_t + 6 phi phi_x + phi_xxx = 0.
//
// Sign convention: the field enters the Schrodinger problem as the well
// -psi'' - phi psi = lambda psi. A soliton of speed s carries one bound state
// with wavenumber k = sqrt(s)/2 and eigenvalue lambda = -k^2 = -s/4.

#include "isfno/fft.hpp"
#include "isfno/tensor.hpp"

#include <cstddef>
#include <vector>

namespace isfno {

/// Uniform sample points x0 + i * length / n, i = 0..n-1.
struct LineGrid {
  double x0 = 0.0;
  double length = 20.0;
  std::size_t n = 256;

  double dx() const { return length / static_cast<double>(n); }
  double x(std::size_t i) const { return x0 + static_cast<double>(i) * dx(); }
};

/// (s/2) sech^2(sqrt(s)/2 (x - c - s t)), periodized over the grid length as
/// the sum of its translates by multiples of the length.
Tensor one_soliton(double s, double c, double t, const LineGrid &grid);

/// Eigenvalues below -edge of the periodic second-order finite-difference
/// discretization of -d^2/dx^2 - phi, ascending. On a periodic box several
/// separated wells split the continuum edge into states just below zero;
/// `edge` keeps those out.
std::vector<double> discrete_spectrum(const Tensor &phi, double length, double edge = 1e-4);

struct ScatteringData {
  std::vector<double> k;        // bound-state wavenumbers, lambda_j = -k_j^2
  std::vector<double> c_minus;  // norming constants entering the GLM kernel
  std::vector<double> c_plus;
  std::vector<double> k_cont;   // continuous-spectrum sample points
  std::vector<Complex> r_minus; // reflection coefficients on k_cont
  std::vector<Complex> r_plus;
  std::vector<Complex> transmission;
  double t = 0.0;

  std::size_t size() const noexcept { return k.size(); }
  bool reflectionless() const;
  /// Throws ContractError unless k_j > 0 are distinct and array sizes agree.
  void validate() const;
};

/// Scattering data of solitons with the given speeds whose crests sit at the
/// given positions at t = 0. Norming constants are calibrated so that the
/// one-soliton reconstruction has its crest at x0 = log(c^2 / 2k) / (2k).
ScatteringData soliton_scattering(const std::vector<double> &speeds,
                                  const std::vector<double> &crests);

/// Isospectral KdV evolution over dt.
ScatteringData evolve_scattering(const ScatteringData &data, double dt);

/// phi = 2 d/dx K(x, x) from the reflectionless GLM kernel
/// F(x) = sum_j c_j^2 exp(-k_j x), evaluated in closed form per grid point.
Tensor reflectionless_reconstruct(const ScatteringData &data, const LineGrid &grid);

} // namespace isfno

#pragma once

// Independent reference computations used by the tests: direct sums,
// finite differences and dense linear algebra, no FFTs or tapes.

#include "isfno/fft.hpp"
#include "isfno/tape.hpp"
#include "isfno/tensor.hpp"

#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using isfno::Shape;
using isfno::Tensor;
using Complex = std::complex<double>;

Tensor random_tensor(const Shape &shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0);

/// Direct DFT of a real grid field (N...) at integer mode (k1[, k2]),
/// sum_x f(x) exp(-2 pi i k.x / N), unnormalized.
Complex dft_mode(const Tensor &field, const std::vector<long> &k);

/// Direct evaluation of the truncated inverse: sum over kept modes with
/// Hermitian completion, divided by N. spec: (modes..., 2) for one channel.
Tensor direct_truncated_inverse(const Tensor &spec, const Shape &grid,
                                const isfno::ModeCutoff &cutoff);

/// Central-difference gradient of a scalar function at x.
Tensor fd_gradient(const std::function<double(const Tensor &)> &f, const Tensor &x,
                   double h = 1e-6);

/// Max over entries of |a - b| / max(|b|, floor).
double max_rel_error(const Tensor &a, const Tensor &b, double floor);

/// exp(A) of a dense complex matrix (row-major d*d) via Eigen's Pade-based
/// matrix function module.
std::vector<Complex> dense_expm(const std::vector<Complex> &a, std::size_t d);

/// K(r) = sum_t sum_x f_t(x) f_t(x + r) / sum_t sum_x f_t(x)^2 along axis 0 of
/// (N1[, N2]) fields by direct summation.
std::vector<double> direct_autocorrelation(const std::vector<Tensor> &states);

/// Relative L2 difference ||a - b|| / ||b||.
double rel_l2(const Tensor &a, const Tensor &b);

/// Reference for j applications of the linear exponential layer on a 1d
/// field z (N, d): modes below the cutoff are multiplied by exp(j R_k)
/// (dense matrix exponential), modes above pass through. r: (K, d, d, 2)
/// with a real kappa = 0 block.
Tensor exp_layer_reference(const Tensor &z, const Tensor &r, int j);

} // namespace oracle

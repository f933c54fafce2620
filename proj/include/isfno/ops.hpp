#pragma once

// Differentiable primitives. Every function records one node on the tape of
// its inputs (all inputs must share a tape) and returns its output handle.
//
// Layout conventions:
//   field     (B, N..., C)          real, channel last
//   spectrum  (B, modes..., C, 2)   kept half-space modes, (re, im) pairs
//   weights   (modes..., Cout, Cin, 2)
// where modes... is mode_extents(cutoff).

#include "isfno/fft.hpp"
#include "isfno/tape.hpp"

namespace isfno::ops {

// -- elementwise --------------------------------------------------------------
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var square(Var a);
Var sqrt(Var a);
Var gelu(Var a);
/// a * c elementwise with a constant tensor of the same shape.
Var mul_const(Var a, const Tensor &c);
/// a - c with a constant tensor of the same shape.
Var sub_const(Var a, const Tensor &c);

// -- reductions ---------------------------------------------------------------
Var sum(Var a);
Var mean(Var a);
/// (B, ...) -> (B): sum of squares over all non-batch axes.
Var sum_squares_per_sample(Var a);

// -- channel algebra ----------------------------------------------------------
/// x (..., Cin) * w (Cin, Cout) + b (Cout). Pass a default Var for no bias.
Var affine_channel(Var x, Var w, Var b);
/// Channels [begin, begin + count) of the last axis.
Var slice_channels(Var x, std::size_t begin, std::size_t count);
/// Concatenation along the last axis.
Var concat_channels(Var a, Var b);
/// n tensors of shape (B, rest...) -> (B, n, rest...).
Var stack_steps(std::span<const Var> steps);

// -- spectral -----------------------------------------------------------------
/// Unnormalized truncated forward transform of a field.
Var fft_forward(Var field, const ModeCutoff &cutoff);
/// Real reconstruction on `grid` (1/N included); absent modes are zero.
Var fft_inverse(Var spec, const Shape &grid, const ModeCutoff &cutoff);
/// Per-mode complex matrix-vector product over channels.
Var spectral_mix(Var spec, Var weights);
/// Per-mode complex matrix product of square blocks (modes..., d, d, 2).
Var mode_matmul(Var a, Var b);
/// w + c * I on every mode block.
Var add_identity(Var w, double c);
/// Per-mode matrix exponential by scaling and squaring with an order-8 Taylor
/// series, composed from tape primitives.
Var matrix_exp(Var w);
/// Replaces the kappa_d = 0 plane by its Hermitian-consistent part:
/// W(k1, 0) <- (W(k1, 0) + conj W(-k1, 0)) / 2. Weights are then compatible
/// with real fields on every kept mode.
Var hermitize_weights(Var w, const ModeCutoff &cutoff);
/// r (d, d, 2) and scalar exponent p -> (K, d, d, 2) with block k equal to
/// r * (k / K)^p; block 0 is zero.
Var power_mode_weights(Var r, Var p, std::size_t k_max);

/// Number of squarings matrix_exp uses for the given weights.
int matrix_exp_squarings(const Tensor &w);

} // namespace isfno::ops

#pragma once

// Data-parallel inner loops behind the differentiable primitives.
//
// Every kernel exists twice with identical signatures: `serial::` is the plain
// reference kept for testing and benchmarking, `parallel::` is the OpenMP
// version the engine dispatches to. Parallel loops only split over outputs, so
// results do not depend on the thread count.
//
// Complex data is stored as interleaved (re, im) pairs. "Accumulate" kernels
// add into their output instead of overwriting it.

#include <cstddef>
#include <span>

namespace isfno::kernels {

/// y[p, o] = sum_i x[p, i] * w[i, o] + b[o]    (b may be empty)
struct AffineDims {
  std::size_t points;
  std::size_t in;
  std::size_t out;
};

/// Y[b, m, o] = sum_i W[m, o, i] * X[b, m, i]  (complex)
struct MixDims {
  std::size_t batch;
  std::size_t modes;
  std::size_t in;
  std::size_t out;
};

/// C[m] = op(A[m]) * op(B[m]) for square complex blocks of size d.
struct ModeMatmulDims {
  std::size_t modes;
  std::size_t d;
};

enum class MatOp { None, Adjoint };

#define ISFNO_KERNEL_DECLS                                                                       \
  void affine_forward(AffineDims dims, std::span<const double> x, std::span<const double> w,    \
                      std::span<const double> b, std::span<double> y);                           \
  void affine_grad_input(AffineDims dims, std::span<const double> gy, std::span<const double> w, \
                         std::span<double> gx);                                                  \
  void affine_grad_weight(AffineDims dims, std::span<const double> x,                            \
                          std::span<const double> gy, std::span<double> gw,                      \
                          std::span<double> gb);                                                 \
  void gelu_forward(std::span<const double> x, std::span<double> y);                             \
  void gelu_grad(std::span<const double> x, std::span<const double> gy, std::span<double> gx);   \
  void mix_forward(MixDims dims, std::span<const double> x, std::span<const double> w,           \
                   std::span<double> y);                                                         \
  void mix_grad_input(MixDims dims, std::span<const double> gy, std::span<const double> w,       \
                      std::span<double> gx);                                                     \
  void mix_grad_weight(MixDims dims, std::span<const double> x, std::span<const double> gy,      \
                       std::span<double> gw);                                                    \
  void mode_matmul(ModeMatmulDims dims, std::span<const double> a, MatOp op_a,                   \
                   std::span<const double> b, MatOp op_b, std::span<double> c, bool accumulate);

namespace serial {
ISFNO_KERNEL_DECLS
} // namespace serial

namespace parallel {
ISFNO_KERNEL_DECLS
} // namespace parallel

#undef ISFNO_KERNEL_DECLS

/// Exact GELU, x * Phi(x).
double gelu(double x);
double gelu_derivative(double x);

} // namespace isfno::kernels

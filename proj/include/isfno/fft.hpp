#pragma once

// FFTW-backed real transforms on periodic grids in one or two dimensions.
//
// Convention: unnormalized forward transform X_k = sum_n x_n e^{-i k.theta_n},
// inverse carries the 1/N factor. The half spectrum keeps the last axis in
// [0, N_d/2]; leading axes are stored in FFT wrap-around order.

#include "isfno/tensor.hpp"

#include <complex>
#include <cstddef>
#include <memory>
#include <vector>

namespace isfno {

using Complex = std::complex<double>;

/// Cutoff extents per spatial axis. Kept modes: kappa_d in [0, K_d) on the last
/// axis and kappa_m in (-K_m, K_m) on leading axes.
using ModeCutoff = std::vector<std::size_t>;

/// Shape of the kept-mode block, e.g. {K} in 1d and {2K1-1, K2} in 2d.
Shape mode_extents(const ModeCutoff &cutoff);
std::size_t mode_count(const ModeCutoff &cutoff);

/// Signed wavenumber index of row `i` on a leading axis with cutoff K.
inline long leading_mode_index(std::size_t i, std::size_t k_max) {
  return i < k_max ? static_cast<long>(i) : static_cast<long>(i) - static_cast<long>(2 * k_max - 1);
}

/// Throws CutoffTooLargeError unless every extent is >= 2 * cutoff.
void check_cutoff(const Shape &grid, const ModeCutoff &cutoff);

/// Full-spectrum r2c/c2r plan pair for one grid. Thread-safe to execute.
class SpectralPlan {
public:
  explicit SpectralPlan(Shape grid);
  ~SpectralPlan();
  SpectralPlan(const SpectralPlan &) = delete;
  SpectralPlan &operator=(const SpectralPlan &) = delete;

  const Shape &grid() const noexcept { return grid_; }
  std::size_t real_size() const noexcept { return real_size_; }
  std::size_t half_size() const noexcept { return half_size_; }
  /// Extent of the half-complex last axis, N_d/2 + 1.
  std::size_t half_last() const noexcept { return grid_.back() / 2 + 1; }

  void r2c(const double *in, Complex *out) const;
  /// Unnormalized inverse. `in` must be Hermitian on the k_d = 0 and Nyquist
  /// planes; it is used as scratch.
  void c2r(Complex *in, double *out) const;

  /// Cached plan shared by all callers with the same grid.
  static std::shared_ptr<const SpectralPlan> get(const Shape &grid);

private:
  Shape grid_;
  std::size_t real_size_;
  std::size_t half_size_;
  void *r2c_plan_ = nullptr;
  void *c2r_plan_ = nullptr;
};

/// Truncated forward transform of a channel-last batch.
/// x: (B, N..., C) -> (B, modes..., C, 2), unnormalized.
Tensor truncated_rfft(const Tensor &x, const ModeCutoff &cutoff);

/// Real reconstruction from kept modes.
/// X: (B, modes..., C, 2) -> (B, N..., C), including the 1/N factor. The
/// kappa_d = 0 plane contributes only its Hermitian part, so the result equals
/// Re(sum_k w_k X_k e^{+i k.theta}) / N with w = 1 on that plane, 2 elsewhere.
Tensor truncated_irfft(const Tensor &spec, const Shape &grid, const ModeCutoff &cutoff);

/// Adjoints of the two maps above with respect to the Euclidean inner product
/// on the real storage.
Tensor truncated_rfft_adjoint(const Tensor &grad_spec, const Shape &grid,
                              const ModeCutoff &cutoff);
Tensor truncated_irfft_adjoint(const Tensor &grad_field, const ModeCutoff &cutoff);

} // namespace isfno

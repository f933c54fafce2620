#include "isfno/fft.hpp"

#include "isfno/errors.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>

namespace isfno {

namespace {

std::mutex &planner_mutex() {
  static std::mutex m;
  return m;
}

std::size_t spatial_rank_of(const ModeCutoff &cutoff) {
  if (cutoff.empty() || cutoff.size() > 2)
    throw ShapeError("mode cutoff must have 1 or 2 axes");
  return cutoff.size();
}

// Offsets (in complex elements) of every kept mode inside the half spectrum,
// in kept-mode storage order.
std::vector<std::size_t> kept_offsets(const Shape &grid, const ModeCutoff &cutoff) {
  std::vector<std::size_t> out;
  if (grid.size() == 1) {
    for (std::size_t k = 0; k < cutoff[0]; ++k)
      out.push_back(k);
  } else {
    const std::size_t n1 = grid[0];
    const std::size_t half = grid[1] / 2 + 1;
    for (std::size_t i = 0; i < 2 * cutoff[0] - 1; ++i) {
      const long k1 = leading_mode_index(i, cutoff[0]);
      const std::size_t row = static_cast<std::size_t>((k1 + static_cast<long>(n1)) %
                                                       static_cast<long>(n1));
      for (std::size_t k2 = 0; k2 < cutoff[1]; ++k2)
        out.push_back(row * half + k2);
    }
  }
  return out;
}

// Replace the k_d = 0 plane by its Hermitian part so c2r sees consistent input.
void hermitize_zero_plane(const Shape &grid, Complex *half) {
  if (grid.size() == 1) {
    half[0] = Complex(half[0].real(), 0.0);
    return;
  }
  const std::size_t n1 = grid[0];
  const std::size_t stride = grid[1] / 2 + 1;
  half[0] = Complex(half[0].real(), 0.0);
  for (std::size_t k1 = 1; k1 < n1; ++k1) {
    const std::size_t m1 = n1 - k1;
    if (m1 < k1)
      break;
    if (m1 == k1) {
      half[k1 * stride] = Complex(half[k1 * stride].real(), 0.0);
      break;
    }
    const Complex h = 0.5 * (half[k1 * stride] + std::conj(half[m1 * stride]));
    half[k1 * stride] = h;
    half[m1 * stride] = std::conj(h);
  }
}

struct SliceLayout {
  std::size_t batch;
  std::size_t points;
  std::size_t channels;
};

SliceLayout field_layout(const Shape &shape, std::size_t spatial_rank) {
  if (shape.size() != spatial_rank + 2)
    throw ShapeError("field tensor " + shape_string(shape) + " must be (B, N..., C) with " +
                     std::to_string(spatial_rank) + " spatial axes");
  std::size_t points = 1;
  for (std::size_t a = 1; a <= spatial_rank; ++a)
    points *= shape[a];
  return {shape[0], points, shape.back()};
}

Shape grid_of(const Shape &field_shape) {
  return Shape(field_shape.begin() + 1, field_shape.end() - 1);
}

// Forward transform of every (b, c) slice, keeping the modes listed in
// `offsets`, each scaled by `scale[j]`.
Tensor forward_kept(const Tensor &x, const ModeCutoff &cutoff,
                    const std::vector<double> *plane_scale) {
  const std::size_t rank = spatial_rank_of(cutoff);
  const SliceLayout lay = field_layout(x.shape(), rank);
  const Shape grid = grid_of(x.shape());
  check_cutoff(grid, cutoff);
  auto plan = SpectralPlan::get(grid);
  const auto offsets = kept_offsets(grid, cutoff);
  const std::size_t kept = offsets.size();

  Shape out_shape{lay.batch};
  for (auto e : mode_extents(cutoff))
    out_shape.push_back(e);
  out_shape.push_back(lay.channels);
  out_shape.push_back(2);
  Tensor out(out_shape);

  const auto slices = static_cast<std::ptrdiff_t>(lay.batch * lay.channels);
  const double *src = x.data();
  double *dst = out.data();
#pragma omp parallel
  {
    std::vector<double> buf(lay.points);
    std::vector<Complex> spec(plan->half_size());
#pragma omp for schedule(static)
    for (std::ptrdiff_t s = 0; s < slices; ++s) {
      const std::size_t b = static_cast<std::size_t>(s) / lay.channels;
      const std::size_t c = static_cast<std::size_t>(s) % lay.channels;
      const double *base = src + b * lay.points * lay.channels + c;
      for (std::size_t p = 0; p < lay.points; ++p)
        buf[p] = base[p * lay.channels];
      plan->r2c(buf.data(), spec.data());
      double *obase = dst + 2 * (b * kept * lay.channels + c);
      for (std::size_t j = 0; j < kept; ++j) {
        const double f = plane_scale ? (*plane_scale)[j] : 1.0;
        obase[2 * j * lay.channels] = f * spec[offsets[j]].real();
        obase[2 * j * lay.channels + 1] = f * spec[offsets[j]].imag();
      }
    }
  }
  return out;
}

// Inverse from kept modes scaled per mode by `pre_scale`, then by `post`.
Tensor inverse_kept(const Tensor &spec_in, const Shape &grid, const ModeCutoff &cutoff,
                    const std::vector<double> *pre_scale, double post) {
  const std::size_t rank = spatial_rank_of(cutoff);
  if (grid.size() != rank)
    throw ShapeError("grid rank does not match cutoff rank");
  check_cutoff(grid, cutoff);
  const Shape modes = mode_extents(cutoff);
  const Shape &ss = spec_in.shape();
  if (ss.size() != rank + 3 || ss.back() != 2)
    throw ShapeError("spectrum tensor " + shape_string(ss) + " must be (B, modes..., C, 2)");
  for (std::size_t a = 0; a < rank; ++a)
    if (ss[1 + a] != modes[a])
      throw ShapeError("spectrum mode extents " + shape_string(ss) +
                       " do not match cutoff extents " + shape_string(modes));
  const std::size_t batch = ss[0];
  const std::size_t channels = ss[rank + 1];
  auto plan = SpectralPlan::get(grid);
  const auto offsets = kept_offsets(grid, cutoff);
  const std::size_t kept = offsets.size();
  const std::size_t points = plan->real_size();

  Shape out_shape{batch};
  for (auto e : grid)
    out_shape.push_back(e);
  out_shape.push_back(channels);
  Tensor out(out_shape);

  const auto slices = static_cast<std::ptrdiff_t>(batch * channels);
  const double *src = spec_in.data();
  double *dst = out.data();
#pragma omp parallel
  {
    std::vector<double> buf(points);
    std::vector<Complex> half(plan->half_size());
#pragma omp for schedule(static)
    for (std::ptrdiff_t s = 0; s < slices; ++s) {
      const std::size_t b = static_cast<std::size_t>(s) / channels;
      const std::size_t c = static_cast<std::size_t>(s) % channels;
      std::fill(half.begin(), half.end(), Complex(0.0, 0.0));
      const double *ibase = src + 2 * (b * kept * channels + c);
      for (std::size_t j = 0; j < kept; ++j) {
        const double f = pre_scale ? (*pre_scale)[j] : 1.0;
        half[offsets[j]] = Complex(f * ibase[2 * j * channels], f * ibase[2 * j * channels + 1]);
      }
      hermitize_zero_plane(grid, half.data());
      plan->c2r(half.data(), buf.data());
      double *obase = dst + b * points * channels + c;
      for (std::size_t p = 0; p < points; ++p)
        obase[p * channels] = post * buf[p];
    }
  }
  return out;
}

// Weight w_k of each kept mode: 1 on the k_d = 0 plane, 2 elsewhere.
std::vector<double> plane_weights(const ModeCutoff &cutoff) {
  std::vector<double> w;
  if (cutoff.size() == 1) {
    for (std::size_t k = 0; k < cutoff[0]; ++k)
      w.push_back(k == 0 ? 1.0 : 2.0);
  } else {
    for (std::size_t i = 0; i < 2 * cutoff[0] - 1; ++i)
      for (std::size_t k2 = 0; k2 < cutoff[1]; ++k2)
        w.push_back(k2 == 0 ? 1.0 : 2.0);
  }
  return w;
}

} // namespace

Shape mode_extents(const ModeCutoff &cutoff) {
  if (cutoff.size() == 1)
    return {cutoff[0]};
  if (cutoff.size() == 2)
    return {2 * cutoff[0] - 1, cutoff[1]};
  throw ShapeError("mode cutoff must have 1 or 2 axes");
}

std::size_t mode_count(const ModeCutoff &cutoff) { return shape_size(mode_extents(cutoff)); }

void check_cutoff(const Shape &grid, const ModeCutoff &cutoff) {
  if (grid.size() != cutoff.size())
    throw ShapeError("grid " + shape_string(grid) + " and cutoff " + shape_string(cutoff) +
                     " have different rank");
  for (std::size_t a = 0; a < grid.size(); ++a) {
    if (cutoff[a] == 0)
      throw ShapeError("mode cutoff must be >= 1 on every axis");
    if (grid[a] < 2 * cutoff[a])
      throw CutoffTooLargeError("grid extent " + std::to_string(grid[a]) + " on axis " +
                                std::to_string(a) + " is smaller than 2 * cutoff " +
                                std::to_string(cutoff[a]));
  }
}

SpectralPlan::SpectralPlan(Shape grid) : grid_(std::move(grid)) {
  if (grid_.empty() || grid_.size() > 2)
    throw ShapeError("spectral plans support 1d and 2d grids");
  for (auto e : grid_)
    if (e < 2 || e % 2 != 0)
      throw ShapeError("grid extents must be even and >= 2, got " + shape_string(grid_));
  real_size_ = shape_size(grid_);
  half_size_ = real_size_ / grid_.back() * half_last();

  std::vector<double> rbuf(real_size_);
  std::vector<Complex> cbuf(half_size_);
  auto *cptr = reinterpret_cast<fftw_complex *>(cbuf.data());
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  std::lock_guard lock(planner_mutex());
  if (grid_.size() == 1) {
    const int n = static_cast<int>(grid_[0]);
    r2c_plan_ = fftw_plan_dft_r2c_1d(n, rbuf.data(), cptr, flags);
    c2r_plan_ = fftw_plan_dft_c2r_1d(n, cptr, rbuf.data(), flags);
  } else {
    const int n0 = static_cast<int>(grid_[0]);
    const int n1 = static_cast<int>(grid_[1]);
    r2c_plan_ = fftw_plan_dft_r2c_2d(n0, n1, rbuf.data(), cptr, flags);
    c2r_plan_ = fftw_plan_dft_c2r_2d(n0, n1, cptr, rbuf.data(), flags);
  }
  if (!r2c_plan_ || !c2r_plan_)
    throw NumericalError("FFTW failed to create a plan for grid " + shape_string(grid_));
}

SpectralPlan::~SpectralPlan() {
  std::lock_guard lock(planner_mutex());
  if (r2c_plan_)
    fftw_destroy_plan(static_cast<fftw_plan>(r2c_plan_));
  if (c2r_plan_)
    fftw_destroy_plan(static_cast<fftw_plan>(c2r_plan_));
}

void SpectralPlan::r2c(const double *in, Complex *out) const {
  fftw_execute_dft_r2c(static_cast<fftw_plan>(r2c_plan_), const_cast<double *>(in),
                       reinterpret_cast<fftw_complex *>(out));
}

void SpectralPlan::c2r(Complex *in, double *out) const {
  fftw_execute_dft_c2r(static_cast<fftw_plan>(c2r_plan_), reinterpret_cast<fftw_complex *>(in),
                       out);
}

std::shared_ptr<const SpectralPlan> SpectralPlan::get(const Shape &grid) {
  static std::mutex cache_mutex;
  static std::map<Shape, std::shared_ptr<const SpectralPlan>> cache;
  std::lock_guard lock(cache_mutex);
  auto it = cache.find(grid);
  if (it != cache.end())
    return it->second;
  auto plan = std::make_shared<const SpectralPlan>(grid);
  cache.emplace(grid, plan);
  return plan;
}

Tensor truncated_rfft(const Tensor &x, const ModeCutoff &cutoff) {
  return forward_kept(x, cutoff, nullptr);
}

Tensor truncated_irfft(const Tensor &spec, const Shape &grid, const ModeCutoff &cutoff) {
  return inverse_kept(spec, grid, cutoff, nullptr, 1.0 / static_cast<double>(shape_size(grid)));
}

Tensor truncated_rfft_adjoint(const Tensor &grad_spec, const Shape &grid,
                              const ModeCutoff &cutoff) {
  // x_bar = Re sum_k G_k e^{+ik.theta} = N * irfft(G / w)
  std::vector<double> inv_w = plane_weights(cutoff);
  for (auto &v : inv_w)
    v = 1.0 / v;
  return inverse_kept(grad_spec, grid, cutoff, &inv_w, 1.0);
}

Tensor truncated_irfft_adjoint(const Tensor &grad_field, const ModeCutoff &cutoff) {
  // X_bar = (w / N) * rfft(x_bar)
  const Shape grid = grid_of(grad_field.shape());
  std::vector<double> w = plane_weights(cutoff);
  const double inv_n = 1.0 / static_cast<double>(shape_size(grid));
  for (auto &v : w)
    v *= inv_n;
  return forward_kept(grad_field, cutoff, &w);
}

} // namespace isfno

#include "isfno/kernels.hpp"

#include <cmath>
#include <numbers>

namespace isfno::kernels {

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

namespace {

// (re, im) of a[i] for a complex interleaved array.
inline double re(std::span<const double> a, std::size_t i) { return a[2 * i]; }
inline double im(std::span<const double> a, std::size_t i) { return a[2 * i + 1]; }

// Element (r, c) of block m under op, as (re, im).
inline void block_entry(std::span<const double> a, std::size_t m, std::size_t d, std::size_t r,
                        std::size_t c, MatOp op, double &out_re, double &out_im) {
  if (op == MatOp::None) {
    const std::size_t k = (m * d + r) * d + c;
    out_re = re(a, k);
    out_im = im(a, k);
  } else {
    const std::size_t k = (m * d + c) * d + r;
    out_re = re(a, k);
    out_im = -im(a, k);
  }
}

} // namespace

// ---------------------------------------------------------------------------
// serial reference
// ---------------------------------------------------------------------------
namespace serial {

void affine_forward(AffineDims dims, std::span<const double> x, std::span<const double> w,
                    std::span<const double> b, std::span<double> y) {
  for (std::size_t p = 0; p < dims.points; ++p)
    for (std::size_t o = 0; o < dims.out; ++o) {
      double s = b.empty() ? 0.0 : b[o];
      for (std::size_t i = 0; i < dims.in; ++i)
        s += x[p * dims.in + i] * w[i * dims.out + o];
      y[p * dims.out + o] = s;
    }
}

void affine_grad_input(AffineDims dims, std::span<const double> gy, std::span<const double> w,
                       std::span<double> gx) {
  for (std::size_t p = 0; p < dims.points; ++p)
    for (std::size_t i = 0; i < dims.in; ++i) {
      double s = 0.0;
      for (std::size_t o = 0; o < dims.out; ++o)
        s += gy[p * dims.out + o] * w[i * dims.out + o];
      gx[p * dims.in + i] += s;
    }
}

void affine_grad_weight(AffineDims dims, std::span<const double> x, std::span<const double> gy,
                        std::span<double> gw, std::span<double> gb) {
  for (std::size_t i = 0; i < dims.in; ++i)
    for (std::size_t o = 0; o < dims.out; ++o) {
      double s = 0.0;
      for (std::size_t p = 0; p < dims.points; ++p)
        s += x[p * dims.in + i] * gy[p * dims.out + o];
      gw[i * dims.out + o] += s;
    }
  if (!gb.empty())
    for (std::size_t o = 0; o < dims.out; ++o) {
      double s = 0.0;
      for (std::size_t p = 0; p < dims.points; ++p)
        s += gy[p * dims.out + o];
      gb[o] += s;
    }
}

void gelu_forward(std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] = gelu(x[i]);
}

void gelu_grad(std::span<const double> x, std::span<const double> gy, std::span<double> gx) {
  for (std::size_t i = 0; i < x.size(); ++i)
    gx[i] += gy[i] * gelu_derivative(x[i]);
}

void mix_forward(MixDims dims, std::span<const double> x, std::span<const double> w,
                 std::span<double> y) {
  for (std::size_t b = 0; b < dims.batch; ++b)
    for (std::size_t m = 0; m < dims.modes; ++m)
      for (std::size_t o = 0; o < dims.out; ++o) {
        double sr = 0.0, si = 0.0;
        for (std::size_t i = 0; i < dims.in; ++i) {
          const std::size_t wi = (m * dims.out + o) * dims.in + i;
          const std::size_t xi = (b * dims.modes + m) * dims.in + i;
          sr += re(w, wi) * re(x, xi) - im(w, wi) * im(x, xi);
          si += re(w, wi) * im(x, xi) + im(w, wi) * re(x, xi);
        }
        const std::size_t yi = (b * dims.modes + m) * dims.out + o;
        y[2 * yi] = sr;
        y[2 * yi + 1] = si;
      }
}

void mix_grad_input(MixDims dims, std::span<const double> gy, std::span<const double> w,
                    std::span<double> gx) {
  // gx = W^H gy per mode
  for (std::size_t b = 0; b < dims.batch; ++b)
    for (std::size_t m = 0; m < dims.modes; ++m)
      for (std::size_t i = 0; i < dims.in; ++i) {
        double sr = 0.0, si = 0.0;
        for (std::size_t o = 0; o < dims.out; ++o) {
          const std::size_t wi = (m * dims.out + o) * dims.in + i;
          const std::size_t yi = (b * dims.modes + m) * dims.out + o;
          sr += re(w, wi) * re(gy, yi) + im(w, wi) * im(gy, yi);
          si += re(w, wi) * im(gy, yi) - im(w, wi) * re(gy, yi);
        }
        const std::size_t xi = (b * dims.modes + m) * dims.in + i;
        gx[2 * xi] += sr;
        gx[2 * xi + 1] += si;
      }
}

void mix_grad_weight(MixDims dims, std::span<const double> x, std::span<const double> gy,
                     std::span<double> gw) {
  // gw[m, o, i] = sum_b gy[b, m, o] * conj(x[b, m, i])
  for (std::size_t m = 0; m < dims.modes; ++m)
    for (std::size_t o = 0; o < dims.out; ++o)
      for (std::size_t i = 0; i < dims.in; ++i) {
        double sr = 0.0, si = 0.0;
        for (std::size_t b = 0; b < dims.batch; ++b) {
          const std::size_t yi = (b * dims.modes + m) * dims.out + o;
          const std::size_t xi = (b * dims.modes + m) * dims.in + i;
          sr += re(gy, yi) * re(x, xi) + im(gy, yi) * im(x, xi);
          si += im(gy, yi) * re(x, xi) - re(gy, yi) * im(x, xi);
        }
        const std::size_t wi = (m * dims.out + o) * dims.in + i;
        gw[2 * wi] += sr;
        gw[2 * wi + 1] += si;
      }
}

void mode_matmul(ModeMatmulDims dims, std::span<const double> a, MatOp op_a,
                 std::span<const double> b, MatOp op_b, std::span<double> c, bool accumulate) {
  const std::size_t d = dims.d;
  for (std::size_t m = 0; m < dims.modes; ++m)
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t col = 0; col < d; ++col) {
        double sr = 0.0, si = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          double ar, ai, br, bi;
          block_entry(a, m, d, r, k, op_a, ar, ai);
          block_entry(b, m, d, k, col, op_b, br, bi);
          sr += ar * br - ai * bi;
          si += ar * bi + ai * br;
        }
        const std::size_t ci = (m * d + r) * d + col;
        if (accumulate) {
          c[2 * ci] += sr;
          c[2 * ci + 1] += si;
        } else {
          c[2 * ci] = sr;
          c[2 * ci + 1] = si;
        }
      }
}

} // namespace serial

// ---------------------------------------------------------------------------
// OpenMP
// ---------------------------------------------------------------------------
namespace parallel {

void affine_forward(AffineDims dims, std::span<const double> x, std::span<const double> w,
                    std::span<const double> b, std::span<double> y) {
  const auto points = static_cast<std::ptrdiff_t>(dims.points);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < points; ++p) {
    double *yrow = y.data() + p * dims.out;
    const double *xrow = x.data() + p * dims.in;
    for (std::size_t o = 0; o < dims.out; ++o)
      yrow[o] = b.empty() ? 0.0 : b[o];
    for (std::size_t i = 0; i < dims.in; ++i) {
      const double xv = xrow[i];
      const double *wrow = w.data() + i * dims.out;
      for (std::size_t o = 0; o < dims.out; ++o)
        yrow[o] += xv * wrow[o];
    }
  }
}

void affine_grad_input(AffineDims dims, std::span<const double> gy, std::span<const double> w,
                       std::span<double> gx) {
  const auto points = static_cast<std::ptrdiff_t>(dims.points);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < points; ++p) {
    const double *grow = gy.data() + p * dims.out;
    double *xrow = gx.data() + p * dims.in;
    for (std::size_t i = 0; i < dims.in; ++i) {
      const double *wrow = w.data() + i * dims.out;
      double s = 0.0;
      for (std::size_t o = 0; o < dims.out; ++o)
        s += grow[o] * wrow[o];
      xrow[i] += s;
    }
  }
}

void affine_grad_weight(AffineDims dims, std::span<const double> x, std::span<const double> gy,
                        std::span<double> gw, std::span<double> gb) {
  const auto rows = static_cast<std::ptrdiff_t>(dims.in);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    double *gwrow = gw.data() + i * dims.out;
    for (std::size_t p = 0; p < dims.points; ++p) {
      const double xv = x[p * dims.in + i];
      const double *grow = gy.data() + p * dims.out;
      for (std::size_t o = 0; o < dims.out; ++o)
        gwrow[o] += xv * grow[o];
    }
  }
  if (!gb.empty())
    for (std::size_t p = 0; p < dims.points; ++p)
      for (std::size_t o = 0; o < dims.out; ++o)
        gb[o] += gy[p * dims.out + o];
}

void gelu_forward(std::span<const double> x, std::span<double> y) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    y[i] = gelu(x[i]);
}

void gelu_grad(std::span<const double> x, std::span<const double> gy, std::span<double> gx) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    gx[i] += gy[i] * gelu_derivative(x[i]);
}

void mix_forward(MixDims dims, std::span<const double> x, std::span<const double> w,
                 std::span<double> y) {
  const auto rows = static_cast<std::ptrdiff_t>(dims.batch * dims.modes);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t bm = 0; bm < rows; ++bm) {
    const std::size_t m = static_cast<std::size_t>(bm) % dims.modes;
    const double *xv = x.data() + 2 * bm * dims.in;
    double *yv = y.data() + 2 * bm * dims.out;
    for (std::size_t o = 0; o < dims.out; ++o) {
      const double *wv = w.data() + 2 * (m * dims.out + o) * dims.in;
      double sr = 0.0, si = 0.0;
      for (std::size_t i = 0; i < dims.in; ++i) {
        sr += wv[2 * i] * xv[2 * i] - wv[2 * i + 1] * xv[2 * i + 1];
        si += wv[2 * i] * xv[2 * i + 1] + wv[2 * i + 1] * xv[2 * i];
      }
      yv[2 * o] = sr;
      yv[2 * o + 1] = si;
    }
  }
}

void mix_grad_input(MixDims dims, std::span<const double> gy, std::span<const double> w,
                    std::span<double> gx) {
  const auto rows = static_cast<std::ptrdiff_t>(dims.batch * dims.modes);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t bm = 0; bm < rows; ++bm) {
    const std::size_t m = static_cast<std::size_t>(bm) % dims.modes;
    const double *gv = gy.data() + 2 * bm * dims.out;
    double *xv = gx.data() + 2 * bm * dims.in;
    for (std::size_t i = 0; i < dims.in; ++i) {
      double sr = 0.0, si = 0.0;
      for (std::size_t o = 0; o < dims.out; ++o) {
        const double *wv = w.data() + 2 * ((m * dims.out + o) * dims.in + i);
        sr += wv[0] * gv[2 * o] + wv[1] * gv[2 * o + 1];
        si += wv[0] * gv[2 * o + 1] - wv[1] * gv[2 * o];
      }
      xv[2 * i] += sr;
      xv[2 * i + 1] += si;
    }
  }
}

void mix_grad_weight(MixDims dims, std::span<const double> x, std::span<const double> gy,
                     std::span<double> gw) {
  const auto modes = static_cast<std::ptrdiff_t>(dims.modes);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t m = 0; m < modes; ++m) {
    double *gwm = gw.data() + 2 * m * dims.out * dims.in;
    for (std::size_t o = 0; o < dims.out; ++o)
      for (std::size_t i = 0; i < dims.in; ++i) {
        double sr = 0.0, si = 0.0;
        for (std::size_t b = 0; b < dims.batch; ++b) {
          const double *gv = gy.data() + 2 * ((b * dims.modes + m) * dims.out + o);
          const double *xv = x.data() + 2 * ((b * dims.modes + m) * dims.in + i);
          sr += gv[0] * xv[0] + gv[1] * xv[1];
          si += gv[1] * xv[0] - gv[0] * xv[1];
        }
        gwm[2 * (o * dims.in + i)] += sr;
        gwm[2 * (o * dims.in + i) + 1] += si;
      }
  }
}

void mode_matmul(ModeMatmulDims dims, std::span<const double> a, MatOp op_a,
                 std::span<const double> b, MatOp op_b, std::span<double> c, bool accumulate) {
  const std::size_t d = dims.d;
  const auto modes = static_cast<std::ptrdiff_t>(dims.modes);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t m = 0; m < modes; ++m)
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t col = 0; col < d; ++col) {
        double sr = 0.0, si = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          double ar, ai, br, bi;
          block_entry(a, m, d, r, k, op_a, ar, ai);
          block_entry(b, m, d, k, col, op_b, br, bi);
          sr += ar * br - ai * bi;
          si += ar * bi + ai * br;
        }
        const std::size_t ci = (m * d + r) * d + col;
        if (accumulate) {
          c[2 * ci] += sr;
          c[2 * ci + 1] += si;
        } else {
          c[2 * ci] = sr;
          c[2 * ci + 1] = si;
        }
      }
}

} // namespace parallel
} // namespace isfno::kernels

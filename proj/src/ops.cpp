#include "isfno/ops.hpp"

#include "isfno/errors.hpp"
#include "isfno/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace isfno::ops {

namespace k = isfno::kernels::parallel;
using kernels::AffineDims;
using kernels::MatOp;
using kernels::MixDims;
using kernels::ModeMatmulDims;

namespace {

Tape &tape_of(Var a) {
  if (!a.valid())
    throw MissingNodeError("operation on a variable without a tape");
  return *a.tape();
}

Tape &tape_of(Var a, Var b) {
  Tape &t = tape_of(a);
  if (b.tape() != &t)
    throw MissingNodeError("operands live on different tapes");
  return t;
}

void require_same_shape(const char *op, const Tensor &a, const Tensor &b) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()) + " differ");
}

void axpy(Tensor &y, double a, const Tensor &x) {
  for (std::size_t i = 0; i < y.size(); ++i)
    y[i] += a * x[i];
}

std::size_t leading_count(const Shape &s, std::size_t trailing) {
  std::size_t n = 1;
  for (std::size_t a = 0; a + trailing < s.size(); ++a)
    n *= s[a];
  return n;
}

// (modes..., d, d, 2) -> (mode count, d)
ModeMatmulDims square_blocks(const char *op, const Shape &s) {
  if (s.size() < 3 || s.back() != 2)
    throw ShapeError(std::string(op) + ": expected (modes..., d, d, 2), got " + shape_string(s));
  const std::size_t d = s[s.size() - 2];
  if (s[s.size() - 3] != d)
    throw ShapeError(std::string(op) + ": channel blocks are not square in " + shape_string(s));
  return {leading_count(s, 3), d};
}

} // namespace

// -- elementwise --------------------------------------------------------------

Var add(Var a, Var b) {
  Tape &t = tape_of(a, b);
  const Tensor &av = a.value(), &bv = b.value();
  require_same_shape("add", av, bv);
  Tensor out = av;
  axpy(out, 1.0, bv);
  return t.record("add", std::move(out), {a, b}, [](const Tensor &g, std::span<Tensor *const> gi) {
    if (gi[0])
      axpy(*gi[0], 1.0, g);
    if (gi[1])
      axpy(*gi[1], 1.0, g);
  });
}

Var sub(Var a, Var b) {
  Tape &t = tape_of(a, b);
  const Tensor &av = a.value(), &bv = b.value();
  require_same_shape("sub", av, bv);
  Tensor out = av;
  axpy(out, -1.0, bv);
  return t.record("sub", std::move(out), {a, b}, [](const Tensor &g, std::span<Tensor *const> gi) {
    if (gi[0])
      axpy(*gi[0], 1.0, g);
    if (gi[1])
      axpy(*gi[1], -1.0, g);
  });
}

Var mul(Var a, Var b) {
  Tape &t = tape_of(a, b);
  const Tensor &av = a.value(), &bv = b.value();
  require_same_shape("mul", av, bv);
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = av[i] * bv[i];
  return t.record("mul", std::move(out), {a, b},
                  [&av, &bv](const Tensor &g, std::span<Tensor *const> gi) {
                    if (gi[0])
                      for (std::size_t i = 0; i < g.size(); ++i)
                        (*gi[0])[i] += g[i] * bv[i];
                    if (gi[1])
                      for (std::size_t i = 0; i < g.size(); ++i)
                        (*gi[1])[i] += g[i] * av[i];
                  });
}

Var scale(Var a, double s) {
  Tape &t = tape_of(a);
  Tensor out = a.value();
  for (auto &v : out.values())
    v *= s;
  return t.record("scale", std::move(out), {a}, [s](const Tensor &g, std::span<Tensor *const> gi) {
    axpy(*gi[0], s, g);
  });
}

Var square(Var a) {
  Tape &t = tape_of(a);
  const Tensor &av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = av[i] * av[i];
  return t.record("square", std::move(out), {a}, [&av](const Tensor &g, std::span<Tensor *const> gi) {
    for (std::size_t i = 0; i < g.size(); ++i)
      (*gi[0])[i] += 2.0 * av[i] * g[i];
  });
}

Var sqrt(Var a) {
  Tape &t = tape_of(a);
  Tensor out = a.value();
  for (auto &v : out.values())
    v = std::sqrt(v);
  Tensor root = out;
  return t.record("sqrt", std::move(out), {a},
                  [root = std::move(root)](const Tensor &g, std::span<Tensor *const> gi) {
                    for (std::size_t i = 0; i < g.size(); ++i)
                      // Zero subgradient at the kink.
                      if (root[i] > 0.0)
                        (*gi[0])[i] += g[i] / (2.0 * root[i]);
                  });
}

Var gelu(Var a) {
  Tape &t = tape_of(a);
  const Tensor &av = a.value();
  Tensor out(av.shape());
  k::gelu_forward(av.values(), out.values());
  return t.record("gelu", std::move(out), {a}, [&av](const Tensor &g, std::span<Tensor *const> gi) {
    k::gelu_grad(av.values(), g.values(), gi[0]->values());
  });
}

Var mul_const(Var a, const Tensor &c) {
  Tape &t = tape_of(a);
  const Tensor &av = a.value();
  require_same_shape("mul_const", av, c);
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = av[i] * c[i];
  return t.record("mul_const", std::move(out), {a}, [c](const Tensor &g, std::span<Tensor *const> gi) {
    for (std::size_t i = 0; i < g.size(); ++i)
      (*gi[0])[i] += g[i] * c[i];
  });
}

Var sub_const(Var a, const Tensor &c) {
  Tape &t = tape_of(a);
  const Tensor &av = a.value();
  require_same_shape("sub_const", av, c);
  Tensor out = av;
  axpy(out, -1.0, c);
  return t.record("sub_const", std::move(out), {a}, [](const Tensor &g, std::span<Tensor *const> gi) {
    axpy(*gi[0], 1.0, g);
  });
}

// -- reductions ---------------------------------------------------------------

Var sum(Var a) {
  Tape &t = tape_of(a);
  double s = 0.0;
  for (double v : a.value().values())
    s += v;
  return t.record("sum", Tensor::scalar(s), {a}, [](const Tensor &g, std::span<Tensor *const> gi) {
    for (auto &v : gi[0]->values())
      v += g[0];
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0)
    throw ShapeError("mean of an empty tensor");
  return scale(sum(a), 1.0 / n);
}

Var sum_squares_per_sample(Var a) {
  Tape &t = tape_of(a);
  const Tensor &av = a.value();
  if (av.rank() < 1)
    throw ShapeError("sum_squares_per_sample needs a batch axis");
  const std::size_t batch = av.dim(0);
  const std::size_t per = batch ? av.size() / batch : 0;
  Tensor out({batch});
  for (std::size_t b = 0; b < batch; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < per; ++i)
      s += av[b * per + i] * av[b * per + i];
    out[b] = s;
  }
  return t.record("sum_squares_per_sample", std::move(out), {a},
                  [&av, per](const Tensor &g, std::span<Tensor *const> gi) {
                    for (std::size_t b = 0; b < g.size(); ++b)
                      for (std::size_t i = 0; i < per; ++i)
                        (*gi[0])[b * per + i] += 2.0 * av[b * per + i] * g[b];
                  });
}

// -- channel algebra ----------------------------------------------------------

Var affine_channel(Var x, Var w, Var b) {
  Tape &t = tape_of(x, w);
  if (b.valid() && b.tape() != &t)
    throw MissingNodeError("affine_channel: bias lives on a different tape");
  const Tensor &xv = x.value(), &wv = w.value();
  if (wv.rank() != 2 || xv.rank() < 1 || xv.shape().back() != wv.dim(0))
    throw ShapeError("affine_channel: input " + shape_string(xv.shape()) +
                     " incompatible with matrix " + shape_string(wv.shape()));
  const AffineDims dims{xv.size() / wv.dim(0), wv.dim(0), wv.dim(1)};
  std::span<const double> bias;
  const Tensor *bv = nullptr;
  if (b.valid()) {
    bv = &b.value();
    if (bv->size() != dims.out)
      throw ShapeError("affine_channel: bias " + shape_string(bv->shape()) + " does not match " +
                       std::to_string(dims.out) + " outputs");
    bias = bv->values();
  }
  Shape out_shape = xv.shape();
  out_shape.back() = dims.out;
  Tensor out(out_shape);
  k::affine_forward(dims, xv.values(), wv.values(), bias, out.values());

  std::vector<Var> inputs{x, w};
  if (b.valid())
    inputs.push_back(b);
  return t.record("affine_channel", std::move(out), std::move(inputs),
                  [&xv, &wv, dims](const Tensor &g, std::span<Tensor *const> gi) {
                    if (gi[0])
                      k::affine_grad_input(dims, g.values(), wv.values(), gi[0]->values());
                    Tensor *gb = gi.size() > 2 ? gi[2] : nullptr;
                    if (gi[1]) {
                      k::affine_grad_weight(dims, xv.values(), g.values(), gi[1]->values(),
                                            gb ? gb->values() : std::span<double>{});
                    } else if (gb) {
                      for (std::size_t p = 0; p < dims.points; ++p)
                        for (std::size_t o = 0; o < dims.out; ++o)
                          (*gb)[o] += g[p * dims.out + o];
                    }
                  });
}

Var slice_channels(Var x, std::size_t begin, std::size_t count) {
  Tape &t = tape_of(x);
  const Tensor &xv = x.value();
  const std::size_t c = xv.shape().back();
  if (begin + count > c || count == 0)
    throw ShapeError("slice_channels: [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " + std::to_string(c) + " channels");
  const std::size_t points = xv.size() / c;
  Shape s = xv.shape();
  s.back() = count;
  Tensor out(s);
  for (std::size_t p = 0; p < points; ++p)
    std::copy_n(xv.data() + p * c + begin, count, out.data() + p * count);
  return t.record("slice_channels", std::move(out), {x},
                  [points, c, begin, count](const Tensor &g, std::span<Tensor *const> gi) {
                    for (std::size_t p = 0; p < points; ++p)
                      for (std::size_t j = 0; j < count; ++j)
                        (*gi[0])[p * c + begin + j] += g[p * count + j];
                  });
}

Var concat_channels(Var a, Var b) {
  Tape &t = tape_of(a, b);
  const Tensor &av = a.value(), &bv = b.value();
  const std::size_t ca = av.shape().back(), cb = bv.shape().back();
  Shape sa = av.shape(), sb = bv.shape();
  sa.back() = sb.back() = 0;
  if (sa != sb)
    throw ShapeError("concat_channels: " + shape_string(av.shape()) + " vs " +
                     shape_string(bv.shape()));
  const std::size_t points = av.size() / ca;
  Shape s = av.shape();
  s.back() = ca + cb;
  Tensor out(s);
  for (std::size_t p = 0; p < points; ++p) {
    std::copy_n(av.data() + p * ca, ca, out.data() + p * (ca + cb));
    std::copy_n(bv.data() + p * cb, cb, out.data() + p * (ca + cb) + ca);
  }
  return t.record("concat_channels", std::move(out), {a, b},
                  [points, ca, cb](const Tensor &g, std::span<Tensor *const> gi) {
                    for (std::size_t p = 0; p < points; ++p) {
                      if (gi[0])
                        for (std::size_t j = 0; j < ca; ++j)
                          (*gi[0])[p * ca + j] += g[p * (ca + cb) + j];
                      if (gi[1])
                        for (std::size_t j = 0; j < cb; ++j)
                          (*gi[1])[p * cb + j] += g[p * (ca + cb) + ca + j];
                    }
                  });
}

Var stack_steps(std::span<const Var> steps) {
  if (steps.empty())
    throw ShapeError("stack_steps needs at least one tensor");
  Tape &t = tape_of(steps[0]);
  const Shape &s0 = steps[0].value().shape();
  if (s0.empty())
    throw ShapeError("stack_steps needs a batch axis");
  for (const Var &v : steps) {
    tape_of(steps[0], v);
    if (v.value().shape() != s0)
      throw ShapeError("stack_steps: " + shape_string(v.value().shape()) + " vs " +
                       shape_string(s0));
  }
  const std::size_t n = steps.size();
  const std::size_t batch = s0[0];
  const std::size_t per = batch ? steps[0].value().size() / batch : 0;
  Shape shape = s0;
  shape.insert(shape.begin() + 1, n);
  Tensor out(shape);
  for (std::size_t j = 0; j < n; ++j) {
    const Tensor &v = steps[j].value();
    for (std::size_t b = 0; b < batch; ++b)
      std::copy_n(v.data() + b * per, per, out.data() + (b * n + j) * per);
  }
  return t.record("stack_steps", std::move(out), std::vector<Var>(steps.begin(), steps.end()),
                  [n, batch, per](const Tensor &g, std::span<Tensor *const> gi) {
                    for (std::size_t j = 0; j < n; ++j) {
                      if (!gi[j])
                        continue;
                      for (std::size_t b = 0; b < batch; ++b)
                        for (std::size_t i = 0; i < per; ++i)
                          (*gi[j])[b * per + i] += g[(b * n + j) * per + i];
                    }
                  });
}

// -- spectral -----------------------------------------------------------------

Var fft_forward(Var field, const ModeCutoff &cutoff) {
  Tape &t = tape_of(field);
  const Tensor &fv = field.value();
  Tensor out = truncated_rfft(fv, cutoff);
  const Shape grid(fv.shape().begin() + 1, fv.shape().end() - 1);
  return t.record("fft_forward", std::move(out), {field},
                  [grid, cutoff](const Tensor &g, std::span<Tensor *const> gi) {
                    axpy(*gi[0], 1.0, truncated_rfft_adjoint(g, grid, cutoff));
                  });
}

Var fft_inverse(Var spec, const Shape &grid, const ModeCutoff &cutoff) {
  Tape &t = tape_of(spec);
  Tensor out = truncated_irfft(spec.value(), grid, cutoff);
  return t.record("fft_inverse", std::move(out), {spec},
                  [cutoff](const Tensor &g, std::span<Tensor *const> gi) {
                    axpy(*gi[0], 1.0, truncated_irfft_adjoint(g, cutoff));
                  });
}

Var spectral_mix(Var spec, Var weights) {
  Tape &t = tape_of(spec, weights);
  const Tensor &xv = spec.value(), &wv = weights.value();
  const Shape &xs = xv.shape(), &ws = wv.shape();
  if (xs.size() < 3 || ws.size() < 4 || xs.back() != 2 || ws.back() != 2)
    throw ShapeError("spectral_mix: spectrum " + shape_string(xs) + " / weights " +
                     shape_string(ws) + " are not complex pair tensors");
  const std::size_t mode_axes = ws.size() - 3;
  if (xs.size() != mode_axes + 3)
    throw ShapeError("spectral_mix: mode rank of " + shape_string(xs) + " and " +
                     shape_string(ws) + " differ");
  for (std::size_t a = 0; a < mode_axes; ++a)
    if (xs[1 + a] != ws[a])
      throw ShapeError("spectral_mix: mode extents of " + shape_string(xs) + " and " +
                       shape_string(ws) + " differ");
  const std::size_t cin = ws[mode_axes + 1];
  const std::size_t cout = ws[mode_axes];
  if (xs[mode_axes + 1] != cin)
    throw ShapeError("spectral_mix: spectrum has " + std::to_string(xs[mode_axes + 1]) +
                     " channels, weights expect " + std::to_string(cin));
  const MixDims dims{xs[0], leading_count(ws, 3), cin, cout};
  Shape out_shape = xs;
  out_shape[mode_axes + 1] = cout;
  Tensor out(out_shape);
  k::mix_forward(dims, xv.values(), wv.values(), out.values());
  return t.record("spectral_mix", std::move(out), {spec, weights},
                  [&xv, &wv, dims](const Tensor &g, std::span<Tensor *const> gi) {
                    if (gi[0])
                      k::mix_grad_input(dims, g.values(), wv.values(), gi[0]->values());
                    if (gi[1])
                      k::mix_grad_weight(dims, xv.values(), g.values(), gi[1]->values());
                  });
}

Var mode_matmul(Var a, Var b) {
  Tape &t = tape_of(a, b);
  const Tensor &av = a.value(), &bv = b.value();
  require_same_shape("mode_matmul", av, bv);
  const ModeMatmulDims dims = square_blocks("mode_matmul", av.shape());
  Tensor out(av.shape());
  k::mode_matmul(dims, av.values(), MatOp::None, bv.values(), MatOp::None, out.values(), false);
  return t.record("mode_matmul", std::move(out), {a, b},
                  [&av, &bv, dims](const Tensor &g, std::span<Tensor *const> gi) {
                    // A_bar = G B^H, B_bar = A^H G
                    if (gi[0])
                      k::mode_matmul(dims, g.values(), MatOp::None, bv.values(), MatOp::Adjoint,
                                     gi[0]->values(), true);
                    if (gi[1])
                      k::mode_matmul(dims, av.values(), MatOp::Adjoint, g.values(), MatOp::None,
                                     gi[1]->values(), true);
                  });
}

Var add_identity(Var w, double c) {
  Tape &t = tape_of(w);
  const ModeMatmulDims dims = square_blocks("add_identity", w.value().shape());
  Tensor out = w.value();
  for (std::size_t m = 0; m < dims.modes; ++m)
    for (std::size_t i = 0; i < dims.d; ++i)
      out[2 * ((m * dims.d + i) * dims.d + i)] += c;
  return t.record("add_identity", std::move(out), {w}, [](const Tensor &g, std::span<Tensor *const> gi) {
    axpy(*gi[0], 1.0, g);
  });
}

int matrix_exp_squarings(const Tensor &w) {
  const ModeMatmulDims dims = square_blocks("matrix_exp", w.shape());
  // Largest induced 1-norm over the mode blocks.
  double norm = 0.0;
  for (std::size_t m = 0; m < dims.modes; ++m)
    for (std::size_t c = 0; c < dims.d; ++c) {
      double col = 0.0;
      for (std::size_t r = 0; r < dims.d; ++r) {
        const std::size_t i = (m * dims.d + r) * dims.d + c;
        col += std::hypot(w[2 * i], w[2 * i + 1]);
      }
      norm = std::max(norm, col);
    }
  if (!std::isfinite(norm))
    throw DivergenceError("matrix_exp: non-finite weights", std::nan(""));
  // Taylor order 8 is accurate to ~1e-17 once the scaled norm is <= 1/16.
  constexpr double theta = 1.0 / 16.0;
  if (norm <= theta)
    return 0;
  return static_cast<int>(std::ceil(std::log2(norm / theta)));
}

Var matrix_exp(Var w) {
  constexpr int order = 8;
  const int squarings = matrix_exp_squarings(w.value());
  Var a = squarings > 0 ? scale(w, std::ldexp(1.0, -squarings)) : w;
  // Horner: I + A (I + A/2 (I + ... (I + A/8)))
  Var p = add_identity(scale(a, 1.0 / order), 1.0);
  for (int j = order - 1; j >= 1; --j)
    p = add_identity(scale(mode_matmul(a, p), 1.0 / j), 1.0);
  for (int s = 0; s < squarings; ++s)
    p = mode_matmul(p, p);
  return p;
}

Var hermitize_weights(Var w, const ModeCutoff &cutoff) {
  Tape &t = tape_of(w);
  const Tensor &wv = w.value();
  const Shape modes = mode_extents(cutoff);
  const Shape &ws = wv.shape();
  if (ws.size() != modes.size() + 3 || !std::equal(modes.begin(), modes.end(), ws.begin()))
    throw ShapeError("hermitize_weights: weights " + shape_string(ws) +
                     " do not match cutoff extents " + shape_string(modes));
  const std::size_t block = 2 * ws[ws.size() - 3] * ws[ws.size() - 2];

  // Apply the (self-adjoint, idempotent) projection in place.
  auto project = [cutoff, modes, block](Tensor &x) {
    if (cutoff.size() == 1) {
      for (std::size_t e = 0; e < block; e += 2)
        x[e + 1] = 0.0;
      return;
    }
    const std::size_t k1 = cutoff[0];
    const std::size_t cols = modes[1];
    for (std::size_t i = 0; i < k1; ++i) {
      const std::size_t j = i == 0 ? 0 : 2 * k1 - 1 - i; // row of -kappa_1
      double *pi = x.data() + (i * cols) * block;
      double *pj = x.data() + (j * cols) * block;
      for (std::size_t e = 0; e < block; e += 2) {
        const double re = 0.5 * (pi[e] + pj[e]);
        const double im = 0.5 * (pi[e + 1] - pj[e + 1]);
        pi[e] = re;
        pi[e + 1] = im;
        pj[e] = re;
        pj[e + 1] = -im;
      }
    }
  };
  Tensor out = wv;
  project(out);
  return t.record("hermitize_weights", std::move(out), {w},
                  [project](const Tensor &g, std::span<Tensor *const> gi) {
                    Tensor pg = g;
                    project(pg);
                    axpy(*gi[0], 1.0, pg);
                  });
}

Var power_mode_weights(Var r, Var p, std::size_t k_max) {
  Tape &t = tape_of(r, p);
  const Tensor &rv = r.value(), &pv = p.value();
  if (rv.rank() != 3 || rv.dim(0) != rv.dim(1) || rv.dim(2) != 2)
    throw ShapeError("power_mode_weights: r must be (d, d, 2), got " + shape_string(rv.shape()));
  if (pv.size() != 1)
    throw ShapeError("power_mode_weights: exponent must be a scalar");
  if (k_max == 0)
    throw ShapeError("power_mode_weights: cutoff must be >= 1");
  const double exponent = pv[0];
  const std::size_t block = rv.size();
  std::vector<double> factor(k_max, 0.0);
  for (std::size_t kk = 1; kk < k_max; ++kk)
    factor[kk] = std::pow(static_cast<double>(kk) / static_cast<double>(k_max), exponent);
  Tensor out({k_max, rv.dim(0), rv.dim(1), 2});
  for (std::size_t kk = 0; kk < k_max; ++kk)
    for (std::size_t e = 0; e < block; ++e)
      out[kk * block + e] = factor[kk] * rv[e];
  return t.record("power_mode_weights", std::move(out), {r, p},
                  [&rv, factor, block, k_max](const Tensor &g, std::span<Tensor *const> gi) {
                    if (gi[0])
                      for (std::size_t kk = 1; kk < k_max; ++kk)
                        for (std::size_t e = 0; e < block; ++e)
                          (*gi[0])[e] += factor[kk] * g[kk * block + e];
                    if (gi[1]) {
                      double s = 0.0;
                      for (std::size_t kk = 1; kk < k_max; ++kk) {
                        const double logr =
                            std::log(static_cast<double>(kk) / static_cast<double>(k_max));
                        double inner = 0.0;
                        for (std::size_t e = 0; e < block; ++e)
                          inner += g[kk * block + e] * rv[e];
                        s += inner * factor[kk] * logr;
                      }
                      (*gi[1])[0] += s;
                    }
                  });
}

} // namespace isfno::ops

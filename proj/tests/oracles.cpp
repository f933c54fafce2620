#include "oracles.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace oracle {

Tensor random_tensor(const Shape &shape, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(shape);
  for (auto &v : t.storage())
    v = dist(rng);
  return t;
}

Complex dft_mode(const Tensor &field, const std::vector<long> &k) {
  const Shape &g = field.shape();
  const double two_pi = 2.0 * std::numbers::pi;
  Complex acc = 0.0;
  if (g.size() == 1) {
    for (std::size_t i = 0; i < g[0]; ++i)
      acc += field[i] * std::polar(1.0, -two_pi * static_cast<double>(k[0] * static_cast<long>(i)) /
                                            static_cast<double>(g[0]));
    return acc;
  }
  for (std::size_t i = 0; i < g[0]; ++i)
    for (std::size_t j = 0; j < g[1]; ++j) {
      const double phase = two_pi * (static_cast<double>(k[0] * static_cast<long>(i)) / static_cast<double>(g[0]) +
                                     static_cast<double>(k[1] * static_cast<long>(j)) / static_cast<double>(g[1]));
      acc += field[i * g[1] + j] * std::polar(1.0, -phase);
    }
  return acc;
}

Tensor direct_truncated_inverse(const Tensor &spec, const Shape &grid,
                                const isfno::ModeCutoff &cutoff) {
  const double two_pi = 2.0 * std::numbers::pi;
  Tensor out(grid);
  const double n_total = static_cast<double>(isfno::shape_size(grid));
  if (grid.size() == 1) {
    for (std::size_t x = 0; x < grid[0]; ++x) {
      Complex acc = 0.0;
      for (std::size_t k = 0; k < cutoff[0]; ++k) {
        const Complex c(spec[2 * k], spec[2 * k + 1]);
        const double w = k == 0 ? 1.0 : 2.0;
        acc += w * c * std::polar(1.0, two_pi * static_cast<double>(k * x) / static_cast<double>(grid[0]));
      }
      out[x] = acc.real() / n_total;
    }
    return out;
  }
  const std::size_t rows = 2 * cutoff[0] - 1;
  for (std::size_t x = 0; x < grid[0]; ++x)
    for (std::size_t y = 0; y < grid[1]; ++y) {
      Complex acc = 0.0;
      for (std::size_t r = 0; r < rows; ++r) {
        const long k1 = isfno::leading_mode_index(r, cutoff[0]);
        for (std::size_t k2 = 0; k2 < cutoff[1]; ++k2) {
          const std::size_t idx = 2 * (r * cutoff[1] + k2);
          const Complex c(spec[idx], spec[idx + 1]);
          const double w = k2 == 0 ? 1.0 : 2.0;
          const double phase =
              two_pi * (static_cast<double>(k1) * static_cast<double>(x) / static_cast<double>(grid[0]) +
                        static_cast<double>(k2 * y) / static_cast<double>(grid[1]));
          acc += w * c * std::polar(1.0, phase);
        }
      }
      out[x * grid[1] + y] = acc.real() / n_total;
    }
  return out;
}

Tensor fd_gradient(const std::function<double(const Tensor &)> &f, const Tensor &x, double h) {
  Tensor g(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double fp = f(probe);
    probe[i] = orig - h;
    const double fm = f(probe);
    probe[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

double max_rel_error(const Tensor &a, const Tensor &b, double floor) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(std::abs(b[i]), floor));
  return worst;
}

std::vector<Complex> dense_expm(const std::vector<Complex> &a, std::size_t d) {
  Eigen::MatrixXcd m(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      m(static_cast<long>(i), static_cast<long>(j)) = a[i * d + j];
  const Eigen::MatrixXcd e = m.exp();
  std::vector<Complex> out(d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      out[i * d + j] = e(static_cast<long>(i), static_cast<long>(j));
  return out;
}

std::vector<double> direct_autocorrelation(const std::vector<Tensor> &states) {
  const Shape &g = states.front().shape();
  const std::size_t n1 = g[0];
  const std::size_t n2 = g.size() == 2 ? g[1] : 1;
  std::vector<double> k(n1, 0.0);
  for (const auto &s : states)
    for (std::size_t r = 0; r < n1; ++r)
      for (std::size_t x = 0; x < n1; ++x)
        for (std::size_t y = 0; y < n2; ++y)
          k[r] += s[x * n2 + y] * s[((x + r) % n1) * n2 + y];
  const double norm = k[0];
  for (auto &v : k)
    v /= norm;
  return k;
}

double rel_l2(const Tensor &a, const Tensor &b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

Tensor exp_layer_reference(const Tensor &z, const Tensor &r, int j) {
  const std::size_t n = z.dim(0), d = z.dim(1), kmax = r.dim(0);
  const double two_pi = 2.0 * std::numbers::pi;
  // Per channel spectrum below the cutoff.
  std::vector<std::vector<Complex>> spec(d, std::vector<Complex>(kmax));
  for (std::size_t c = 0; c < d; ++c) {
    Tensor col({n});
    for (std::size_t x = 0; x < n; ++x)
      col[x] = z[x * d + c];
    for (std::size_t k = 0; k < kmax; ++k)
      spec[c][k] = dft_mode(col, {static_cast<long>(k)});
  }
  Tensor out = z;
  for (std::size_t k = 0; k < kmax; ++k) {
    std::vector<Complex> a(d * d);
    for (std::size_t i = 0; i < d * d; ++i)
      a[i] = static_cast<double>(j) * Complex(r[(k * d * d + i) * 2], r[(k * d * d + i) * 2 + 1]);
    const auto e = dense_expm(a, d);
    const double w = k == 0 ? 1.0 : 2.0;
    for (std::size_t o = 0; o < d; ++o) {
      Complex delta = 0.0;
      for (std::size_t i = 0; i < d; ++i)
        delta += e[o * d + i] * spec[i][k];
      delta -= spec[o][k];
      for (std::size_t x = 0; x < n; ++x)
        out[x * d + o] +=
            w * (delta * std::polar(1.0, two_pi * static_cast<double>(k * x) / static_cast<double>(n)))
                    .real() /
            static_cast<double>(n);
    }
  }
  return out;
}

} // namespace oracle

#include "isfno/errors.hpp"
#include "isfno/ist.hpp"
#include "isfno/spectral_solver.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace isfno;

namespace {

constexpr double kPi = std::numbers::pi;

// d^m/dx^m of a periodic sampled field by direct DFT and inverse sum.
Tensor spectral_derivative(const Tensor &f, double length, int order) {
  const std::size_t n = f.size();
  Tensor out({n});
  for (std::size_t k = 0; k <= n / 2; ++k) {
    if (2 * k == n)
      continue;
    const oracle::Complex c = oracle::dft_mode(f, {static_cast<long>(k)});
    const oracle::Complex factor = std::pow(oracle::Complex(0.0, 2 * kPi * k / length), order);
    const double w = k == 0 ? 1.0 : 2.0;
    for (std::size_t x = 0; x < n; ++x)
      out[x] += w * (factor * c * std::polar(1.0, 2 * kPi * double(k * x) / double(n))).real() /
                double(n);
  }
  return out;
}

LineGrid wide_grid(std::size_t n = 256) { return {-20.0, 40.0, n}; }

} // namespace

TEST(Ist, OneSolitonCrestAndShape) {
  const LineGrid g = wide_grid();
  for (double s : {0.5, 1.0, 2.0}) {
    const double c = g.x(100);
    const Tensor phi = one_soliton(s, c, 0.0, g);
    // Periodic images add a few 1e-12 for the widest soliton.
    EXPECT_NEAR(phi[100], s / 2, 1e-10);
    std::size_t arg = 0;
    for (std::size_t i = 0; i < g.n; ++i)
      if (phi[i] > phi[arg])
        arg = i;
    EXPECT_EQ(arg, 100u);
    const double x = g.x(140);
    const double sech = 1.0 / std::cosh(std::sqrt(s) / 2 * (x - c));
    EXPECT_NEAR(phi[140], s / 2 * sech * sech, 1e-10);
  }
  // Travels at speed s.
  const Tensor moved = one_soliton(1.0, g.x(100), 0.5 * 10 * g.dx(), g);
  EXPECT_NEAR(moved[105], 0.5, 1e-12);
}

TEST(Ist, OneSolitonSolvesKdv) {
  const LineGrid g = wide_grid();
  const double s = 1.0, c = 0.0, t = 0.3, h = 1e-4;
  const Tensor u = one_soliton(s, c, t, g);
  const Tensor ut_p = one_soliton(s, c, t + h, g), ut_m = one_soliton(s, c, t - h, g);
  const Tensor ux = spectral_derivative(u, g.length, 1);
  const Tensor uxxx = spectral_derivative(u, g.length, 3);
  double worst = 0.0;
  for (std::size_t i = 0; i < g.n; ++i) {
    const double ut = (ut_p[i] - ut_m[i]) / (2 * h);
    worst = std::max(worst, std::abs(ut + 6 * u[i] * ux[i] + uxxx[i]));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Ist, DiscreteSpectrumOfSolitons) {
  const LineGrid g{-20.0, 40.0, 512};
  for (double s : {1.0, 2.0}) {
    const auto ev = discrete_spectrum(one_soliton(s, 0.0, 0.0, g), g.length);
    ASSERT_EQ(ev.size(), 1u) << s;
    EXPECT_NEAR(ev[0], -s / 4, 1e-3) << s;
  }
  Tensor two = one_soliton(2.0, -8.0, 0.0, g);
  const Tensor second = one_soliton(0.8, 8.0, 0.0, g);
  for (std::size_t i = 0; i < g.n; ++i)
    two[i] += second[i];
  const auto ev = discrete_spectrum(two, g.length);
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_NEAR(ev[0], -0.5, 1e-3);
  EXPECT_NEAR(ev[1], -0.2, 1e-3);
  EXPECT_TRUE(discrete_spectrum(Tensor({64}), 10.0).empty());
  // The box splits the continuum edge slightly below zero.
  const auto all = discrete_spectrum(two, g.length, 0.0);
  ASSERT_EQ(all.size(), 3u);
  EXPECT_GT(all[2], -1e-4);
}

TEST(Ist, ScatteringDataValidation) {
  const ScatteringData d = soliton_scattering({1.0, 2.0}, {0.0, 3.0});
  EXPECT_NO_THROW(d.validate());
  EXPECT_TRUE(d.reflectionless());
  EXPECT_NEAR(d.k[1], std::sqrt(2.0) / 2, 1e-15);
  EXPECT_THROW(soliton_scattering({1.0, 1.0}, {0.0, 3.0}), ContractError);
  EXPECT_THROW(soliton_scattering({-1.0}, {0.0}), ContractError);
  EXPECT_THROW(soliton_scattering({1.0}, {0.0, 1.0}), ContractError);
}

TEST(Ist, EvolutionIsAGroupAndIsospectral) {
  const ScatteringData d = soliton_scattering({0.7, 1.9}, {-3.0, 2.0});
  const ScatteringData a = evolve_scattering(evolve_scattering(d, 0.4), 1.1);
  const ScatteringData b = evolve_scattering(d, 1.5);
  const ScatteringData back = evolve_scattering(b, -1.5);
  ASSERT_EQ(a.size(), 2u);
  for (std::size_t j = 0; j < 2; ++j) {
    EXPECT_EQ(a.k[j], d.k[j]);
    EXPECT_NEAR(a.c_minus[j], b.c_minus[j], 1e-12 * b.c_minus[j]);
    EXPECT_NEAR(a.c_plus[j], b.c_plus[j], 1e-12 * b.c_plus[j]);
    EXPECT_NEAR(back.c_minus[j], d.c_minus[j], 1e-12 * d.c_minus[j]);
  }
  EXPECT_NEAR(a.t, 1.5, 1e-15);
}

TEST(Ist, EmptyDataReconstructsZeroField) {
  const Tensor phi = reflectionless_reconstruct(soliton_scattering({}, {}), wide_grid(64));
  EXPECT_EQ(max_abs(phi), 0.0);
}

TEST(Ist, OneSolitonReconstruction) {
  const LineGrid g = wide_grid();
  for (double t : {0.0, 1.5}) {
    const ScatteringData d = evolve_scattering(soliton_scattering({1.3}, {-2.0}), t);
    const Tensor phi = reflectionless_reconstruct(d, g);
    EXPECT_LT(max_abs_diff(phi, one_soliton(1.3, -2.0, t, g)), 1e-6) << t;
  }
}

TEST(Ist, TwoSolitonReconstructionMatchesSolver) {
  const LineGrid g = wide_grid();
  const ScatteringData d = soliton_scattering({2.0, 1.0}, {-6.0, 0.0});
  const Tensor phi0 = reflectionless_reconstruct(d, g);
  // Mass is the sum of the soliton masses 2 sqrt(s).
  double mass = 0.0;
  for (double v : phi0.storage())
    mass += v * g.dx();
  EXPECT_NEAR(mass, 2.0 * (std::sqrt(2.0) + 1.0), 1e-4);

  auto cfg = EquationConfig::standard(Family::KdV, {g.n});
  cfg.length = {g.length};
  const double t = 5.0;
  const auto solved = advance(cfg, {phi0, 0.0, t, 0.0}, 1);
  const Tensor ist = reflectionless_reconstruct(evolve_scattering(d, t), g);
  EXPECT_LT(oracle::rel_l2(solved.phi, ist), 1e-3);

  // The solver field keeps the bound-state spectrum through the collision.
  const auto ev0 = discrete_spectrum(phi0, g.length);
  const auto ev1 = discrete_spectrum(solved.phi, g.length);
  ASSERT_EQ(ev0.size(), 2u);
  ASSERT_EQ(ev1.size(), 2u);
  for (std::size_t j = 0; j < 2; ++j)
    EXPECT_NEAR(ev1[j], ev0[j], 1e-3);
}

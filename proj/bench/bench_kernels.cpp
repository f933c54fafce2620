// Serial reference kernels against their OpenMP counterparts, plus one full
// forward/backward pass of a toy model.

#include "isfno/kernels.hpp"
#include "isfno/model.hpp"
#include "isfno/trainer.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

namespace k = isfno::kernels;

namespace {

std::vector<double> filled(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto &x : v)
    x = d(rng);
  return v;
}

template <bool Parallel> void affine(benchmark::State &state) {
  const k::AffineDims dims{static_cast<std::size_t>(state.range(0)), 9, 128};
  const auto x = filled(dims.points * dims.in, 1), w = filled(dims.in * dims.out, 2),
             b = filled(dims.out, 3);
  std::vector<double> y(dims.points * dims.out);
  for (auto _ : state) {
    if constexpr (Parallel)
      k::parallel::affine_forward(dims, x, w, b, y);
    else
      k::serial::affine_forward(dims, x, w, b, y);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel> void gelu(benchmark::State &state) {
  const auto x = filled(static_cast<std::size_t>(state.range(0)), 4);
  std::vector<double> y(x.size());
  for (auto _ : state) {
    if constexpr (Parallel)
      k::parallel::gelu_forward(x, y);
    else
      k::serial::gelu_forward(x, y);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel> void mix(benchmark::State &state) {
  const k::MixDims dims{static_cast<std::size_t>(state.range(0)), 16, 9, 9};
  const auto x = filled(2 * dims.batch * dims.modes * dims.in, 5),
             w = filled(2 * dims.modes * dims.out * dims.in, 6);
  std::vector<double> y(2 * dims.batch * dims.modes * dims.out);
  for (auto _ : state) {
    if constexpr (Parallel)
      k::parallel::mix_forward(dims, x, w, y);
    else
      k::serial::mix_forward(dims, x, w, y);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel> void matmul(benchmark::State &state) {
  const k::ModeMatmulDims dims{static_cast<std::size_t>(state.range(0)), 9};
  const auto a = filled(2 * dims.modes * dims.d * dims.d, 7),
             b = filled(2 * dims.modes * dims.d * dims.d, 8);
  std::vector<double> c(a.size());
  for (auto _ : state) {
    if constexpr (Parallel)
      k::parallel::mode_matmul(dims, a, k::MatOp::None, b, k::MatOp::Adjoint, c, false);
    else
      k::serial::mode_matmul(dims, a, k::MatOp::None, b, k::MatOp::Adjoint, c, false);
    benchmark::DoNotOptimize(c.data());
  }
}

void toy_batch(benchmark::State &state) {
  isfno::ModelSpec spec;
  spec.variant = isfno::parse_variant(state.range(0) == 0 ? "fno" : "isfno_o");
  spec.cutoff = {16};
  spec.horizon = 5;
  const isfno::Model model(spec);
  isfno::Tensor in({32, 64, 1}), tg({32, 5, 64, 1});
  const auto a = filled(in.size(), 9), b = filled(tg.size(), 10);
  std::copy(a.begin(), a.end(), in.storage().begin());
  std::copy(b.begin(), b.end(), tg.storage().begin());
  isfno::TrainConfig cfg;
  cfg.horizon = 5;
  for (auto _ : state)
    benchmark::DoNotOptimize(isfno::batch_gradients(model, in, tg, cfg).loss);
}

} // namespace

BENCHMARK(affine<false>)->Arg(4096)->Arg(65536);
BENCHMARK(affine<true>)->Arg(4096)->Arg(65536);
BENCHMARK(gelu<false>)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(gelu<true>)->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(mix<false>)->Arg(32)->Arg(256);
BENCHMARK(mix<true>)->Arg(32)->Arg(256);
BENCHMARK(matmul<false>)->Arg(16)->Arg(256);
BENCHMARK(matmul<true>)->Arg(16)->Arg(256);
BENCHMARK(toy_batch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();

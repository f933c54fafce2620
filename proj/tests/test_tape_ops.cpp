#include "isfno/errors.hpp"
#include "isfno/ops.hpp"
#include "isfno/tape.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>

using namespace isfno;
using C = std::complex<double>;

namespace {

using Builder = std::function<Var(Tape &, const std::vector<Var> &)>;

// Contracts the output with a fixed random tensor so every output entry is
// exercised, then compares tape gradients with central differences.
void expect_gradients(const Builder &build, const std::vector<Tensor> &inputs, double tol = 1e-7,
                      double h = 1e-6) {
  Tensor probe;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto &x : inputs)
      vars.push_back(tape.constant(x));
    probe = oracle::random_tensor(build(tape, vars).shape(), 99);
  }
  auto scalar = [&](const std::vector<Tensor> &xs) {
    Tape tape;
    std::vector<Var> vars;
    for (const auto &x : xs)
      vars.push_back(tape.constant(x));
    return dot(build(tape, vars).value(), probe);
  };
  Tape tape;
  std::vector<Var> vars;
  for (const auto &x : inputs)
    vars.push_back(tape.leaf(x));
  const Var loss = ops::sum(ops::mul_const(build(tape, vars), probe));
  const Gradients g = tape.backward(loss);
  for (std::size_t a = 0; a < inputs.size(); ++a) {
    auto f = [&](const Tensor &x) {
      auto xs = inputs;
      xs[a] = x;
      return scalar(xs);
    };
    const Tensor fd = oracle::fd_gradient(f, inputs[a], h);
    EXPECT_LT(oracle::max_rel_error(g.of(vars[a]), fd, 1.0), tol) << "input " << a;
  }
}

Tensor rnd(const Shape &s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  return oracle::random_tensor(s, seed, lo, hi);
}

} // namespace

TEST(Tape, LeafConstantAndBackward) {
  Tape tape;
  const Var a = tape.leaf(Tensor({2}, std::vector<double>{1.0, 2.0}));
  const Var c = tape.constant(Tensor({2}, std::vector<double>{3.0, 4.0}));
  EXPECT_TRUE(tape.requires_grad(a));
  EXPECT_FALSE(tape.requires_grad(c));
  const Var loss = ops::sum(ops::mul(a, c));
  EXPECT_DOUBLE_EQ(loss.value()[0], 11.0);
  const Gradients g = tape.backward(loss);
  EXPECT_DOUBLE_EQ(g.of(a)[0], 3.0);
  EXPECT_DOUBLE_EQ(g.of(a)[1], 4.0);
}

TEST(Tape, UnusedLeafHasZeroGradient) {
  Tape tape;
  const Var a = tape.leaf(Tensor({3}, 1.0));
  const Var b = tape.leaf(Tensor({2}, 1.0));
  const Gradients g = tape.backward(ops::sum(a));
  EXPECT_EQ(max_abs(g.of(b)), 0.0);
  EXPECT_EQ(g.of(b).shape(), (Shape{2}));
}

TEST(Tape, ForeignHandleIsRejected) {
  Tape t1, t2;
  const Var a = t1.leaf(Tensor({2}, 1.0));
  const Var b = t2.leaf(Tensor({2}, 1.0));
  EXPECT_THROW(ops::add(a, b), MissingNodeError);
  EXPECT_THROW(t2.check(a), MissingNodeError);
}

TEST(Tape, BackwardNeedsScalarLoss) {
  Tape tape;
  const Var a = tape.leaf(Tensor({2}, 1.0));
  EXPECT_THROW(tape.backward(a), ContractError);
}

TEST(Ops, ElementwiseGradients) {
  const Tensor a = rnd({3, 4}, 1), b = rnd({3, 4}, 2);
  expect_gradients([](Tape &, const auto &v) { return ops::add(v[0], v[1]); }, {a, b});
  expect_gradients([](Tape &, const auto &v) { return ops::sub(v[0], v[1]); }, {a, b});
  expect_gradients([](Tape &, const auto &v) { return ops::mul(v[0], v[1]); }, {a, b});
  expect_gradients([](Tape &, const auto &v) { return ops::scale(v[0], -2.5); }, {a});
  expect_gradients([](Tape &, const auto &v) { return ops::square(v[0]); }, {a});
  expect_gradients([](Tape &, const auto &v) { return ops::gelu(v[0]); }, {a});
  expect_gradients([](Tape &, const auto &v) { return ops::sqrt(v[0]); }, {rnd({5}, 3, 0.5, 2.0)});
  expect_gradients([b](Tape &, const auto &v) { return ops::mul_const(v[0], b); }, {a});
  expect_gradients([b](Tape &, const auto &v) { return ops::sub_const(v[0], b); }, {a});
}

TEST(Ops, SqrtGradientAtZeroIsZero) {
  Tape tape;
  const Var a = tape.leaf(Tensor({2}, std::vector<double>{0.0, 4.0}));
  const Gradients g = tape.backward(ops::sum(ops::sqrt(a)));
  EXPECT_EQ(g.of(a)[0], 0.0);
  EXPECT_DOUBLE_EQ(g.of(a)[1], 0.25);
}

TEST(Ops, ReductionGradients) {
  const Tensor a = rnd({3, 2, 2}, 4);
  expect_gradients([](Tape &, const auto &v) { return ops::sum(v[0]); }, {a});
  expect_gradients([](Tape &, const auto &v) { return ops::mean(v[0]); }, {a});
  expect_gradients([](Tape &, const auto &v) { return ops::sum_squares_per_sample(v[0]); }, {a});
  Tape tape;
  const Var x = tape.constant(a);
  EXPECT_NEAR(ops::mean(x).value()[0], ops::sum(x).value()[0] / 12.0, 1e-15);
  EXPECT_EQ(ops::sum_squares_per_sample(x).shape(), (Shape{3}));
}

TEST(Ops, ChannelAlgebraGradients) {
  const Tensor x = rnd({2, 5, 3}, 5), w = rnd({3, 4}, 6), b = rnd({4}, 7);
  expect_gradients([](Tape &, const auto &v) { return ops::affine_channel(v[0], v[1], v[2]); },
                   {x, w, b});
  expect_gradients([](Tape &, const auto &v) { return ops::affine_channel(v[0], v[1], Var{}); },
                   {x, w});
  expect_gradients([](Tape &, const auto &v) { return ops::slice_channels(v[0], 1, 2); }, {x});
  expect_gradients([](Tape &, const auto &v) { return ops::concat_channels(v[0], v[1]); },
                   {x, rnd({2, 5, 2}, 8)});
  expect_gradients(
      [](Tape &, const auto &v) {
        const std::vector<Var> steps{v[0], v[1], v[0]};
        return ops::stack_steps(steps);
      },
      {rnd({2, 4, 1}, 9), rnd({2, 4, 1}, 10)});
}

TEST(Ops, StackStepsLayout) {
  Tape tape;
  const Var a = tape.constant(Tensor({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6}));
  const Var b = tape.constant(Tensor({2, 3}, std::vector<double>{7, 8, 9, 10, 11, 12}));
  const std::vector<Var> steps{a, b};
  const Tensor s = ops::stack_steps(steps).value();
  EXPECT_EQ(s.shape(), (Shape{2, 2, 3}));
  EXPECT_EQ(s.storage(), (std::vector<double>{1, 2, 3, 7, 8, 9, 4, 5, 6, 10, 11, 12}));
}

TEST(Ops, SpectralGradients) {
  const ModeCutoff cut{4};
  expect_gradients([cut](Tape &, const auto &v) { return ops::fft_forward(v[0], cut); },
                   {rnd({2, 10, 2}, 11)});
  expect_gradients([cut](Tape &, const auto &v) { return ops::fft_inverse(v[0], {10}, cut); },
                   {rnd({2, 4, 2, 2}, 12)});
  const ModeCutoff cut2{3, 2};
  expect_gradients([cut2](Tape &, const auto &v) { return ops::fft_forward(v[0], cut2); },
                   {rnd({1, 6, 6, 2}, 13)});
  expect_gradients(
      [cut2](Tape &, const auto &v) { return ops::fft_inverse(v[0], {6, 6}, cut2); },
      {rnd({1, 5, 2, 2, 2}, 14)});
  expect_gradients([](Tape &, const auto &v) { return ops::spectral_mix(v[0], v[1]); },
                   {rnd({2, 4, 3, 2}, 15), rnd({4, 2, 3, 2}, 16)});
  expect_gradients([](Tape &, const auto &v) { return ops::mode_matmul(v[0], v[1]); },
                   {rnd({4, 3, 3, 2}, 17), rnd({4, 3, 3, 2}, 18)});
  expect_gradients([](Tape &, const auto &v) { return ops::add_identity(v[0], 0.7); },
                   {rnd({4, 3, 3, 2}, 19)});
  expect_gradients([cut2](Tape &, const auto &v) { return ops::hermitize_weights(v[0], cut2); },
                   {rnd({5, 2, 2, 2, 2}, 20)});
}

TEST(Ops, MatrixExpGradient) {
  // Small and large norms exercise zero and several squarings.
  expect_gradients([](Tape &, const auto &v) { return ops::matrix_exp(v[0]); },
                   {rnd({3, 2, 2, 2}, 21, -0.02, 0.02)}, 1e-6);
  expect_gradients([](Tape &, const auto &v) { return ops::matrix_exp(v[0]); },
                   {rnd({2, 3, 3, 2}, 22, -1.5, 1.5)}, 1e-6);
}

TEST(Ops, MatrixExpMatchesDenseReference) {
  const Tensor w = rnd({5, 4, 4, 2}, 23, -2.0, 2.0);
  Tape tape;
  const Tensor e = ops::matrix_exp(tape.constant(w)).value();
  for (std::size_t m = 0; m < 5; ++m) {
    std::vector<C> a(16);
    for (std::size_t i = 0; i < 16; ++i)
      a[i] = {w[(m * 16 + i) * 2], w[(m * 16 + i) * 2 + 1]};
    const auto ref = oracle::dense_expm(a, 4);
    for (std::size_t i = 0; i < 16; ++i) {
      const C got(e[(m * 16 + i) * 2], e[(m * 16 + i) * 2 + 1]);
      EXPECT_LT(std::abs(got - ref[i]), 1e-12 * std::max(1.0, std::abs(ref[i])));
    }
  }
  EXPECT_GT(ops::matrix_exp_squarings(w), 0);
}

TEST(Ops, MatrixExpOfZeroIsExactIdentity) {
  Tape tape;
  const Tensor e = ops::matrix_exp(tape.constant(Tensor({3, 2, 2, 2}))).value();
  for (std::size_t m = 0; m < 3; ++m)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) {
        EXPECT_EQ(e[((m * 2 + i) * 2 + j) * 2], i == j ? 1.0 : 0.0);
        EXPECT_EQ(e[((m * 2 + i) * 2 + j) * 2 + 1], 0.0);
      }
}

TEST(Ops, HermitizeIsSelfAdjointProjection) {
  const ModeCutoff cut{3, 2};
  const Tensor w = rnd({5, 2, 2, 1, 2}, 24), u = rnd({5, 2, 2, 1, 2}, 25);
  Tape tape;
  const Tensor hw = ops::hermitize_weights(tape.constant(w), cut).value();
  const Tensor hhw = ops::hermitize_weights(tape.constant(hw), cut).value();
  const Tensor hu = ops::hermitize_weights(tape.constant(u), cut).value();
  EXPECT_LT(max_abs_diff(hw, hhw), 1e-15);
  EXPECT_NEAR(dot(hw, u), dot(w, hu), 1e-13);
  // Row k1 = 0 of the kappa_2 = 0 column becomes real.
  EXPECT_EQ(hw[1], 0.0);
  // 1d weights: the kappa = 0 mode becomes real, others are unchanged.
  const Tensor w1 = rnd({4, 1, 1, 2}, 26);
  const Tensor h1 = ops::hermitize_weights(tape.constant(w1), {4}).value();
  EXPECT_EQ(h1[1], 0.0);
  EXPECT_EQ(h1[0], w1[0]);
  for (std::size_t i = 2; i < 8; ++i)
    EXPECT_EQ(h1[i], w1[i]);
}

TEST(Ops, PowerModeWeights) {
  const Tensor r = rnd({2, 2, 2}, 27);
  Tape tape;
  const Tensor w =
      ops::power_mode_weights(tape.constant(r), tape.constant(Tensor::scalar(3.0)), 4).value();
  ASSERT_EQ(w.shape(), (Shape{4, 2, 2, 2}));
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t i = 0; i < 8; ++i)
      EXPECT_NEAR(w[k * 8 + i], r[i] * std::pow(static_cast<double>(k) / 4.0, 3.0), 1e-15);
  expect_gradients(
      [](Tape &, const auto &v) { return ops::power_mode_weights(v[0], v[1], 5); },
      {r, Tensor::scalar(2.3)});
}

#include "isfno/checkpoint.hpp"
#include "isfno/errors.hpp"
#include "isfno/model.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

using namespace isfno;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string &name) {
  const fs::path dir = fs::temp_directory_path() / "isfno_test_model";
  fs::create_directories(dir);
  return dir / name;
}

ModelSpec tiny(Variant v, ModeCutoff cutoff = {3}) {
  ModelSpec s;
  s.variant = v;
  s.d_v = 1;
  s.width = 2;
  s.cutoff = std::move(cutoff);
  s.horizon = 2;
  s.hidden = 4;
  s.h_layers = 1;
  s.q_layers = 1;
  s.a_layers = 1;
  s.fg_layers = 1;
  s.seed = 5;
  return s;
}

// Overwrites every parameter with uniform values in [-scale, scale].
void randomize(Model &m, double scale, std::uint64_t seed) {
  for (auto &p : m.parameters()) {
    if (p.name == "A.p")
      continue;
    p.value = oracle::random_tensor(p.value.shape(), seed++, -scale, scale);
  }
}

Tensor sequential_field(const Shape &shape, std::uint64_t seed) {
  return oracle::random_tensor(shape, seed, -1.0, 1.0);
}

} // namespace

TEST(Model, VariantNames) {
  const std::vector<std::string> names{"fno",    "kfno_s",  "kfno_o",   "kfno_p",   "isfno_s",
                                       "isfno_o", "isfno_p", "isfno_pk", "isfno_pk3"};
  ASSERT_EQ(all_variants().size(), names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    EXPECT_EQ(variant_name(all_variants()[i]), names[i]);
    EXPECT_EQ(parse_variant(names[i]), all_variants()[i]);
  }
  try {
    parse_variant("isfno");
    FAIL() << "expected ContractError";
  } catch (const ContractError &e) {
    for (const auto &n : names)
      EXPECT_NE(std::string(e.what()).find(n), std::string::npos) << n;
  }
}

TEST(Model, SpecValidationAndJson) {
  ModelSpec s = tiny(Variant::ISFNO_PrimeK, {3, 3});
  EXPECT_THROW(s.validate(), UnsupportedError);
  s = tiny(Variant::FNO);
  s.horizon = 0;
  EXPECT_THROW(s.validate(), ContractError);
  s = tiny(Variant::KFNO_Circle, {4, 3});
  EXPECT_EQ(to_json(model_spec_from_json(to_json(s))), to_json(s));
  EXPECT_THROW(model_spec_from_json(nlohmann::json{{"variant", "fno"}}), FormatError);
}

TEST(Model, ParameterCountMatchesClosedForm) {
  for (Variant v : all_variants()) {
    const ModelSpec s1 = tiny(v);
    EXPECT_EQ(Model(s1).parameter_count(), expected_parameter_count(s1)) << variant_name(v);
    ModelSpec wide = s1;
    wide.width = 8;
    wide.d_v = 2;
    wide.cutoff = {16};
    wide.hidden = 128;
    wide.h_layers = 3;
    wide.a_layers = 2;
    wide.fg_layers = 2;
    EXPECT_EQ(Model(wide).parameter_count(), expected_parameter_count(wide)) << variant_name(v);
    if (v == Variant::ISFNO_PrimeK || v == Variant::ISFNO_PrimeK3)
      continue;
    ModelSpec s2 = tiny(v, {3, 2});
    EXPECT_EQ(Model(s2).parameter_count(), expected_parameter_count(s2)) << variant_name(v);
  }
  // Hand count for the 1d FNO: L 4, H 30, A 30, Q 30, P 17.
  EXPECT_EQ(expected_parameter_count(tiny(Variant::FNO)), 111u);
  // IS-FNO° with latent width 3: f 56, g 47, A 2 * 2 * 3 * 9.
  EXPECT_EQ(expected_parameter_count(tiny(Variant::ISFNO_Circle)), 56u + 47u + 108u);
}

TEST(Model, ConstructionIsDeterministic) {
  const Model a(tiny(Variant::KFNO_Star)), b(tiny(Variant::KFNO_Star));
  ASSERT_EQ(a.parameters().size(), b.parameters().size());
  for (std::size_t i = 0; i < a.parameters().size(); ++i)
    EXPECT_EQ(a.parameters()[i].value.storage(), b.parameters()[i].value.storage());
  ModelSpec other = tiny(Variant::KFNO_Star);
  other.seed = 6;
  EXPECT_NE(Model(other).at("H0.r").storage(), a.at("H0.r").storage());
}

TEST(Model, RevNetIsInvertible) {
  ModelSpec s = tiny(Variant::ISFNO_Circle);
  s.width = 3;
  s.d_v = 2;
  Model m(s);
  randomize(m, 0.5, 17);
  Tape tape;
  const Bound p(m, tape, false);
  const SubMap f = [&p](Var a) { return submap_f(p, a); };
  const SubMap g = [&p](Var b) { return submap_g(p, b); };
  const Tensor z0 = sequential_field({2, 16, 5}, 3);
  const Var z = tape.constant(z0);
  const Var fwd = revnet_forward(z, 2, f, g);
  EXPECT_GT(max_abs_diff(fwd.value(), z0), 1e-3);
  const Var back = revnet_inverse(fwd, 2, f, g);
  EXPECT_LT(max_abs_diff(back.value(), z0), 1e-11);
  EXPECT_LT(max_abs_diff(revnet_forward(revnet_inverse(z, 2, f, g), 2, f, g).value(), z0), 1e-11);
  EXPECT_THROW(revnet_forward(z, 5, f, g), ShapeError);
}

TEST(Model, FreshIsfnoVariantsAreExactIdentity) {
  for (Variant v : all_variants()) {
    if (!is_isfno(v))
      continue;
    ModelSpec s = tiny(v);
    s.horizon = 5;
    Model m(s);
    m.zero_latent_evolution();
    const Tensor phi = sequential_field({2, 16, 1}, 8);
    const Tensor out = predict(m, phi);
    ASSERT_EQ(out.shape(), (Shape{2, 5, 16, 1}));
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t j = 0; j < 5; ++j)
        for (std::size_t x = 0; x < 16; ++x)
          EXPECT_EQ(out[(b * 5 + j) * 16 + x], phi[b * 16 + x]) << variant_name(v);
  }
}

TEST(Model, TrainedCouplingWithZeroEvolutionIsNearIdentity) {
  Model m(tiny(Variant::ISFNO_Circle));
  randomize(m, 0.5, 23);
  m.zero_latent_evolution();
  const Tensor phi = sequential_field({1, 16, 1}, 9);
  const Tensor out = predict(m, phi);
  for (std::size_t j = 0; j < 2; ++j)
    for (std::size_t x = 0; x < 16; ++x)
      EXPECT_NEAR(out[j * 16 + x], phi[x], 1e-14);
}

TEST(Model, ExponentialLayerSemigroup) {
  const std::size_t d = 3, k = 4, n = 16;
  ModelSpec s = tiny(Variant::ISFNO_Prime, {k});
  s.width = d - 1;
  Model m(s);
  Tensor r = oracle::random_tensor(m.at("A.r1").shape(), 31, -0.3, 0.3);
  for (std::size_t e = 0; e < d * d; ++e)
    r[2 * e + 1] = 0.0;
  m.at("A.r1") = r;
  const Tensor z0 = sequential_field({1, n, d}, 4);
  Tape tape;
  const Bound p(m, tape, false);
  Var z = tape.constant(z0);
  Tensor field({n, d});
  for (int j = 1; j <= 3; ++j) {
    z = exp_fourier_layer(p, "A", z, 0);
    std::copy(z.value().storage().begin(), z.value().storage().end(), field.storage().begin());
    const Tensor ref = oracle::exp_layer_reference(
        Tensor({n, d}, std::vector<double>(z0.storage().begin(), z0.storage().end())), r, j);
    EXPECT_LT(max_abs_diff(field, ref), 1e-10) << "j=" << j;
  }
}

TEST(Model, GradientsMatchFiniteDifferences) {
  for (Variant v : all_variants()) {
    const ModelSpec s = tiny(v);
    Model m(s);
    randomize(m, 0.3, 41);
    const Tensor phi = sequential_field({1, 8, 1}, 12);
    const Tensor probe = oracle::random_tensor({1, 2, 8, 1}, 13);
    auto loss_of = [&](const Model &mm) { return dot(predict(mm, phi), probe); };

    Tape tape;
    const Bound p(m, tape, true);
    const Var out = forward_multi(p, tape.constant(phi));
    const Gradients g = tape.backward(ops::sum(ops::mul_const(out, probe)));

    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < m.parameters().size(); ++i) {
      Model probe_model = m;
      auto f = [&](const Tensor &x) {
        probe_model.parameters()[i].value = x;
        return loss_of(probe_model);
      };
      const Tensor fd = oracle::fd_gradient(f, m.parameters()[i].value, 1e-6);
      const Tensor &an = g.of(p.vars()[i]);
      for (std::size_t e = 0; e < fd.size(); ++e) {
        num += (an[e] - fd[e]) * (an[e] - fd[e]);
        den += fd[e] * fd[e];
      }
    }
    ASSERT_GT(den, 0.0) << variant_name(v);
    EXPECT_LT(std::sqrt(num / den), 1e-5) << variant_name(v);
  }
}

TEST(Model, GradientsIn2d) {
  for (Variant v : {Variant::FNO, Variant::ISFNO_Circle}) {
    Model m(tiny(v, {2, 2}));
    randomize(m, 0.3, 43);
    const Tensor phi = sequential_field({1, 6, 4, 1}, 14);
    const Tensor probe = oracle::random_tensor({1, 2, 6, 4, 1}, 15);
    Tape tape;
    const Bound p(m, tape, true);
    const Gradients g =
        tape.backward(ops::sum(ops::mul_const(forward_multi(p, tape.constant(phi)), probe)));
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < m.parameters().size(); ++i) {
      Model pm = m;
      auto f = [&](const Tensor &x) {
        pm.parameters()[i].value = x;
        return dot(predict(pm, phi), probe);
      };
      const Tensor fd = oracle::fd_gradient(f, m.parameters()[i].value, 1e-6);
      const Tensor &an = g.of(p.vars()[i]);
      for (std::size_t e = 0; e < fd.size(); ++e) {
        num += (an[e] - fd[e]) * (an[e] - fd[e]);
        den += fd[e] * fd[e];
      }
    }
    EXPECT_LT(std::sqrt(num / den), 1e-5) << variant_name(v);
  }
}

TEST(Model, FnoComposesSingleStep) {
  Model m(tiny(Variant::FNO));
  const Tensor phi = sequential_field({1, 8, 1}, 16);
  const Tensor out = predict(m, phi);
  Tape tape;
  const Bound p(m, tape, false);
  const Var one = single_step(p, tape.constant(phi));
  const Var two = single_step(p, one);
  for (std::size_t x = 0; x < 8; ++x) {
    EXPECT_EQ(out[x], one.value()[x]);
    EXPECT_EQ(out[8 + x], two.value()[x]);
  }
}

TEST(Model, ShapeErrorOnWrongInput) {
  const Model m(tiny(Variant::KFNO_Prime));
  EXPECT_THROW(predict(m, Tensor({1, 8, 2})), ShapeError);
  EXPECT_THROW(predict(m, Tensor({8, 1})), ShapeError);
}

TEST(Model, NonFiniteForwardDiverges) {
  const Model m(tiny(Variant::KFNO_Star));
  Tensor phi({1, 8, 1}, 0.1);
  phi[2] = std::nan("");
  EXPECT_THROW(predict(m, phi), DivergenceError);
}

TEST(Model, PseudoInverseProjectRoundTrip) {
  const Tensor w = oracle::random_tensor({5, 2}, 50);
  const Tensor b = oracle::random_tensor({5}, 51);
  const Tensor phi = oracle::random_tensor({3, 7, 2}, 52);
  const Tensor z = affine_lift(phi, w, b);
  EXPECT_EQ(z.shape(), (Shape{3, 7, 5}));
  EXPECT_LT(max_abs_diff(pseudo_inverse_project(z, w, b), phi), 1e-12);
  Tensor rank_one({5, 2});
  for (std::size_t i = 0; i < 5; ++i) {
    rank_one[2 * i] = static_cast<double>(i + 1);
    rank_one[2 * i + 1] = 2.0 * static_cast<double>(i + 1);
  }
  EXPECT_THROW(pseudo_inverse_project(z, rank_one, b), SingularityError);
  EXPECT_THROW(pseudo_inverse_project(z, Tensor({4, 2}), b), ShapeError);
}

TEST(Model, CheckpointRoundTrip) {
  Model m(tiny(Variant::ISFNO_PrimeK));
  randomize(m, 0.5, 60);
  m.at("A.p") = Tensor::scalar(2.25);
  const fs::path p = temp_path("model.isfm");
  save_checkpoint(m, p);
  const Model back = load_checkpoint(p);
  EXPECT_EQ(to_json(back.spec()), to_json(m.spec()));
  ASSERT_EQ(back.parameters().size(), m.parameters().size());
  for (std::size_t i = 0; i < m.parameters().size(); ++i) {
    EXPECT_EQ(back.parameters()[i].name, m.parameters()[i].name);
    EXPECT_EQ(back.parameters()[i].value.storage(), m.parameters()[i].value.storage());
  }
  EXPECT_EQ(read_checkpoint_header(p).at("variant"), "isfno_pk");

  Model same(tiny(Variant::ISFNO_PrimeK));
  load_parameters(same, p);
  EXPECT_EQ(same.at("A.p")[0], 2.25);
  Model other(tiny(Variant::ISFNO_PrimeK3));
  EXPECT_THROW(load_parameters(other, p), FormatError);
}

TEST(Model, CorruptCheckpointsAreRejected) {
  const fs::path p = temp_path("corrupt.isfm");
  save_checkpoint(Model(tiny(Variant::FNO)), p);
  std::string bytes;
  {
    std::ifstream is(p, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(is), {});
  }
  auto write = [](const fs::path &q, const std::string &b) {
    std::ofstream os(q, std::ios::binary);
    os << b;
  };
  EXPECT_EQ(bytes.substr(0, 4), "ISFM");
  write(temp_path("trunc.isfm"), bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(load_checkpoint(temp_path("trunc.isfm")), FormatError);
  std::string bad = bytes;
  bad[1] = 'Q';
  write(temp_path("magic.isfm"), bad);
  EXPECT_THROW(load_checkpoint(temp_path("magic.isfm")), FormatError);
  EXPECT_THROW(load_checkpoint(temp_path("absent.isfm")), IoError);
}

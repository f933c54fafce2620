#include "isfno/model.hpp"

#include "isfno/dataset.hpp"
#include "isfno/errors.hpp"

#include <Eigen/Dense>

#include <cctype>
#include <cmath>
#include <random>

namespace isfno {

namespace {

struct VariantInfo {
  Variant v;
  const char *name;
};

constexpr VariantInfo variant_table[] = {
    {Variant::FNO, "fno"},
    {Variant::KFNO_Star, "kfno_s"},
    {Variant::KFNO_Circle, "kfno_o"},
    {Variant::KFNO_Prime, "kfno_p"},
    {Variant::ISFNO_Star, "isfno_s"},
    {Variant::ISFNO_Circle, "isfno_o"},
    {Variant::ISFNO_Prime, "isfno_p"},
    {Variant::ISFNO_PrimeK, "isfno_pk"},
    {Variant::ISFNO_PrimeK3, "isfno_pk3"},
};

Shape grid_of(const Var &z) {
  const Shape &s = z.value().shape();
  if (s.size() < 3)
    throw ShapeError("field " + shape_string(s) + " must be (B, N..., C)");
  return Shape(s.begin() + 1, s.end() - 1);
}

std::size_t channels_of(const Var &z) { return z.value().shape().back(); }

void check_stage(const Var &v, const char *stage) {
  if (!v.value().all_finite())
    throw DivergenceError(std::string("forward pass diverged in stage ") + stage, std::nan(""));
}

Shape weight_shape(const ModeCutoff &cutoff, std::size_t out, std::size_t in) {
  Shape s = mode_extents(cutoff);
  s.push_back(out);
  s.push_back(in);
  s.push_back(2);
  return s;
}

std::size_t fourier_count(std::size_t d, std::size_t modes) { return d * d + d + 2 * modes * d * d; }
std::size_t mlp_count(std::size_t a, std::size_t h, std::size_t b) { return a * h + h + h * b + b; }

// exp(H(r)) - I for a spectral weight leaf.
Var exp_minus_identity(Var r, const ModeCutoff &cutoff) {
  return ops::add_identity(ops::matrix_exp(ops::hermitize_weights(r, cutoff)), -1.0);
}

// A: the latent evolution map applied once.
Var evolve_latent(const Bound &p, Var z) {
  const ModelSpec &s = p.spec();
  if (s.kdv_layer())
    return exp_fourier_layer_kdv(p, "A", z);
  if (s.exponential())
    return exp_fourier_layer(p, "A", z, s.gamma());
  for (std::size_t i = 0; i < s.a_layers; ++i)
    z = fourier_layer(p, "A" + std::to_string(i), z, true);
  return z;
}

// Outputs of the first `steps` horizon steps.
std::vector<Var> run(const Bound &p, Var phi, std::size_t steps) {
  const ModelSpec &s = p.spec();
  const Shape &in = phi.value().shape();
  if (in.size() != s.cutoff.size() + 2 || in.back() != s.d_v)
    throw ShapeError("model input " + shape_string(in) + " must be (B, N..., " +
                     std::to_string(s.d_v) + ") with " + std::to_string(s.cutoff.size()) +
                     " spatial axes");
  std::vector<Var> out;
  if (s.variant == Variant::FNO) {
    Var cur = phi;
    for (std::size_t j = 0; j < steps; ++j) {
      Var z = ops::affine_channel(cur, p["L.w"], p["L.b"]);
      for (std::size_t i = 0; i < s.h_layers; ++i)
        z = fourier_layer(p, "H" + std::to_string(i), z, true);
      z = evolve_latent(p, z);
      for (std::size_t i = 0; i < s.q_layers; ++i)
        z = fourier_layer(p, "Q" + std::to_string(i), z, true);
      cur = mlp(p, "P", z);
      check_stage(cur, "P");
      out.push_back(cur);
    }
    return out;
  }
  if (!is_isfno(s.variant)) {
    Var z = ops::affine_channel(phi, p["L.w"], p["L.b"]);
    for (std::size_t i = 0; i < s.h_layers; ++i)
      z = fourier_layer(p, "H" + std::to_string(i), z, true);
    check_stage(z, "H");
    for (std::size_t j = 0; j < steps; ++j) {
      z = evolve_latent(p, z);
      check_stage(z, "A");
      Var q = z;
      for (std::size_t i = 0; i < s.q_layers; ++i)
        q = fourier_layer(p, "Q" + std::to_string(i), q, true);
      Var y = mlp(p, "P", q);
      check_stage(y, "P");
      out.push_back(y);
    }
    return out;
  }
  const SubMap f = [&p](Var a) { return submap_f(p, a); };
  const SubMap g = [&p](Var b) { return submap_g(p, b); };
  Var z = revnet_forward(lift_zero_stack(phi, s.latent()), s.d_v, f, g);
  check_stage(z, "R");
  for (std::size_t j = 0; j < steps; ++j) {
    z = evolve_latent(p, z);
    check_stage(z, "A");
    // Leading channels of R^-1: a = a' - g(b').
    Var a = ops::slice_channels(z, 0, s.d_v);
    Var b = ops::slice_channels(z, s.d_v, s.width);
    Var y = ops::sub(a, g(b));
    check_stage(y, "R^-1");
    out.push_back(y);
  }
  return out;
}

} // namespace

std::string variant_name(Variant v) {
  for (const auto &e : variant_table)
    if (e.v == v)
      return e.name;
  return "?";
}

Variant parse_variant(const std::string &name) {
  for (const auto &e : variant_table)
    if (name == e.name)
      return e.v;
  std::string valid;
  for (const auto &e : variant_table)
    valid += std::string(valid.empty() ? "" : ", ") + e.name;
  throw ContractError("unknown variant '" + name + "'; valid names: " + valid);
}

const std::vector<Variant> &all_variants() {
  static const std::vector<Variant> v = [] {
    std::vector<Variant> out;
    for (const auto &e : variant_table)
      out.push_back(e.v);
    return out;
  }();
  return v;
}

bool is_isfno(Variant v) {
  return v == Variant::ISFNO_Star || v == Variant::ISFNO_Circle || v == Variant::ISFNO_Prime ||
         v == Variant::ISFNO_PrimeK || v == Variant::ISFNO_PrimeK3;
}

int ModelSpec::gamma() const {
  return variant == Variant::KFNO_Circle || variant == Variant::ISFNO_Circle ? 1 : 0;
}

bool ModelSpec::exponential() const {
  return variant == Variant::KFNO_Circle || variant == Variant::KFNO_Prime ||
         variant == Variant::ISFNO_Circle || variant == Variant::ISFNO_Prime;
}

bool ModelSpec::kdv_layer() const {
  return variant == Variant::ISFNO_PrimeK || variant == Variant::ISFNO_PrimeK3;
}

void ModelSpec::validate() const {
  if (d_v == 0 || width == 0 || hidden == 0)
    throw ContractError("model widths must be positive");
  if (cutoff.empty() || cutoff.size() > 2)
    throw ContractError("mode cutoff must have 1 or 2 axes");
  for (std::size_t k : cutoff)
    if (k == 0)
      throw ContractError("mode cutoff must be positive");
  if (horizon == 0)
    throw ContractError("horizon must be at least 1");
  if (kdv_layer() && cutoff.size() != 1)
    throw UnsupportedError("the KdV exponential layer is one-dimensional");
}

nlohmann::json to_json(const ModelSpec &s) {
  return {{"variant", variant_name(s.variant)},
          {"d_v", s.d_v},
          {"width", s.width},
          {"cutoff", s.cutoff},
          {"horizon", s.horizon},
          {"hidden", s.hidden},
          {"h_layers", s.h_layers},
          {"q_layers", s.q_layers},
          {"a_layers", s.a_layers},
          {"fg_layers", s.fg_layers},
          {"p_init", s.p_init},
          {"seed", s.seed}};
}

ModelSpec model_spec_from_json(const nlohmann::json &j) {
  try {
    ModelSpec s;
    s.variant = parse_variant(j.at("variant").get<std::string>());
    s.d_v = j.at("d_v");
    s.width = j.at("width");
    s.cutoff = j.at("cutoff").get<ModeCutoff>();
    s.horizon = j.at("horizon");
    s.hidden = j.at("hidden");
    s.h_layers = j.at("h_layers");
    s.q_layers = j.at("q_layers");
    s.a_layers = j.at("a_layers");
    s.fg_layers = j.at("fg_layers");
    s.p_init = j.at("p_init");
    s.seed = j.at("seed");
    return s;
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(std::string("model spec: ") + e.what());
  }
}

std::size_t expected_parameter_count(const ModelSpec &s) {
  s.validate();
  const std::size_t m = mode_count(s.cutoff);
  const std::size_t d = s.latent();
  std::size_t a = 0;
  if (s.kdv_layer())
    a = 2 * d * d + (s.variant == Variant::ISFNO_PrimeK ? 1 : 0);
  else if (s.exponential())
    a = 2 * m * d * d * (s.gamma() ? 2 : 1);
  else
    a = s.a_layers * fourier_count(d, m);

  if (!is_isfno(s.variant))
    return (s.d_v * d + d) + s.h_layers * fourier_count(d, m) + a +
           s.q_layers * fourier_count(d, m) + mlp_count(d, s.hidden, s.d_v);

  const std::size_t w = s.width;
  const std::size_t adapter_f = s.d_v == w ? 0 : s.d_v * w + w;
  const std::size_t f = adapter_f + s.fg_layers * fourier_count(w, m) + mlp_count(w, s.hidden, w);
  const std::size_t g = s.fg_layers * fourier_count(w, m) + mlp_count(w, s.hidden, s.d_v);
  return f + g + a;
}

// -- Model --------------------------------------------------------------------

void Model::add(std::string name, Tensor value) {
  index_.emplace(name, params_.size());
  params_.push_back({std::move(name), std::move(value)});
}

Model::Model(ModelSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::mt19937_64 rng(spec_.seed);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit_uniform(rng()); };
  const ModeCutoff &k = spec_.cutoff;

  auto affine = [&](const std::string &prefix, std::size_t in, std::size_t out, bool zero) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Tensor w({in, out}), b({out});
    if (!zero) {
      for (auto &v : w.values())
        v = uniform(-bound, bound);
      for (auto &v : b.values())
        v = uniform(-bound, bound);
    }
    add(prefix + ".w", std::move(w));
    add(prefix + ".b", std::move(b));
  };
  auto fourier = [&](const std::string &prefix, std::size_t d) {
    affine(prefix, d, d, false);
    Tensor r(weight_shape(k, d, d));
    for (auto &v : r.values())
      v = uniform(0.0, 1.0) / static_cast<double>(d);
    add(prefix + ".r", std::move(r));
  };
  auto perceptron = [&](const std::string &prefix, std::size_t in, std::size_t out, bool zero_last) {
    const double b1 = 1.0 / std::sqrt(static_cast<double>(in));
    const double b2 = 1.0 / std::sqrt(static_cast<double>(spec_.hidden));
    Tensor w1({in, spec_.hidden}), c1({spec_.hidden}), w2({spec_.hidden, out}), c2({out});
    for (auto &v : w1.values())
      v = uniform(-b1, b1);
    for (auto &v : c1.values())
      v = uniform(-b1, b1);
    if (!zero_last) {
      for (auto &v : w2.values())
        v = uniform(-b2, b2);
      for (auto &v : c2.values())
        v = uniform(-b2, b2);
    }
    add(prefix + ".w1", std::move(w1));
    add(prefix + ".b1", std::move(c1));
    add(prefix + ".w2", std::move(w2));
    add(prefix + ".b2", std::move(c2));
  };

  const std::size_t d = spec_.latent();
  if (is_isfno(spec_.variant)) {
    const std::size_t w = spec_.width;
    if (spec_.d_v != w)
      affine("f.adapter", spec_.d_v, w, false);
    for (std::size_t i = 0; i < spec_.fg_layers; ++i)
      fourier("f.F" + std::to_string(i), w);
    // Zero output layers make R start as the exact identity.
    perceptron("f.mlp", w, w, true);
    for (std::size_t i = 0; i < spec_.fg_layers; ++i)
      fourier("g.F" + std::to_string(i), w);
    perceptron("g.mlp", w, spec_.d_v, true);
  } else {
    affine("L", spec_.d_v, d, false);
    for (std::size_t i = 0; i < spec_.h_layers; ++i)
      fourier("H" + std::to_string(i), d);
  }

  if (spec_.kdv_layer()) {
    add("A.r2", Tensor({d, d, 2}));
    if (spec_.variant == Variant::ISFNO_PrimeK)
      add("A.p", Tensor::scalar(spec_.p_init));
  } else if (spec_.exponential()) {
    add("A.r1", Tensor(weight_shape(k, d, d)));
    if (spec_.gamma())
      add("A.r0", Tensor(weight_shape(k, d, d)));
  } else {
    for (std::size_t i = 0; i < spec_.a_layers; ++i)
      fourier("A" + std::to_string(i), d);
  }

  if (!is_isfno(spec_.variant)) {
    for (std::size_t i = 0; i < spec_.q_layers; ++i)
      fourier("Q" + std::to_string(i), d);
    perceptron("P", d, spec_.d_v, false);
  }
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto &p : params_)
    n += p.value.size();
  return n;
}

std::size_t Model::index_of(const std::string &name) const {
  auto it = index_.find(name);
  if (it == index_.end())
    throw ContractError("model has no parameter '" + name + "'");
  return it->second;
}

Tensor &Model::at(const std::string &name) { return params_[index_of(name)].value; }
const Tensor &Model::at(const std::string &name) const { return params_[index_of(name)].value; }

void Model::zero_latent_evolution() {
  for (auto &p : params_)
    if (p.name.starts_with("A.") || (p.name.size() > 1 && p.name[0] == 'A' &&
                                     std::isdigit(static_cast<unsigned char>(p.name[1]))))
      if (p.name != "A.p")
        p.value.fill(0.0);
}

Bound::Bound(const Model &model, Tape &tape, bool trainable) : model_(&model), tape_(&tape) {
  vars_.reserve(model.parameters().size());
  for (const auto &p : model.parameters())
    vars_.push_back(trainable ? tape.leaf(p.value) : tape.constant(p.value));
}

Var Bound::operator[](const std::string &name) const { return vars_[model_->index_of(name)]; }

// -- layers -------------------------------------------------------------------

Var fourier_layer(const Bound &p, const std::string &prefix, Var z, bool alpha) {
  const ModeCutoff &k = p.spec().cutoff;
  const Shape grid = grid_of(z);
  Var spectral = ops::fft_inverse(ops::spectral_mix(ops::fft_forward(z, k), p[prefix + ".r"]),
                                  grid, k);
  Var local = ops::affine_channel(z, p[prefix + ".w"], p[prefix + ".b"]);
  Var y = ops::gelu(ops::add(local, spectral));
  return alpha ? ops::add(z, y) : y;
}

Var exp_fourier_layer(const Bound &p, const std::string &prefix, Var z, int gamma) {
  if (gamma != 0 && gamma != 1)
    throw ContractError("gamma must be 0 or 1");
  const ModeCutoff &k = p.spec().cutoff;
  const Shape grid = grid_of(z);
  Var spec = ops::fft_forward(z, k);
  Var lin = ops::fft_inverse(ops::spectral_mix(spec, exp_minus_identity(p[prefix + ".r1"], k)),
                             grid, k);
  Var out = ops::add(z, lin);
  if (gamma == 1) {
    Var quad = ops::fft_inverse(
        ops::spectral_mix(spec, exp_minus_identity(p[prefix + ".r0"], k)), grid, k);
    out = ops::add(out, ops::square(quad));
  }
  return out;
}

Var exp_fourier_layer_kdv(const Bound &p, const std::string &prefix, Var z) {
  const ModeCutoff &k = p.spec().cutoff;
  if (k.size() != 1)
    throw UnsupportedError("the KdV exponential layer is one-dimensional");
  const Shape grid = grid_of(z);
  Var exponent = p.model().has(prefix + ".p")
                     ? p[prefix + ".p"]
                     : p.tape().constant(Tensor::scalar(p.spec().p_init));
  Var weights = ops::power_mode_weights(p[prefix + ".r2"], exponent, k[0]);
  Var lin = ops::fft_inverse(
      ops::spectral_mix(ops::fft_forward(z, k), exp_minus_identity(weights, k)), grid, k);
  return ops::add(z, lin);
}

Var mlp(const Bound &p, const std::string &prefix, Var z) {
  Var h = ops::gelu(ops::affine_channel(z, p[prefix + ".w1"], p[prefix + ".b1"]));
  return ops::affine_channel(h, p[prefix + ".w2"], p[prefix + ".b2"]);
}

Var revnet_forward(Var z, std::size_t d_a, const SubMap &f, const SubMap &g) {
  const std::size_t c = channels_of(z);
  if (d_a == 0 || d_a >= c)
    throw ShapeError("RevNet split " + std::to_string(d_a) + " invalid for " + std::to_string(c) +
                     " channels");
  Var a = ops::slice_channels(z, 0, d_a);
  Var b = ops::slice_channels(z, d_a, c - d_a);
  Var b_new = ops::add(b, f(a));
  Var a_new = ops::add(a, g(b_new));
  return ops::concat_channels(a_new, b_new);
}

Var revnet_inverse(Var z, std::size_t d_a, const SubMap &f, const SubMap &g) {
  const std::size_t c = channels_of(z);
  if (d_a == 0 || d_a >= c)
    throw ShapeError("RevNet split " + std::to_string(d_a) + " invalid for " + std::to_string(c) +
                     " channels");
  Var a_new = ops::slice_channels(z, 0, d_a);
  Var b_new = ops::slice_channels(z, d_a, c - d_a);
  Var a = ops::sub(a_new, g(b_new));
  Var b = ops::sub(b_new, f(a));
  return ops::concat_channels(a, b);
}

Var submap_f(const Bound &p, Var a) {
  const ModelSpec &s = p.spec();
  if (channels_of(a) != s.d_v)
    throw ShapeError("f expects " + std::to_string(s.d_v) + " input channels");
  Var z = s.d_v == s.width ? a : ops::affine_channel(a, p["f.adapter.w"], p["f.adapter.b"]);
  for (std::size_t i = 0; i < s.fg_layers; ++i)
    z = fourier_layer(p, "f.F" + std::to_string(i), z, false);
  return mlp(p, "f.mlp", z);
}

Var submap_g(const Bound &p, Var b) {
  const ModelSpec &s = p.spec();
  if (channels_of(b) != s.width)
    throw ShapeError("g expects " + std::to_string(s.width) + " input channels");
  Var z = b;
  for (std::size_t i = 0; i < s.fg_layers; ++i)
    z = fourier_layer(p, "g.F" + std::to_string(i), z, false);
  return mlp(p, "g.mlp", z);
}

Var lift_zero_stack(Var phi, std::size_t d_z) {
  const std::size_t d_v = channels_of(phi);
  if (d_z < d_v)
    throw ShapeError("lift target width is smaller than the field width");
  if (d_z == d_v)
    return phi;
  Shape s = phi.value().shape();
  s.back() = d_z - d_v;
  return ops::concat_channels(phi, phi.tape()->constant(Tensor(s)));
}

Var project_truncate(Var z, std::size_t d_v) { return ops::slice_channels(z, 0, d_v); }

Tensor pseudo_inverse_project(const Tensor &z, const Tensor &w, const Tensor &b) {
  if (w.rank() != 2 || b.size() != w.dim(0) || z.rank() < 1 || z.shape().back() != w.dim(0))
    throw ShapeError("pseudo_inverse_project: z " + shape_string(z.shape()) + ", w " +
                     shape_string(w.shape()) + ", b " + shape_string(b.shape()));
  const Eigen::Index dz = static_cast<Eigen::Index>(w.dim(0));
  const Eigen::Index dv = static_cast<Eigen::Index>(w.dim(1));
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      wm(w.data(), dz, dv);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(wm);
  lu.setThreshold(1e-12);
  if (lu.rank() < dv)
    throw SingularityError("lift matrix is rank deficient");
  const Eigen::MatrixXd normal = wm.transpose() * wm;
  const Eigen::MatrixXd pinv = normal.ldlt().solve(Eigen::MatrixXd(wm.transpose()));
  Shape out_shape = z.shape();
  out_shape.back() = w.dim(1);
  Tensor out(out_shape);
  const std::size_t points = z.size() / w.dim(0);
  Eigen::VectorXd r(dz);
  for (std::size_t p = 0; p < points; ++p) {
    for (Eigen::Index i = 0; i < dz; ++i)
      r(i) = z[p * w.dim(0) + static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)];
    const Eigen::VectorXd phi = pinv * r;
    for (Eigen::Index i = 0; i < dv; ++i)
      out[p * w.dim(1) + static_cast<std::size_t>(i)] = phi(i);
  }
  return out;
}

Tensor affine_lift(const Tensor &phi, const Tensor &w, const Tensor &b) {
  if (w.rank() != 2 || b.size() != w.dim(0) || phi.rank() < 1 || phi.shape().back() != w.dim(1))
    throw ShapeError("affine_lift: incompatible shapes");
  Shape s = phi.shape();
  s.back() = w.dim(0);
  Tensor out(s);
  const std::size_t dz = w.dim(0), dv = w.dim(1);
  const std::size_t points = phi.size() / dv;
  for (std::size_t p = 0; p < points; ++p)
    for (std::size_t i = 0; i < dz; ++i) {
      double acc = b[i];
      for (std::size_t j = 0; j < dv; ++j)
        acc += w[i * dv + j] * phi[p * dv + j];
      out[p * dz + i] = acc;
    }
  return out;
}

Var forward_multi(const Bound &p, Var phi) {
  const auto steps = run(p, phi, p.spec().horizon);
  return ops::stack_steps(steps);
}

Var single_step(const Bound &p, Var phi) { return run(p, phi, 1).front(); }

Tensor predict(const Model &model, const Tensor &phi) {
  Tape tape;
  Bound bound(model, tape, false);
  return forward_multi(bound, tape.constant(phi)).value();
}

} // namespace isfno

#pragma once

// Operator-learning model zoo: Fourier layers, exponential Fourier layers,
// RevNet coupling, lift/projection maps and the nine variant compositions.
//
// Fields are channel-last (B, N..., C). Parameters live in a Model as named
// tensors; a forward pass first binds them onto a tape (as leaves when
// training, as constants otherwise).

#include "isfno/fft.hpp"
#include "isfno/ops.hpp"
#include "isfno/tape.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

namespace isfno {

enum class Variant {
  FNO,
  KFNO_Star,    // kFNO*: A = two vanilla Fourier layers
  KFNO_Circle,  // kFNO°: exponential layer, gamma = 1
  KFNO_Prime,   // kFNO': exponential layer, gamma = 0
  ISFNO_Star,
  ISFNO_Circle,
  ISFNO_Prime,
  ISFNO_PrimeK, // learnable exponent p
  ISFNO_PrimeK3 // p = 3
};

/// CLI names: fno, kfno_s, kfno_o, kfno_p, isfno_s, isfno_o, isfno_p, isfno_pk, isfno_pk3.
std::string variant_name(Variant v);
Variant parse_variant(const std::string &name);
const std::vector<Variant> &all_variants();
bool is_isfno(Variant v);

struct ModelSpec {
  Variant variant = Variant::ISFNO_Circle;
  std::size_t d_v = 1;
  /// d_z for FNO/kFNO; d_z* for IS-FNO (latent width d_v + width).
  std::size_t width = 8;
  ModeCutoff cutoff{16};
  std::size_t horizon = 5;
  std::size_t hidden = 128;
  std::size_t h_layers = 3;
  std::size_t q_layers = 1;
  std::size_t a_layers = 2;
  std::size_t fg_layers = 2;
  double p_init = 3.0;
  std::uint64_t seed = 0;

  std::size_t latent() const { return is_isfno(variant) ? d_v + width : width; }
  /// 1 when the exponential layer carries the squared term.
  int gamma() const;
  bool exponential() const;
  bool kdv_layer() const;
  void validate() const;
};

nlohmann::json to_json(const ModelSpec &spec);
ModelSpec model_spec_from_json(const nlohmann::json &j);

/// Closed-form parameter count of a spec.
std::size_t expected_parameter_count(const ModelSpec &spec);

struct Parameter {
  std::string name;
  Tensor value;
};

class Model {
public:
  /// Allocates and initializes every parameter from spec.seed.
  explicit Model(ModelSpec spec);

  const ModelSpec &spec() const noexcept { return spec_; }
  std::vector<Parameter> &parameters() noexcept { return params_; }
  const std::vector<Parameter> &parameters() const noexcept { return params_; }
  std::size_t parameter_count() const;
  bool has(const std::string &name) const { return index_.contains(name); }
  Tensor &at(const std::string &name);
  const Tensor &at(const std::string &name) const;
  std::size_t index_of(const std::string &name) const;
  /// Zeroes every parameter of the latent evolution map A.
  void zero_latent_evolution();

private:
  void add(std::string name, Tensor value);

  ModelSpec spec_;
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Parameters of one model placed on one tape.
class Bound {
public:
  Bound(const Model &model, Tape &tape, bool trainable);
  const Model &model() const { return *model_; }
  const ModelSpec &spec() const { return model_->spec(); }
  Tape &tape() const { return *tape_; }
  Var operator[](const std::string &name) const;
  const std::vector<Var> &vars() const { return vars_; }

private:
  const Model *model_;
  Tape *tape_;
  std::vector<Var> vars_;
};

using SubMap = std::function<Var(Var)>;

/// alpha z + gelu(w z + b + F^-1{r F z}) with prefix.w, prefix.b, prefix.r.
Var fourier_layer(const Bound &p, const std::string &prefix, Var z, bool alpha);
/// z + F^-1{[exp(r') - I] F z} + gamma (F^-1{[exp(r°) - I] F z})^2.
Var exp_fourier_layer(const Bound &p, const std::string &prefix, Var z, int gamma);
/// Linear exponential layer with weights r'' (k / K)^p, 1d only.
Var exp_fourier_layer_kdv(const Bound &p, const std::string &prefix, Var z);
/// Two-layer perceptron with GELU between the layers.
Var mlp(const Bound &p, const std::string &prefix, Var z);

/// a' = a + g(b + f(a)), b' = b + f(a) with a the first d_a channels.
Var revnet_forward(Var z, std::size_t d_a, const SubMap &f, const SubMap &g);
/// a = a' - g(b'), b = b' - f(a).
Var revnet_inverse(Var z, std::size_t d_a, const SubMap &f, const SubMap &g);
Var submap_f(const Bound &p, Var a);
Var submap_g(const Bound &p, Var b);

/// Appends d_z - d_v zero channels.
Var lift_zero_stack(Var phi, std::size_t d_z);
/// Leading d_v channels.
Var project_truncate(Var z, std::size_t d_v);

/// Least-squares inverse of z = phi w^T + b for w of shape (d_z, d_v):
/// phi = (w^T w)^-1 w^T (z - b) per point. z: (..., d_z) -> (..., d_v).
Tensor pseudo_inverse_project(const Tensor &z, const Tensor &w, const Tensor &b);
/// z = phi w^T + b per point.
Tensor affine_lift(const Tensor &phi, const Tensor &w, const Tensor &b);

/// Predictions at t_1..t_n as (B, n, N..., d_v). FNO composes its single
/// step n times.
Var forward_multi(const Bound &p, Var phi);
/// First-step prediction (B, N..., d_v).
Var single_step(const Bound &p, Var phi);
/// forward_multi evaluated without gradients.
Tensor predict(const Model &model, const Tensor &phi);

} // namespace isfno

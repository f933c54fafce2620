#pragma once

// Reverse-mode differentiation tape.
//
// A Tape owns every value computed through it. `Var` is a cheap handle
// (tape pointer + node id). Records are appended in evaluation order, so the
// id order is a topological order and backward() is a single reverse sweep.
// One tape per training step; tapes are never shared across threads.

#include "isfno/tensor.hpp"

#include <deque>
#include <functional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace isfno {

class Tape;

class Var {
public:
  Var() = default;

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape *tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }

  const Tensor &value() const;
  const Shape &shape() const { return value().shape(); }

private:
  friend class Tape;
  Var(Tape *tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape *tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Receives d(loss)/d(output) and accumulates into the input gradients.
/// Entries of `grad_in` are null for inputs that do not need a gradient.
using BackwardFn = std::function<void(const Tensor &grad_out, std::span<Tensor *const> grad_in)>;

/// Leaf gradients keyed by node id.
class Gradients {
public:
  bool has(Var v) const { return grads_.contains(v.id()); }
  /// Gradient of a leaf; zero-filled when the loss does not depend on it.
  const Tensor &of(Var v) const;

private:
  friend class Tape;
  std::unordered_map<std::size_t, Tensor> grads_;
  std::unordered_map<std::size_t, Tensor> zeros_;
};

class Tape {
public:
  Tape() = default;
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  /// Differentiable leaf (a parameter or an input we want gradients for).
  Var leaf(Tensor value);
  /// Value that never receives a gradient.
  Var constant(Tensor value);

  /// Appends a primitive record. `backward` may be empty when no input needs
  /// a gradient; the record is then a constant.
  Var record(std::string_view op, Tensor value, std::vector<Var> inputs, BackwardFn backward);

  const Tensor &value(Var v) const;
  bool requires_grad(Var v) const;
  std::string_view op_name(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Throws MissingNodeError unless `v` belongs to this tape.
  void check(Var v) const;

  /// d(loss)/d(leaf) for every leaf. `loss` must be a single-element tensor.
  Gradients backward(Var loss);

private:
  struct Node {
    std::string_view op;
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    bool is_leaf = false;
  };

  std::deque<Node> nodes_;
};

} // namespace isfno

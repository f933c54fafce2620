#include "isfno/tape.hpp"

#include "isfno/errors.hpp"

namespace isfno {

const Tensor &Var::value() const {
  if (!tape_)
    throw MissingNodeError("variable is not attached to a tape");
  return tape_->value(*this);
}

const Tensor &Gradients::of(Var v) const {
  if (auto it = grads_.find(v.id()); it != grads_.end())
    return it->second;
  if (auto it = zeros_.find(v.id()); it != zeros_.end())
    return it->second;
  throw MissingNodeError("no gradient recorded for node " + std::to_string(v.id()));
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.op = "leaf";
  n.value = std::move(value);
  n.requires_grad = true;
  n.is_leaf = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Tape::check(Var v) const {
  if (v.tape() != this || v.id() >= nodes_.size())
    throw MissingNodeError("variable does not belong to this tape");
}

Var Tape::record(std::string_view op, Tensor value, std::vector<Var> inputs,
                 BackwardFn backward) {
  Node n;
  n.op = op;
  n.value = std::move(value);
  bool any = false;
  for (const Var &in : inputs) {
    check(in);
    n.inputs.push_back(in.id());
    any = any || nodes_[in.id()].requires_grad;
  }
  if (any && backward) {
    n.requires_grad = true;
    n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Tensor &Tape::value(Var v) const {
  check(v);
  return nodes_[v.id()].value;
}

bool Tape::requires_grad(Var v) const {
  check(v);
  return nodes_[v.id()].requires_grad;
}

std::string_view Tape::op_name(Var v) const {
  check(v);
  return nodes_[v.id()].op;
}

Gradients Tape::backward(Var loss) {
  check(loss);
  const Node &root = nodes_[loss.id()];
  if (root.value.size() != 1)
    throw ContractError("backward() needs a scalar loss, got shape " +
                        shape_string(root.value.shape()));

  std::vector<Tensor> grads(loss.id() + 1);
  grads[loss.id()] = Tensor(root.value.shape(), 1.0);

  Gradients out;
  std::vector<Tensor *> in_ptrs;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node &node = nodes_[id];
    if (!node.requires_grad || grads[id].empty())
      continue;
    if (node.is_leaf) {
      out.grads_.emplace(id, std::move(grads[id]));
      continue;
    }
    in_ptrs.clear();
    for (std::size_t in : node.inputs) {
      Node &src = nodes_[in];
      if (!src.requires_grad) {
        in_ptrs.push_back(nullptr);
        continue;
      }
      if (grads[in].empty())
        grads[in] = Tensor(src.value.shape(), 0.0);
      in_ptrs.push_back(&grads[in]);
    }
    node.backward(grads[id], in_ptrs);
    grads[id] = Tensor();
  }
  for (std::size_t id = 0; id <= loss.id(); ++id)
    if (nodes_[id].is_leaf && !out.grads_.contains(id))
      out.zeros_.emplace(id, Tensor(nodes_[id].value.shape(), 0.0));
  return out;
}

} // namespace isfno

#include "tripose/nn/graph.hpp"

#include "tripose/errors.hpp"

namespace tripose::nn {

Parameter::Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

const Tensor& Var::value() const { return graph_->value(id_); }

Tensor Var::grad() const {
  const Tensor& g = graph_->grad(id_);
  return g.empty() && !value().empty() ? Tensor(value().shape()) : g;
}

Var Graph::push(Node node) {
  if (check_finite_ && !node.value.all_finite()) {
    fail(ErrorCode::NonFiniteLoss, "non-finite value at node " + std::to_string(nodes_.size()));
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::parameter(Parameter& p) {
  Node n;
  n.value = p.value;
  n.parameter = &p;
  n.requires_grad = true;
  return push(std::move(n));
}

Var Graph::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  for (const Var& v : inputs) {
    if (v.graph_ != this) fail(ErrorCode::InvalidArgument, "input recorded on a different graph");
    n.requires_grad = n.requires_grad || nodes_[v.id_].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

Var Graph::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
}

Tensor& Graph::accumulate_grad(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape());
    n.has_grad = true;
  }
  return n.grad;
}

void Graph::backward(Var loss) {
  if (loss.graph_ != this) fail(ErrorCode::InvalidArgument, "loss recorded on a different graph");
  if (value(loss.id_).size() != 1) {
    fail(ErrorCode::ShapeMismatch, "backward needs a scalar loss, got " + to_string(value(loss.id_).shape()));
  }
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  accumulate_grad(loss.id_)[0] = 1.0;
  for (std::size_t id = loss.id_ + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.has_grad || !n.requires_grad) continue;
    if (check_finite_ && !n.grad.all_finite()) {
      fail(ErrorCode::NonFiniteLoss, "non-finite gradient at node " + std::to_string(id));
    }
    if (n.backward) n.backward(*this, id);
    if (n.parameter) {
      auto& pg = n.parameter->grad;
      if (pg.shape() != n.value.shape()) pg = Tensor(n.value.shape());
      pg.matrix() += n.grad.matrix();
    }
  }
}

}  // namespace tripose::nn

#pragma once

#include "tripose/nn/tensor.hpp"

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace tripose::nn {

/// A trainable tensor with its accumulated gradient. Owned by a model;
/// graphs only hold pointers for the duration of one step.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor value);

  std::string name;
  Tensor value;
  Tensor grad;

  void zero_grad() { grad.fill(0.0); }
};

class Graph;

/// Handle to a node recorded on a Graph.
class Var {
 public:
  Var() = default;

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  /// Gradient after Graph::backward; zeros if the node was not reached.
  Tensor grad() const;

 private:
  friend class Graph;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Tape for reverse-mode differentiation. Nodes are appended in topological
/// order, so backward is a single reverse sweep.
class Graph {
 public:
  /// Receives the graph and the id of the node whose gradient is ready.
  using BackwardFn = std::function<void(Graph&, std::size_t)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var parameter(Parameter& p);

  /// Appends an op result. `backward` must read grad(self) and accumulate
  /// into accumulate_grad(input). It is dropped when no input needs a gradient.
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Zero-initialized on first use.
  Tensor& accumulate_grad(std::size_t id);

  /// Seeds d loss / d loss = 1, sweeps the tape and adds parameter
  /// gradients into Parameter::grad. `loss` must hold a single element.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  /// When on, every recorded value and every gradient is checked and a
  /// non-finite entry raises NonFiniteLoss.
  void set_check_finite(bool on) { check_finite_ = on; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    Parameter* parameter = nullptr;
    bool requires_grad = false;
    bool has_grad = false;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
  bool check_finite_ = false;
};

}  // namespace tripose::nn

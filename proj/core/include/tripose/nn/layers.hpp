#pragma once

#include "tripose/nn/graph.hpp"
#include "tripose/nn/ops.hpp"

#include <random>
#include <string>
#include <vector>

namespace tripose::nn {

using Rng = std::mt19937_64;

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(std::size_t fan_out, std::size_t fan_in, Rng& rng);
/// Q factor of a Gaussian matrix, signs fixed by diag(R).
Tensor orthogonal(std::size_t n, Rng& rng);

class Linear {
 public:
  Linear() = default;
  /// `zero_init` starts weights and bias at zero.
  Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng, bool zero_init = false);

  Var forward(Graph& g, Var x);
  void collect(std::vector<Parameter*>& out);

  std::size_t in_features() const { return weight_.value.dim(1); }
  std::size_t out_features() const { return weight_.value.dim(0); }

 private:
  Parameter weight_;
  Parameter bias_;
};

/// GRU layer (reset gate applied before U_h):
///   z = s(W_z x + U_z h + b_z), r = s(W_r x + U_r h + b_r),
///   c = tanh(W_h x + U_h (r * h) + b_h), h' = (1 - z) * h + z * c.
class GruLayer {
 public:
  GruLayer() = default;
  GruLayer(const std::string& name, std::size_t in, std::size_t hidden, Rng& rng);

  /// [T, B, in] -> [T, B, hidden], h_0 = 0.
  Var forward(Graph& g, Var sequence);
  void collect(std::vector<Parameter*>& out);

  std::size_t input_size() const { return w_z_.value.dim(1); }
  std::size_t hidden_size() const { return w_z_.value.dim(0); }

 private:
  Parameter w_z_, w_r_, w_h_;
  Parameter u_z_, u_r_, u_h_;
  Parameter b_z_, b_r_, b_h_;
};

/// x + relu(fc2(relu(fc1(x)))), width preserved.
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(const std::string& name, std::size_t width, Rng& rng);

  Var forward(Graph& g, Var x);
  void collect(std::vector<Parameter*>& out);

 private:
  Linear fc1_;
  Linear fc2_;
};

/// [T, B, H] -> [B, 2H]: elementwise max over time, then mean over time.
Var pool_concat(Var sequence);

}  // namespace tripose::nn

#pragma once

#include "tripose/nn/graph.hpp"

#include <span>
#include <vector>

namespace tripose::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  long step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
};

/// Bias-corrected Adam over a fixed parameter list.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig config = {});

  /// One update from the gradients currently stored on the parameters.
  void step();
  void zero_grad();

  const AdamState& state() const { return state_; }
  const AdamConfig& config() const { return config_; }

 private:
  std::vector<Parameter*> params_;
  AdamConfig config_;
  AdamState state_;
};

/// w <- w - lr * g
void sgd_step(std::span<Parameter* const> params, double lr);
/// Elementwise clamp to [-bound, bound].
void clip_parameters(std::span<Parameter* const> params, double bound);
void zero_grad(std::span<Parameter* const> params);

}  // namespace tripose::nn

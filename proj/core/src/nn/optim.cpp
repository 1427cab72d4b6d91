#include "tripose/nn/optim.hpp"

#include "tripose/errors.hpp"

#include <algorithm>
#include <cmath>

namespace tripose::nn {

Adam::Adam(std::vector<Parameter*> params, AdamConfig config) : params_(std::move(params)), config_(config) {
  if (!(config_.lr > 0.0)) fail(ErrorCode::InvalidArgument, "Adam learning rate must be > 0");
  for (const Parameter* p : params_) {
    state_.first_moment.emplace_back(p->value.shape());
    state_.second_moment.emplace_back(p->value.shape());
  }
}

void Adam::step() {
  ++state_.step;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state_.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state_.step));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    if (p.grad.shape() != p.value.shape()) fail(ErrorCode::ShapeMismatch, "gradient shape of " + p.name);
    Tensor& m = state_.first_moment[k];
    Tensor& v = state_.second_moment[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p.value[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

void Adam::zero_grad() { nn::zero_grad(params_); }

void sgd_step(std::span<Parameter* const> params, double lr) {
  for (Parameter* p : params) {
    if (p->grad.shape() != p->value.shape()) fail(ErrorCode::ShapeMismatch, "gradient shape of " + p->name);
    p->value.matrix() -= lr * p->grad.matrix();
  }
}

void clip_parameters(std::span<Parameter* const> params, double bound) {
  if (!(bound > 0.0)) fail(ErrorCode::InvalidArgument, "clip bound must be > 0");
  for (Parameter* p : params)
    for (auto& v : p->value.values()) v = std::clamp(v, -bound, bound);
}

void zero_grad(std::span<Parameter* const> params) {
  for (Parameter* p : params) {
    if (p->grad.shape() != p->value.shape()) p->grad = Tensor(p->value.shape());
    p->grad.fill(0.0);
  }
}

}  // namespace tripose::nn

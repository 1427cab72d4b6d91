#include "tripose/nn/layers.hpp"

#include "tripose/errors.hpp"

#include <Eigen/QR>

#include <cmath>

namespace tripose::nn {

Tensor glorot_uniform(std::size_t fan_out, std::size_t fan_in, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t(Shape{fan_out, fan_in});
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

Tensor orthogonal(std::size_t n, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index c = 0; c < a.cols(); ++c)
    for (Eigen::Index r = 0; r < a.rows(); ++r) a(r, c) = gauss(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < q.cols(); ++i)
    if (r(i, i) < 0.0) q.col(i) *= -1.0;
  return Tensor::from_matrix(q);
}

Linear::Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng, bool zero_init)
    : weight_(name + ".weight", zero_init ? Tensor(Shape{out, in}) : glorot_uniform(out, in, rng)),
      bias_(name + ".bias", Tensor(Shape{out})) {}

Var Linear::forward(Graph& g, Var x) { return linear(x, g.parameter(weight_), g.parameter(bias_)); }

void Linear::collect(std::vector<Parameter*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

GruLayer::GruLayer(const std::string& name, std::size_t in, std::size_t hidden, Rng& rng)
    : w_z_(name + ".W_z", glorot_uniform(hidden, in, rng)),
      w_r_(name + ".W_r", glorot_uniform(hidden, in, rng)),
      w_h_(name + ".W_h", glorot_uniform(hidden, in, rng)),
      u_z_(name + ".U_z", orthogonal(hidden, rng)),
      u_r_(name + ".U_r", orthogonal(hidden, rng)),
      u_h_(name + ".U_h", orthogonal(hidden, rng)),
      b_z_(name + ".b_z", Tensor(Shape{hidden})),
      b_r_(name + ".b_r", Tensor(Shape{hidden})),
      b_h_(name + ".b_h", Tensor(Shape{hidden})) {}

Var GruLayer::forward(Graph& g, Var sequence) {
  const Shape s = sequence.shape();
  if (s.size() != 3 || s[2] != input_size()) {
    fail(ErrorCode::ShapeMismatch, "GRU expects [T, B, " + std::to_string(input_size()) + "], got " + to_string(s));
  }
  const std::size_t steps = s[0], batch = s[1], hidden = hidden_size();
  // Input projections for every step in one product each.
  const Var xz = linear(sequence, g.parameter(w_z_), g.parameter(b_z_));
  const Var xr = linear(sequence, g.parameter(w_r_), g.parameter(b_r_));
  const Var xh = linear(sequence, g.parameter(w_h_), g.parameter(b_h_));
  const Var uz = g.parameter(u_z_), ur = g.parameter(u_r_), uh = g.parameter(u_h_);

  Var h = g.constant(Tensor(Shape{batch, hidden}));
  std::vector<Var> states;
  states.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const Var z = sigmoid(time_step(xz, t) + linear(h, uz));
    const Var r = sigmoid(time_step(xr, t) + linear(h, ur));
    const Var c = tanh(time_step(xh, t) + linear(r * h, uh));
    h = h + z * (c - h);
    states.push_back(h);
  }
  return stack_time(states);
}

void GruLayer::collect(std::vector<Parameter*>& out) {
  for (Parameter* p : {&w_z_, &w_r_, &w_h_, &u_z_, &u_r_, &u_h_, &b_z_, &b_r_, &b_h_}) out.push_back(p);
}

ResidualBlock::ResidualBlock(const std::string& name, std::size_t width, Rng& rng)
    : fc1_(name + ".fc1", width, width, rng), fc2_(name + ".fc2", width, width, rng) {}

Var ResidualBlock::forward(Graph& g, Var x) { return x + relu(fc2_.forward(g, relu(fc1_.forward(g, x)))); }

void ResidualBlock::collect(std::vector<Parameter*>& out) {
  fc1_.collect(out);
  fc2_.collect(out);
}

Var pool_concat(Var sequence) { return concat({max_pool_time(sequence), mean_pool_time(sequence)}); }

}  // namespace tripose::nn

#include "support/oracles.hpp"
#include "tripose/errors.hpp"
#include "tripose/nn/layers.hpp"
#include "tripose/nn/optim.hpp"

#include <doctest.h>

using namespace tripose;
using namespace tripose::nn;

namespace {

/// Random tensor with no entry closer than `gap` to zero (keeps relu and
/// norms away from their kinks).
Tensor away_from_zero(Shape shape, std::mt19937_64& rng, double gap = 1e-2) {
  Tensor t = oracle::random_tensor(std::move(shape), rng);
  for (auto& v : t.values())
    while (std::abs(v) < gap) v = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
  return t;
}

double weighted_check(const std::function<Var(Graph&, Var)>& op, Parameter& x, std::mt19937_64& rng) {
  Tensor w;
  {
    Graph g;
    w = oracle::random_tensor(op(g, g.constant(x.value)).shape(), rng);
  }
  return oracle::gradient_error([&](Graph& g) { return sum(op(g, g.parameter(x)) * g.constant(w)); }, {&x});
}

}  // namespace

TEST_CASE("sum gives an all-ones gradient") {
  std::mt19937_64 rng(1);
  Parameter x("x", oracle::random_tensor({3, 4}, rng));
  x.zero_grad();
  Graph g;
  g.backward(sum(g.parameter(x)));
  for (double v : x.grad.values()) CHECK(v == 1.0);
}

TEST_CASE("disconnected parameter keeps a zero gradient") {
  std::mt19937_64 rng(2);
  Parameter used("used", oracle::random_tensor({2, 2}, rng));
  Parameter unused("unused", oracle::random_tensor({2, 2}, rng));
  used.zero_grad();
  unused.zero_grad();
  Graph g;
  (void)g.parameter(unused);
  g.backward(sum(g.parameter(used)));
  for (double v : unused.grad.values()) CHECK(v == 0.0);
}

TEST_CASE("every op passes the finite-difference check") {
  std::mt19937_64 rng(3);
  Parameter a("a", away_from_zero({3, 4}, rng));
  Parameter b("b", away_from_zero({3, 4}, rng));
  Parameter m("m", oracle::random_tensor({4, 5}, rng));
  Parameter row("row", oracle::random_tensor({4}, rng));
  Parameter seq("seq", oracle::random_tensor({5, 2, 3}, rng));
  Parameter wide("wide", oracle::random_tensor({3, 2, 4}, rng));

  CHECK(weighted_check([&](Graph& g, Var x) { return matmul(x, g.parameter(m)); }, a, rng) < 1e-4);
  CHECK(weighted_check([&](Graph& g, Var x) { return matmul(g.parameter(b), reshape(x, {4, 3})); }, a, rng) < 1e-4);
  Parameter weight("weight", oracle::random_tensor({5, 4}, rng));
  Parameter bias("bias", oracle::random_tensor({5}, rng));
  CHECK(weighted_check([&](Graph& g, Var x) { return linear(x, g.parameter(weight), g.parameter(bias)); }, a, rng) < 1e-4);
  CHECK(oracle::gradient_error([&](Graph& g) {
          return sum(tanh(linear(g.parameter(wide), g.parameter(weight), g.parameter(bias))));
        }, {&wide, &weight, &bias}) < 1e-4);
  CHECK(weighted_check([&](Graph& g, Var x) { return add(x, g.parameter(b)); }, a, rng) < 1e-4);
  CHECK(weighted_check([&](Graph& g, Var x) { return add(x, g.parameter(row)); }, a, rng) < 1e-4);
  CHECK(weighted_check([&](Graph& g, Var x) { return sub(x, g.parameter(b)); }, a, rng) < 1e-4);
  CHECK(weighted_check([&](Graph& g, Var x) { return mul(x, g.parameter(b)); }, a, rng) < 1e-4);
  CHECK(weighted_check([](Graph&, Var x) { return scale(x, -2.5); }, a, rng) < 1e-4);
  CHECK(weighted_check([](Graph&, Var x) { return add_scalar(x, 0.3); }, a, rng) < 1e-4);
  CHECK(weighted_check([](Graph&, Var x) { return sigmoid(x); }, a, rng) < 1e-4);
  CHECK(weighted_check([](Graph&, Var x) { return tanh(x); }, a, rng) < 1e-4);
  CHECK(weighted_check([](Graph&, Var x) { return relu(x); }, a, rng) < 1e-4);
  CHECK(weighted_check([&](Graph& g, Var x) { return concat({x, g.parameter(b), x}); }, a, rng) < 1e-4);
  CHECK(weighted_check([](Graph&, Var x) { return slice(x, 1, 3); }, a, rng) < 1e-4);
  CHECK(weighted_check([](Graph&, Var x) { return reshape(x, {2, 6}); }, a, rng) < 1e-4);
  CHECK(weighted_check([](Graph&, Var x) { return time_step(x, 3); }, seq, rng) < 1e-4);
  CHECK(weighted_check([](Graph&, Var x) { return stack_time({time_step(x, 1), time_step(x, 4)}); }, seq, rng) < 1e-4);
  CHECK(weighted_check([](Graph&, Var x) { return max_pool_time(x); }, seq, rng) < 1e-4);
  CHECK(weighted_check([](Graph&, Var x) { return mean_pool_time(x); }, seq, rng) < 1e-4);
  CHECK(weighted_check([](Graph&, Var x) { return row_norm(x); }, a, rng) < 1e-4);
  CHECK(weighted_check([](Graph&, Var x) { return frobenius_norm(x); }, a, rng) < 1e-4);
  CHECK(weighted_check([](Graph&, Var x) { return mean(x); }, a, rng) < 1e-4);
}

TEST_CASE("max-pool routes the gradient to the first maximum on ties") {
  Parameter x("x", Tensor({3, 1, 2}, {1.0, 5.0, 1.0, 2.0, 0.5, 5.0}));
  x.zero_grad();
  Graph g;
  g.backward(sum(max_pool_time(g.parameter(x))));
  CHECK(x.grad.values()[0] == 1.0);
  CHECK(x.grad.values()[2] == 0.0);
  CHECK(x.grad.values()[1] == 1.0);
  CHECK(x.grad.values()[5] == 0.0);
}

TEST_CASE("shape errors surface while recording") {
  Graph g;
  const Var a = g.constant(Tensor({2, 3}));
  const Var b = g.constant(Tensor({4, 2}));
  try {
    (void)matmul(a, b);
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
  CHECK_THROWS_AS(add(a, b), Error);
}

TEST_CASE("non-finite checking") {
  Graph g;
  g.set_check_finite(true);
  const Var a = g.constant(Tensor({1}, 1e308));
  try {
    (void)scale(a, 1e10);
    FAIL("expected NonFiniteLoss");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteLoss);
  }
}

TEST_CASE("GRU with zero parameters stays at zero") {
  Rng rng(4);
  GruLayer gru("gru", 3, 4, rng);
  std::vector<Parameter*> params;
  gru.collect(params);
  for (auto* p : params) p->value.fill(0.0);
  std::mt19937_64 r(5);
  Graph g;
  const Var out = gru.forward(g, g.constant(oracle::random_tensor({6, 2, 3}, r)));
  for (double v : out.value().values()) CHECK(v == 0.0);
}

TEST_CASE("GRU single step equals one hand-evaluated cell") {
  Rng rng(6);
  GruLayer gru("gru", 3, 4, rng);
  std::vector<Parameter*> p;
  gru.collect(p);  // W_z W_r W_h U_z U_r U_h b_z b_r b_h
  std::mt19937_64 r(7);
  for (std::size_t k = 6; k < 9; ++k) p[k]->value = oracle::random_tensor({4}, r);
  const Tensor x = oracle::random_tensor({1, 1, 3}, r);
  Graph g;
  const Var out = gru.forward(g, g.constant(x));
  const Eigen::Vector3d xv(x[0], x[1], x[2]);
  auto mat = [&](std::size_t k) { return Eigen::MatrixXd(p[k]->value.matrix()); };
  auto vec = [&](std::size_t k) { return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(p[k]->value.data(), 4)); };
  const auto sig = [](const Eigen::VectorXd& v) { return (1.0 / (1.0 + (-v.array()).exp())).matrix().eval(); };
  const Eigen::VectorXd z = sig(mat(0) * xv + vec(6));
  const Eigen::VectorXd c = (mat(2) * xv + vec(8)).array().tanh().matrix();
  const Eigen::VectorXd h = z.cwiseProduct(c);
  for (int i = 0; i < 4; ++i) CHECK(out.value()[static_cast<std::size_t>(i)] == doctest::Approx(h(i)).epsilon(1e-14));
}

TEST_CASE("GRU backward matches finite differences") {
  Rng rng(8);
  GruLayer gru("gru", 3, 4, rng);
  std::vector<Parameter*> params;
  gru.collect(params);
  std::mt19937_64 r(9);
  for (std::size_t k = 6; k < 9; ++k) params[k]->value = oracle::random_tensor({4}, r, -0.5, 0.5);
  Parameter x("x", oracle::random_tensor({3, 2, 3}, r));
  const Tensor w = oracle::random_tensor({3, 2, 4}, r);
  params.push_back(&x);
  CHECK(oracle::gradient_error([&](Graph& g) { return sum(gru.forward(g, g.parameter(x)) * g.constant(w)); }, params) <
        1e-4);
}

TEST_CASE("pool_concat") {
  Graph g;
  const Tensor one({1, 1, 3}, {0.1, -0.2, 0.3});
  const Var p = pool_concat(g.constant(one));
  CHECK(p.value() == Tensor({1, 6}, {0.1, -0.2, 0.3, 0.1, -0.2, 0.3}));
  const Tensor constant({4, 1, 2}, {0.5, 0.7, 0.5, 0.7, 0.5, 0.7, 0.5, 0.7});
  const Var q = pool_concat(g.constant(constant));
  for (std::size_t i = 0; i < 4; ++i) CHECK(q.value()[i] == doctest::Approx(i % 2 ? 0.7 : 0.5).epsilon(1e-15));

  std::mt19937_64 r(10);
  Parameter x("x", oracle::random_tensor({5, 1, 3}, r));
  const Tensor w = oracle::random_tensor({1, 6}, r);
  CHECK(oracle::gradient_error([&](Graph& gg) { return sum(pool_concat(gg.parameter(x)) * gg.constant(w)); }, {&x}) <
        1e-4);
}

TEST_CASE("residual block and linear layer gradients") {
  Rng rng(11);
  ResidualBlock block("block", 6, rng);
  Linear fc("fc", 6, 3, rng);
  std::vector<Parameter*> params;
  block.collect(params);
  fc.collect(params);
  std::mt19937_64 r(12);
  for (auto* p : params)
    if (p->name.ends_with(".bias")) p->value = oracle::random_tensor(p->value.shape(), r, -0.3, 0.3);
  Parameter x("x", oracle::random_tensor({4, 6}, r));
  params.push_back(&x);
  const Tensor w = oracle::random_tensor({4, 3}, r);
  CHECK(oracle::gradient_error([&](Graph& g) { return sum(fc.forward(g, block.forward(g, g.parameter(x))) * g.constant(w)); },
                               params, 1e-5, 1e-7) < 1e-4);
}

TEST_CASE("Adam") {
  Parameter p("p", Tensor({1}, 1.0));
  Adam adam({&p});
  p.grad.fill(0.0);
  adam.step();
  CHECK(p.value[0] == 1.0);

  Parameter q("q", Tensor({1}, 1.0));
  Adam first({&q});
  q.grad[0] = 0.5;
  first.step();
  // m = 0.05, v = 0.00025; bias-corrected m_hat = 0.5, v_hat = 0.25.
  CHECK(q.value[0] == doctest::Approx(1.0 - 1e-3 * 0.5 / (0.5 + 1e-8)).epsilon(1e-15));

  Parameter w("w", Tensor({1}, 1.0));
  Adam bowl({&w}, AdamConfig{0.01});
  for (int i = 0; i < 2000; ++i) {
    w.grad[0] = 2.0 * w.value[0];
    bowl.step();
  }
  CHECK(std::abs(w.value[0]) < 1e-3);
}

TEST_CASE("sgd and clipping") {
  Parameter p("p", Tensor({3}, {0.5, 0.0, -0.003}));
  p.grad = Tensor({3}, {0.0, 1.0, 0.0});
  std::vector<Parameter*> ps{&p};
  sgd_step(ps, 0.1);
  CHECK(p.value[1] == doctest::Approx(-0.1));
  clip_parameters(ps, 0.01);
  CHECK(p.value[0] == 0.01);
  CHECK(p.value[1] == -0.01);
  CHECK(p.value[2] == -0.003);
  const Tensor once = p.value;
  clip_parameters(ps, 0.01);
  CHECK(p.value == once);
  CHECK_THROWS_AS(clip_parameters(ps, 0.0), Error);
}

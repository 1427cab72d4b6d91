#include "support/oracles.hpp"
#include "tripose/adversarial.hpp"
#include "tripose/errors.hpp"
#include "tripose/nn/ops.hpp"
#include "tripose/nn/optim.hpp"

#include <doctest.h>

using namespace tripose;
using nn::Graph;
using nn::Tensor;
using nn::Var;

namespace {

std::vector<std::vector<Pose3D>> cloud(std::mt19937_64& rng, int batch, int length, double offset, double sigma = 50.0) {
  std::normal_distribution<double> n(0.0, sigma);
  std::vector<std::vector<Pose3D>> out(static_cast<std::size_t>(batch));
  for (auto& seq : out) {
    for (int t = 0; t < length; ++t) {
      Pose3D p(4, 3);
      for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = offset + n(rng);
      seq.push_back(p);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("zero critic scores zero; single poses are accepted") {
  CriticModel critic(4, 6, 1);
  for (auto* p : critic.parameters()) p->value.fill(0.0);
  std::mt19937_64 rng(2);
  const auto seqs = cloud(rng, 1, 3, 100.0);
  CHECK(critic.score(seqs[0]) == 0.0);
  CriticModel other(4, 6, 1);
  CHECK(std::isfinite(other.score({seqs[0][0]})));
  CHECK_THROWS_AS(other.score({Pose3D::Zero(5, 3)}), Error);
}

TEST_CASE("critic gradient") {
  CriticModel critic(4, 5, 3, 10.0, 100.0);  // loose clip so weights are not saturated
  std::mt19937_64 rng(4);
  const Tensor x = stack_sequences(cloud(rng, 3, 4, 0.0));
  CHECK(oracle::gradient_error([&](Graph& g) { return nn::sum(critic.forward(g, g.constant(x))); }, critic.parameters(),
                               1e-5, 1e-9) < 1e-4);
}

TEST_CASE("critic step clips and ascends the gap") {
  CriticModel critic(4, 8, 5);
  CHECK(critic.max_abs_parameter() <= 0.01);
  std::mt19937_64 rng(6);

  const Tensor same = stack_sequences(cloud(rng, 8, 3, 0.0));
  const auto params = critic.parameters();
  std::vector<Tensor> before;
  for (auto* p : params) before.push_back(p->value);
  CHECK(critic_step(critic, same, same, 1.0).gap == 0.0);
  for (std::size_t k = 0; k < params.size(); ++k) CHECK(params[k]->value == before[k]);

  std::vector<double> gaps;
  for (int step = 0; step < 50; ++step) {
    const Tensor real = stack_sequences(cloud(rng, 16, 3, 300.0));
    const Tensor fake = stack_sequences(cloud(rng, 16, 3, -300.0));
    gaps.push_back(critic_step(critic, real, fake, 0.05).gap);
    CHECK(critic.max_abs_parameter() <= 0.01);
  }
  CHECK(gaps.back() > gaps.front());
}

TEST_CASE("generator loss sign and constant critic") {
  CriticModel critic(4, 6, 7);
  for (auto* p : critic.parameters()) p->value.fill(0.0);
  critic.parameters().back()->value.fill(0.004);  // head bias: constant score
  std::mt19937_64 rng(8);
  nn::Parameter fake("fake", stack_sequences(cloud(rng, 4, 2, 10.0)));
  fake.zero_grad();
  Graph g;
  const Var loss = generator_adversarial_loss(critic, g.parameter(fake));
  CHECK(loss.value().item() == doctest::Approx(-0.004).epsilon(1e-12));
  g.backward(loss);
  for (double v : fake.grad.values()) CHECK(v == 0.0);
}

TEST_CASE("adversarial trainer reduces to single-view reprojection when disabled") {
  SceneConfig cfg;
  cfg.frames = 40;
  const auto scene = make_scene(cfg);
  AdversarialConfig ac;
  ac.network.hidden = 6;
  ac.network.width = 8;
  ac.network.window = 3;
  ac.critic_hidden = 6;
  ac.critic_sequence = 2;
  ac.epochs = 1;
  ac.batch_size = 16;
  ac.use_adversarial = false;
  const auto r = train_adversarial({observe_view(scene, 0)}, {}, ac);
  for (const auto& s : r.steps) {
    CHECK(s.adversarial == 0.0);
    CHECK(s.total == s.reprojection);
  }

  ac.use_adversarial = true;
  std::vector<Pose3D> archive;
  for (int f = 0; f < 40; ++f) archive.push_back(scene.camera_pose(1, f));
  auto adv = train_adversarial({observe_view(scene, 0)}, archive, ac);
  for (const auto& s : adv.steps) CHECK(std::abs(s.total - (s.reprojection + s.adversarial)) < 1e-12);
  CHECK(adv.critic.max_abs_parameter() <= 0.01);
  CHECK_THROWS_AS(train_adversarial({observe_view(scene, 0)}, {archive.front()}, ac), Error);
}

#include "tripose/epipolar.hpp"
#include "tripose/kinematics.hpp"
#include "tripose/lifting.hpp"
#include "tripose/nn/layers.hpp"
#include "tripose/nn/ops.hpp"
#include "tripose/triangulation.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace tripose;

namespace {

struct Pairs {
  std::vector<Correspondence> normalized;
  std::vector<Correspondence> pixels;
  SyntheticScene scene;
};

Pairs make_pairs(int frames, double noise, double outlier_rate) {
  SceneConfig cfg;
  cfg.frames = frames;
  cfg.seed = 1;
  cfg.observation.noise_sigma_px = noise;
  Pairs p{{}, {}, make_scene(cfg)};
  const auto& ka = p.scene.cameras[0].intrinsics;
  const auto& kb = p.scene.cameras[1].intrinsics;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0), pix(0.0, 1000.0);
  for (int f = 0; f < frames; ++f) {
    const auto a = project(p.scene, 0, f).keypoints, b = project(p.scene, 1, f).keypoints;
    for (Eigen::Index j = 0; j < a.rows(); ++j) {
      Correspondence c{a.row(j).transpose(), b.row(j).transpose()};
      if (u(rng) < outlier_rate) c = {{pix(rng), pix(rng)}, {pix(rng), pix(rng)}};
      p.pixels.push_back(c);
      p.normalized.push_back({ka.normalize(c.x1), kb.normalize(c.x2)});
    }
  }
  return p;
}

void BM_EightPoint(benchmark::State& state) {
  const auto p = make_pairs(static_cast<int>(state.range(0)), 1.0, 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_fundamental_8pt(p.normalized));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(p.normalized.size()));
}
BENCHMARK(BM_EightPoint)->Arg(1)->Arg(30)->Arg(270);

void BM_Ransac(benchmark::State& state) {
  const auto p = make_pairs(270, 2.0, static_cast<double>(state.range(0)) / 100.0);
  auto rc = RansacConfig::for_focals(1000.0, 1000.0);
  for (auto _ : state) benchmark::DoNotOptimize(ransac_fundamental(p.normalized, {}, rc));
}
BENCHMARK(BM_Ransac)->Arg(0)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_CalibratePair(benchmark::State& state) {
  const auto p = make_pairs(270, 2.0, 0.2);
  const auto& ka = p.scene.cameras[0].intrinsics;
  const auto& kb = p.scene.cameras[1].intrinsics;
  const auto rc = RansacConfig::for_focals(ka.fx, kb.fx);
  for (auto _ : state) benchmark::DoNotOptimize(calibrate_pair(p.pixels, {}, ka, kb, rc));
}
BENCHMARK(BM_CalibratePair)->Unit(benchmark::kMillisecond);

void BM_TriangulatePolynomial(benchmark::State& state) {
  const auto p = make_pairs(10, 1.0, 0.0);
  const auto& ca = p.scene.cameras[0];
  const auto& cb = p.scene.cameras[1];
  const auto [r, t] = relative_pose(ca, cb);
  const RelativePose pose{r, t};
  const Mat3 f = fundamental_from_pose(pose, ca.intrinsics, cb.intrinsics);
  const auto p1 = projection_matrix(ca.intrinsics, Mat3::Identity(), Vec3::Zero());
  const auto p2 = projection_matrix(cb.intrinsics, r, t);
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& c = p.pixels[i++ % p.pixels.size()];
    benchmark::DoNotOptimize(triangulate_polynomial(c.x1, c.x2, f, p1, p2));
  }
}
BENCHMARK(BM_TriangulatePolynomial);

void BM_TriangulateLinear(benchmark::State& state) {
  const auto p = make_pairs(10, 1.0, 0.0);
  const auto [r, t] = relative_pose(p.scene.cameras[0], p.scene.cameras[1]);
  const auto p1 = projection_matrix(p.scene.cameras[0].intrinsics, Mat3::Identity(), Vec3::Zero());
  const auto p2 = projection_matrix(p.scene.cameras[1].intrinsics, r, t);
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& c = p.pixels[i++ % p.pixels.size()];
    benchmark::DoNotOptimize(triangulate_linear(c.x1, c.x2, p1, p2));
  }
}
BENCHMARK(BM_TriangulateLinear);

void BM_GruForwardBackward(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  nn::Rng rng(3);
  nn::GruLayer gru("gru", 34, hidden, rng);
  nn::Tensor x({27, 64, 34});
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& v : x.values()) v = u(rng);
  for (auto _ : state) {
    nn::Graph g;
    g.backward(nn::mean(gru.forward(g, g.constant(x))));
  }
}
BENCHMARK(BM_GruForwardBackward)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_LiftingForward(benchmark::State& state) {
  NetworkConfig cfg;
  cfg.hidden = 64;
  cfg.width = 128;
  cfg.window = static_cast<int>(state.range(0));
  LiftingModel model(cfg, 4);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  nn::Tensor x({static_cast<std::size_t>(cfg.window), 64, 34});
  for (auto& v : x.values()) v = u(rng);
  for (auto _ : state) {
    nn::Graph g;
    benchmark::DoNotOptimize(model.forward(g, g.constant(x)).value().data());
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_LiftingForward)->Arg(1)->Arg(27)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();

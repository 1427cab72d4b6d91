#include "support/oracles.hpp"
#include "tripose/errors.hpp"
#include "tripose/nn/ops.hpp"
#include "tripose/reprojection.hpp"

#include <doctest.h>

using namespace tripose;
using nn::Graph;
using nn::Parameter;
using nn::Shape;
using nn::Tensor;
using nn::Var;

namespace {

Tensor flatten(const Eigen::MatrixXd& m) {
  Tensor t(Shape{1, static_cast<std::size_t>(m.size())});
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) t[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
  return t;
}

Pose3D random_pose(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 300.0);
  Pose3D p(17, 3);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = n(rng);
  return root_centered(p);
}

}  // namespace

TEST_CASE("weak-perspective projection examples") {
  Pose3D p(1, 3);
  p << 1, 2, 3;
  CHECK((weak_perspective_project(p, Mat3::Identity()) - Eigen::RowVector2d(1, 2)).norm() < 1e-15);
  const Mat3 ry = rotation_about_axis(Vec3::UnitY(), M_PI / 2);
  CHECK((weak_perspective_project(p, ry) - Eigen::RowVector2d(3, 2)).norm() < 1e-12);
}

TEST_CASE("weak-perspective Jacobian matches finite differences") {
  std::mt19937_64 rng(1);
  Parameter pose("pose", oracle::random_tensor({2, 12}, rng));
  Parameter rot("rot", oracle::random_tensor({2, 9}, rng));
  Parameter w("w", oracle::random_tensor({2, 8}, rng));
  const auto f = [&](Graph& g) {
    return nn::sum(ops::rotate_project(g.parameter(pose), g.parameter(rot)) * g.constant(w.value));
  };
  CHECK(oracle::gradient_error(f, {&pose, &rot}) < 1e-6);
}

TEST_CASE("normalize_2d") {
  std::mt19937_64 rng(2);
  Pose2D p = Pose2D::Random(17, 2) * 100.0;
  const Pose2D n = normalize_2d(p);
  CHECK(n.row(0).norm() == 0.0);
  CHECK(std::abs(n.norm() - 1.0) < 1e-12);
  CHECK((normalize_2d(n) - n).norm() < 1e-12);
  Pose2D moved = 7.0 * p;
  moved.rowwise() += Eigen::RowVector2d(100, 50);
  CHECK((normalize_2d(moved) - n).norm() < 1e-12);
  try {
    (void)normalize_2d(Pose2D::Constant(17, 2, 4.0));
    FAIL("expected ZeroExtent");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroExtent);
  }

  Parameter x("x", oracle::random_tensor({3, 10}, rng));
  Parameter w("w", oracle::random_tensor({3, 10}, rng));
  const auto f = [&](Graph& g) { return nn::sum(ops::normalize_2d(g.parameter(x)) * g.constant(w.value)); };
  CHECK(oracle::gradient_error(f, {&x}) < 1e-4);
}

TEST_CASE("single-view loss vanishes under similarity") {
  std::mt19937_64 rng(3);
  const Pose3D pose = random_pose(rng);
  Pose2D obs = 0.2 * weak_perspective_project(pose, Mat3::Identity());
  obs.rowwise() += Eigen::RowVector2d(500, 480);
  CHECK(reprojection_loss({pose}, {obs}, {{Mat3::Identity()}}) < 1e-12);
}

TEST_CASE("two exact views give zero loss; a depth flip is caught only with two views") {
  SceneConfig cfg;
  cfg.frames = 3;
  cfg.seed = 7;
  cfg.mode = ProjectionMode::WeakPerspective;
  const auto scene = make_scene(cfg);
  const auto rot = oracle::rotations(scene);
  const Pose3D p0 = scene.camera_pose(0, 1);
  const Pose3D p1 = scene.camera_pose(1, 1);
  const Pose2D o0 = project(scene, 0, 1).keypoints;
  const Pose2D o1 = project(scene, 1, 1).keypoints;
  CHECK(reprojection_loss({p0, p1}, {o0, o1}, rot) < 1e-9);

  // Mirror depth in each camera frame: identical single-view projections.
  Pose3D f0 = p0, f1 = p1;
  f0.col(2) *= -1.0;
  f1.col(2) *= -1.0;
  CHECK(reprojection_loss({f0}, {o0}, {{Mat3::Identity()}}) < 1e-12);
  CHECK(reprojection_loss({f0, f1}, {o0, o1}, rot) > 1e-3);
}

TEST_CASE("reprojection loss is invariant to similarity of the observations") {
  std::mt19937_64 rng(4);
  const Pose3D a = random_pose(rng), b = random_pose(rng);
  const Mat3 r = rotation_about_axis(Vec3(0.3, 1, 0.1).normalized(), 0.7);
  const std::vector<std::vector<Mat3>> rot{{Mat3::Identity(), r}, {r.transpose(), Mat3::Identity()}};
  Pose2D oa = Pose2D::Random(17, 2), ob = Pose2D::Random(17, 2);
  const double base = reprojection_loss({a, b}, {oa, ob}, rot);
  CHECK(base >= 0.0);
  Pose2D ob2 = 3.5 * ob;
  ob2.rowwise() += Eigen::RowVector2d(-20, 8);
  CHECK(std::abs(reprojection_loss({a, b}, {oa, ob2}, rot) - base) < 1e-12);
}

TEST_CASE("batched loss matches the plain loss and differentiates") {
  std::mt19937_64 rng(5);
  const Pose3D a = random_pose(rng), b = random_pose(rng);
  const Mat3 r = rotation_about_axis(Vec3(1, 0.2, -0.4).normalized(), 1.1);
  const std::vector<std::vector<Mat3>> rot{{Mat3::Identity(), r}, {r.transpose(), Mat3::Identity()}};
  const Pose2D oa = Pose2D::Random(17, 2), ob = Pose2D::Random(17, 2);
  Eigen::VectorXd mask = Eigen::VectorXd::Ones(17);
  mask(5) = 0.0;
  const double plain = reprojection_loss({a, b}, {oa, ob}, rot, {Eigen::VectorXd::Ones(17), mask});

  Parameter pa("a", flatten(a)), pb("b", flatten(b)), pr("r", flatten(r));
  const std::vector<Tensor> obs{flatten(normalize_2d(oa)), flatten(normalize_2d(ob))};
  Tensor ma(Shape{1, 34}, 1.0), mb(Shape{1, 34}, 1.0);
  mb[10] = mb[11] = 0.0;
  const std::vector<Tensor> masks{ma, mb};
  const auto f = [&](Graph& g) {
    const Var rab = g.parameter(pr);
    const Var rba = ops::transpose_rotations(rab);
    const std::vector<Var> preds{g.parameter(pa), g.parameter(pb)};
    return ops::reprojection_loss(preds, obs, [&](std::size_t i, std::size_t) { return i == 0 ? rab : rba; }, masks);
  };
  {
    Graph g;
    CHECK(f(g).value().item() == doctest::Approx(plain).epsilon(1e-12));
  }
  CHECK(oracle::gradient_error(f, {&pa, &pb, &pr}) < 1e-4);
}

#include "support/oracles.hpp"
#include "tripose/errors.hpp"
#include "tripose/kinematics.hpp"
#include "tripose/triangulation.hpp"

#include <doctest.h>

using namespace tripose;

TEST_CASE("skeleton template is a tree with positive bones") {
  const auto sk = Skeleton::h36m17();
  CHECK(sk.joint_count() == 17);
  CHECK(sk.parents()[0] == -1);
  for (int j = 1; j < sk.joint_count(); ++j) CHECK(sk.parents()[static_cast<std::size_t>(j)] < j);
  for (double l : sk.bone_lengths()) CHECK(l > 0.0);
  CHECK_THROWS_AS(Skeleton("bad", {"a", "b"}, {-1, 1}, Pose3D::Ones(2, 3)), Error);
  CHECK_THROWS_AS(Skeleton("bad", {"a", "b"}, {-1, 0}, Pose3D::Zero(2, 3)), Error);
}

TEST_CASE("generated motion keeps template bone lengths") {
  const auto sk = Skeleton::h36m17();
  const auto one = generate_motion(sk, 1, 0);
  REQUIRE(one.size() == 1);
  const auto measured = sk.measure_bones(one[0]);
  const auto expected = sk.bone_lengths();
  for (std::size_t b = 0; b < measured.size(); ++b) CHECK(std::abs(measured[b] - expected[b]) < 1e-9);

  for (const auto& p : generate_motion(sk, 60, 4)) {
    const auto m = sk.measure_bones(p);
    for (std::size_t b = 0; b < m.size(); ++b) CHECK(std::abs(m[b] - expected[b]) < 1e-9);
  }
}

TEST_CASE("motion is deterministic per seed") {
  const auto sk = Skeleton::h36m17();
  const auto a = generate_motion(sk, 27, 0);
  const auto b = generate_motion(sk, 27, 0);
  const auto c = generate_motion(sk, 27, 1);
  for (std::size_t f = 0; f < a.size(); ++f) CHECK(a[f] == b[f]);
  CHECK(a[5] != c[5]);
}

TEST_CASE("motion respects the velocity cap") {
  const auto sk = Skeleton::h36m17();
  MotionConfig cfg;
  const auto motion = generate_motion(sk, 100, 1, cfg);
  double worst = 0.0;
  for (std::size_t f = 1; f < motion.size(); ++f)
    worst = std::max(worst, (motion[f] - motion[f - 1]).rowwise().norm().maxCoeff());
  CHECK(worst < cfg.velocity_cap_mm_per_frame);
  CHECK(max_joint_displacement(motion) == doctest::Approx(worst).epsilon(1e-12));
}

TEST_CASE("projection examples") {
  Camera cam;
  cam.intrinsics = {1000, 1000, 500, 500};
  CHECK((project_point(cam, ProjectionMode::FullPerspective, Vec3(0, 0, 5000)) - Vec2(500, 500)).norm() < 1e-12);

  Camera weak;
  weak.intrinsics = {1, 1, 0, 0};
  weak.weak_scale = 1.0;
  CHECK((project_point(weak, ProjectionMode::WeakPerspective, Vec3(1, 2, 3)) - Vec2(1, 2)).norm() < 1e-12);

  CHECK_THROWS_AS(project_point(cam, ProjectionMode::FullPerspective, Vec3(0, 0, -1)), Error);
}

TEST_CASE("noiseless observations have unit confidence; occlusion lowers it") {
  SceneConfig cfg;
  cfg.frames = 5;
  auto scene = make_scene(cfg);
  const auto p = project(scene, 0, 2);
  CHECK((p.confidences.array() == 1.0).all());

  scene.observation.noise_sigma_px = 2.0;
  const auto q = project(scene, 1, 3, {4, 7});
  CHECK(q.confidences(4) <= 0.5);
  CHECK(q.confidences(7) <= 0.5);
  CHECK((q.confidences.array() >= 0.0).all());
  CHECK((q.confidences.array() <= 1.0).all());
  const auto again = project(scene, 1, 3, {4, 7});
  CHECK(again.keypoints == q.keypoints);
}

TEST_CASE("scene ground truth satisfies rotation and cheirality invariants") {
  SceneConfig cfg;
  cfg.views = 4;
  cfg.frames = 30;
  cfg.seed = 12;
  const auto scene = make_scene(cfg);
  for (const auto& c : scene.cameras) {
    CHECK((c.rotation.transpose() * c.rotation - Mat3::Identity()).norm() < 1e-9);
    CHECK(std::abs(c.rotation.determinant() - 1.0) < 1e-9);
    for (const auto& pose : scene.motion)
      for (Eigen::Index j = 0; j < pose.rows(); ++j) CHECK(c.to_camera(pose.row(j).transpose()).z() > 0.0);
  }
}

TEST_CASE("full-perspective projection back-projects through two cameras") {
  SceneConfig cfg;
  cfg.frames = 3;
  cfg.seed = 5;
  const auto scene = make_scene(cfg);
  const auto& a = scene.cameras[0];
  const auto& b = scene.cameras[1];
  const ProjectionMatrix pa = projection_matrix(a.intrinsics, a.rotation, a.translation);
  const ProjectionMatrix pb = projection_matrix(b.intrinsics, b.rotation, b.translation);
  for (Eigen::Index j = 0; j < 17; ++j) {
    const Vec3 x = scene.motion[1].row(j).transpose();
    const Vec3 rec = triangulate_linear(project_point(a, scene.mode, x), project_point(b, scene.mode, x), pa, pb);
    CHECK((rec - x).norm() < 1e-6);
  }
}

TEST_CASE("observe_view packs every frame") {
  SceneConfig cfg;
  cfg.frames = 11;
  const auto scene = make_scene(cfg);
  const auto v = observe_view(scene, 1);
  CHECK(v.view_id == 1);
  CHECK(v.frame_count() == 11);
  CHECK(v.joint_count() == 17);
  CHECK_NOTHROW(v.validate(17));
  CHECK(v.frames[4] == project(scene, 1, 4).keypoints);
}

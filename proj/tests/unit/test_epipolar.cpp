#include "support/oracles.hpp"
#include "tripose/epipolar.hpp"
#include "tripose/errors.hpp"
#include "tripose/kinematics.hpp"

#include <doctest.h>

#include <Eigen/SVD>

using namespace tripose;

namespace {

std::vector<Correspondence> scene_correspondences(const SyntheticScene& s, int frames) {
  std::vector<Correspondence> out;
  for (int f = 0; f < frames; ++f) {
    const auto a = project(s, 0, f).keypoints;
    const auto b = project(s, 1, f).keypoints;
    for (Eigen::Index j = 0; j < a.rows(); ++j) out.push_back({a.row(j).transpose(), b.row(j).transpose()});
  }
  return out;
}

std::vector<Correspondence> translation_pairs(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0), depth(3.0, 8.0);
  std::vector<Correspondence> out;
  for (int i = 0; i < n; ++i) {
    const Vec3 x(u(rng), u(rng), depth(rng));
    const Vec3 y = x + Vec3(1, 0, 0);
    out.push_back({x.head<2>() / x.z(), y.head<2>() / y.z()});
  }
  return out;
}

}  // namespace

TEST_CASE("8-point on pure translation gives the cross-product matrix") {
  const auto pts = translation_pairs(20, 1);
  const auto f = estimate_fundamental_8pt(pts);
  Mat3 expected;
  expected << 0, 0, 0, 0, 0, -1, 0, 1, 0;
  CHECK(oracle::projective_distance(f.matrix(), expected) < 1e-9);
  for (const auto& c : pts) CHECK(std::abs(f.residual(c)) < 1e-9);
}

TEST_CASE("8-point on a synthetic rig matches the oracle F") {
  SceneConfig cfg;
  cfg.frames = 2;
  cfg.seed = 3;
  const auto scene = make_scene(cfg);
  auto pts = scene_correspondences(scene, 2);
  pts.resize(20);
  const auto f = estimate_fundamental_8pt(pts);
  const Mat3 oracle_f = oracle::fundamental(scene, 0, 1);
  for (const auto& c : pts) {
    CHECK(std::abs(c.x2.homogeneous().dot(oracle_f * c.x1.homogeneous())) < 1e-9);
    CHECK(std::abs(f.residual(c)) < 1e-9);
  }
  CHECK(oracle::projective_distance(f.matrix(), oracle_f) < 1e-6);
}

TEST_CASE("fundamental matrix invariants") {
  SceneConfig cfg;
  cfg.frames = 3;
  cfg.seed = 8;
  const auto f = estimate_fundamental_8pt(scene_correspondences(make_scene(cfg), 3));
  const Eigen::JacobiSVD<Mat3> svd(f.matrix());
  CHECK(svd.singularValues()(2) < 1e-12);
  CHECK(std::abs(f.matrix().norm() - 1.0) < 1e-12);
}

TEST_CASE("fewer than 8 correspondences is degenerate") {
  const auto pts = translation_pairs(7, 2);
  try {
    (void)estimate_fundamental_8pt(pts);
    FAIL("expected DegenerateConfiguration");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateConfiguration);
  }
  std::vector<Correspondence> dup(10, translation_pairs(1, 3).front());
  CHECK_THROWS_AS(estimate_fundamental_8pt(dup), Error);
}

TEST_CASE("RANSAC threshold default is 3 / (f1 + f2)") {
  CHECK(RansacConfig::for_focals(1000, 1000).threshold == doctest::Approx(0.0015).epsilon(1e-15));
  RansacConfig bad;
  bad.confidence = 1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("RANSAC on all inliers reduces to the plain fit") {
  SceneConfig cfg;
  cfg.frames = 4;
  cfg.seed = 9;
  const auto scene = make_scene(cfg);
  std::vector<Correspondence> norm;
  for (const auto& c : scene_correspondences(scene, 4))
    norm.push_back({scene.cameras[0].intrinsics.normalize(c.x1), scene.cameras[1].intrinsics.normalize(c.x2)});
  const auto r = ransac_fundamental(norm, {}, RansacConfig::for_focals(1000, 1000));
  CHECK(r.inlier_count == static_cast<int>(norm.size()));
  CHECK((r.fundamental.matrix() - estimate_fundamental_8pt(norm).matrix()).norm() < 1e-12);
}

TEST_CASE("RANSAC rejects gross outliers and is deterministic") {
  SceneConfig cfg;
  cfg.frames = 6;
  cfg.seed = 10;
  const auto scene = make_scene(cfg);
  const auto& ka = scene.cameras[0].intrinsics;
  const auto& kb = scene.cameras[1].intrinsics;
  std::vector<Correspondence> norm;
  for (const auto& c : scene_correspondences(scene, 6)) {
    norm.push_back({ka.normalize(c.x1), kb.normalize(c.x2)});
    if (norm.size() == 100) break;
  }
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> pix(0.0, 1000.0);
  for (int i = 0; i < 20; ++i)
    norm.push_back({ka.normalize(Vec2(pix(rng), pix(rng))), kb.normalize(Vec2(pix(rng), pix(rng)))});

  RansacConfig rc = RansacConfig::for_focals(1000, 1000);
  rc.seed = 4;
  const auto r = ransac_fundamental(norm, {}, rc);
  int recovered = 0;
  for (int i = 0; i < 100; ++i) recovered += r.inliers[static_cast<std::size_t>(i)];
  CHECK(recovered >= 95);

  // Oracle F in normalized coordinates: [t]_x R. A random pair can land inside
  // the threshold by chance; it must then agree with the oracle geometry too.
  const auto [rot, t] = oracle::rig(scene, 0, 1);
  const FundamentalMatrix truth(oracle::cross_matrix(t) * rot);
  for (std::size_t i = 100; i < norm.size(); ++i)
    if (r.inliers[i]) CHECK(truth.sampson_distance(norm[i]) < rc.threshold);
  CHECK(oracle::projective_distance(r.fundamental.matrix(), truth.matrix()) < 1e-2);

  const auto again = ransac_fundamental(norm, {}, rc);
  CHECK(again.inliers == r.inliers);
  CHECK(again.fundamental.matrix() == r.fundamental.matrix());
}

TEST_CASE("RANSAC keeps sampling after a first hypothesis with almost no support") {
  // 60% outliers: a junk first model scores well under 1% inliers, whose
  // eighth power underflows 1 - p.
  SceneConfig cfg;
  cfg.frames = 120;
  cfg.seed = 3;
  const auto scene = make_scene(cfg);
  const auto& ka = scene.cameras[0].intrinsics;
  const auto& kb = scene.cameras[1].intrinsics;
  std::vector<Correspondence> norm;
  for (const auto& c : scene_correspondences(scene, 120)) norm.push_back({ka.normalize(c.x1), kb.normalize(c.x2)});
  const std::size_t clean = norm.size();
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> pix(0.0, 1000.0);
  for (std::size_t i = 0; i < 3 * clean / 2; ++i)
    norm.push_back({ka.normalize(Vec2(pix(rng), pix(rng))), kb.normalize(Vec2(pix(rng), pix(rng)))});

  RansacConfig rc;
  rc.threshold = 0.5e-3;  // the clean points are noiseless
  rc.seed = 2;
  rc.max_iterations = 50000;
  const auto r = ransac_fundamental(norm, {}, rc);
  std::size_t recovered = 0;
  for (std::size_t i = 0; i < clean; ++i) recovered += r.inliers[i];
  CHECK(r.iterations > 1);
  CHECK(recovered > 0.95 * static_cast<double>(clean));
}

TEST_CASE("RANSAC without consensus") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Correspondence> noise;
  for (int i = 0; i < 9; ++i) noise.push_back({Vec2(u(rng), u(rng)), Vec2(u(rng), u(rng))});
  RansacConfig rc;
  rc.threshold = 1e-12;
  rc.max_iterations = 50;
  try {
    (void)ransac_fundamental(noise, {}, rc);
    FAIL("expected NoConsensus");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoConsensus);
  }
}

TEST_CASE("essential matrix from F") {
  const auto pts = translation_pairs(12, 6);
  const auto f = estimate_fundamental_8pt(pts);
  const Intrinsics identity{1, 1, 0, 0};
  const Mat3 e = essential_from_fundamental(f, identity, identity);
  const Eigen::JacobiSVD<Mat3> svd(e);
  const auto s = svd.singularValues();
  CHECK(s(0) > 0.0);
  CHECK(std::abs(s(0) - s(1)) < 1e-12);
  CHECK(s(2) < 1e-12);
  CHECK(oracle::projective_distance(e, project_to_essential(f.matrix())) < 1e-12);

  SceneConfig cfg;
  cfg.frames = 2;
  cfg.seed = 21;
  const auto scene = make_scene(cfg);
  const auto fs = estimate_fundamental_8pt(scene_correspondences(scene, 2));
  const auto [rot, t] = oracle::rig(scene, 0, 1);
  const Mat3 es = essential_from_fundamental(fs, scene.cameras[0].intrinsics, scene.cameras[1].intrinsics);
  CHECK(oracle::projective_distance(es, oracle::cross_matrix(t) * rot) < 1e-6);

  const Intrinsics singular{0, 1, 0, 0};
  try {
    (void)essential_from_fundamental(fs, singular, identity);
    FAIL("expected SingularIntrinsics");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularIntrinsics);
  }
}

TEST_CASE("decomposition of a pure translation") {
  const auto pts = translation_pairs(15, 7);
  const Intrinsics identity{1, 1, 0, 0};
  Mat3 e;
  e << 0, 0, 0, 0, 0, -1, 0, 1, 0;
  const auto pose = decompose_essential(e, pts, identity, identity);
  CHECK((pose.rotation - Mat3::Identity()).norm() < 1e-12);
  CHECK((pose.translation - Vec3(1, 0, 0)).norm() < 1e-12);
}

TEST_CASE("decomposition recovers the rig; exactly one candidate passes cheirality") {
  for (std::uint64_t seed : {30u, 31u, 32u}) {
    SceneConfig cfg;
    cfg.frames = 2;
    cfg.seed = seed;
    const auto scene = make_scene(cfg);
    const auto pix = scene_correspondences(scene, 2);
    const auto& ka = scene.cameras[0].intrinsics;
    const auto& kb = scene.cameras[1].intrinsics;
    const Mat3 e = essential_from_fundamental(estimate_fundamental_8pt(pix), ka, kb);
    const auto pose = decompose_essential(e, pix, ka, kb);
    const auto [rot, t] = oracle::rig(scene, 0, 1);
    CHECK(oracle::rotation_angle(pose.rotation, rot) < 1e-6);
    CHECK(pose.translation.dot(t.normalized()) > 1.0 - 1e-9);
    CHECK((pose.rotation.transpose() * pose.rotation - Mat3::Identity()).norm() < 1e-9);
    CHECK(std::abs(pose.rotation.determinant() - 1.0) < 1e-9);
    CHECK(std::abs(pose.translation.norm() - 1.0) < 1e-12);

    // Brute force: triangulate under every candidate and count depths.
    std::vector<Correspondence> norm;
    for (const auto& c : pix) norm.push_back({ka.normalize(c.x1), kb.normalize(c.x2)});
    int all_positive = 0;
    for (const auto& cand : essential_candidates(e)) {
      int front = 0;
      for (const auto& c : norm) {
        Eigen::Matrix4d a;
        Eigen::Matrix<double, 3, 4> p2;
        p2 << cand.rotation, cand.translation;
        const Eigen::Matrix<double, 3, 4> p1 = Eigen::Matrix<double, 3, 4>::Identity();
        a.row(0) = c.x1.x() * p1.row(2) - p1.row(0);
        a.row(1) = c.x1.y() * p1.row(2) - p1.row(1);
        a.row(2) = c.x2.x() * p2.row(2) - p2.row(0);
        a.row(3) = c.x2.y() * p2.row(2) - p2.row(1);
        const Eigen::Vector4d h = Eigen::JacobiSVD<Eigen::Matrix4d>(a, Eigen::ComputeFullV).matrixV().col(3);
        const Vec3 x = h.head<3>() / h(3);
        front += x.z() > 0 && (cand.rotation * x + cand.translation).z() > 0;
      }
      all_positive += front == static_cast<int>(norm.size());
    }
    CHECK(all_positive == 1);
  }
}

TEST_CASE("recovered rotation is invariant to a common pixel scaling") {
  SceneConfig cfg;
  cfg.frames = 3;
  cfg.seed = 40;
  const auto scene = make_scene(cfg);
  const auto pix = scene_correspondences(scene, 3);
  const auto& ka = scene.cameras[0].intrinsics;
  const auto& kb = scene.cameras[1].intrinsics;
  const std::vector<double> conf(pix.size(), 1.0);
  const auto base = calibrate_pair(pix, conf, ka, kb, RansacConfig::for_focals(ka.fx, kb.fx));
  const double s = 3.0;
  std::vector<Correspondence> scaled;
  for (const auto& c : pix) scaled.push_back({s * c.x1, s * c.x2});
  const Intrinsics ka2{s * ka.fx, s * ka.fy, s * ka.cx, s * ka.cy};
  const Intrinsics kb2{s * kb.fx, s * kb.fy, s * kb.cx, s * kb.cy};
  const auto other = calibrate_pair(scaled, conf, ka2, kb2, RansacConfig::for_focals(ka.fx, kb.fx));
  CHECK(oracle::rotation_angle(base.pose.rotation, other.pose.rotation) < 1e-9);
  CHECK(base.max_sampson < 1e-8);
}

TEST_CASE("pose refinement converges from a perturbed start and never raises the cost") {
  SceneConfig cfg;
  cfg.frames = 4;
  cfg.seed = 41;
  const auto scene = make_scene(cfg);
  const auto& ka = scene.cameras[0].intrinsics;
  const auto& kb = scene.cameras[1].intrinsics;
  std::vector<Correspondence> norm;
  for (const auto& c : scene_correspondences(scene, 4)) norm.push_back({ka.normalize(c.x1), kb.normalize(c.x2)});
  const auto [rot, t] = oracle::rig(scene, 0, 1);

  const Mat3 tilt = Eigen::AngleAxisd(0.02, Vec3(0.3, -0.5, 0.8).normalized()).toRotationMatrix();
  const RelativePose start{rot * tilt, (t.normalized() + Vec3(0.02, -0.01, 0.01)).normalized()};
  const auto r = refine_relative_pose(norm, start, 1.5e-3);
  CHECK(r.final_cost <= r.initial_cost);
  CHECK(oracle::rotation_angle(r.pose.rotation, rot) < 1e-7);
  CHECK((r.pose.translation - t.normalized()).norm() < 1e-6);

  const auto again = refine_relative_pose(norm, r.pose, 1.5e-3);
  CHECK(again.final_cost <= again.initial_cost);
  CHECK_THROWS_AS(refine_relative_pose(norm, start, 0.0), Error);
}

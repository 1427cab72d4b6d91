#include "support/oracles.hpp"
#include "tripose/errors.hpp"
#include "tripose/metrics.hpp"

#include <doctest.h>

using namespace tripose;

namespace {

Pose3D random_pose(std::mt19937_64& rng, double sigma = 300.0) {
  std::normal_distribution<double> n(0.0, sigma);
  Pose3D p(17, 3);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = n(rng);
  return root_centered(p);
}

}  // namespace

TEST_CASE("mpjpe") {
  std::mt19937_64 rng(1);
  const Pose3D g = random_pose(rng);
  CHECK(mpjpe(g, g) == 0.0);
  Pose3D off = g;
  off.rowwise() += Eigen::RowVector3d(3, 4, 0);
  CHECK(mpjpe(off, g) == doctest::Approx(5.0).epsilon(1e-12));
  for (int k = 0; k < 20; ++k) {
    const Pose3D a = random_pose(rng), b = random_pose(rng);
    CHECK(std::abs(mpjpe(a, b) - oracle::loop_mpjpe(a, b)) < 1e-12);
  }
  CHECK_THROWS_AS(mpjpe(Pose3D::Zero(3, 3), Pose3D::Zero(4, 3)), Error);
}

TEST_CASE("nmpjpe") {
  std::mt19937_64 rng(2);
  const Pose3D g = random_pose(rng);
  CHECK(nmpjpe(2.0 * g, g) < 1e-9);
  CHECK(optimal_scale(g, g) == doctest::Approx(1.0).epsilon(1e-15));
  try {
    (void)nmpjpe(Pose3D::Zero(17, 3), g);
    FAIL("expected ZeroExtent");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroExtent);
  }
}

TEST_CASE("closed-form scale minimizes the squared residual over a scale grid") {
  // s* is the least-squares scale; the grid oracle therefore scores the
  // Frobenius residual it minimizes.
  std::mt19937_64 rng(3);
  for (int k = 0; k < 20; ++k) {
    const Pose3D g = random_pose(rng);
    Pose3D p = 1.3 * g + random_pose(rng, 40.0);
    const double s = optimal_scale(p, g);
    const double best = (s * p - g).norm();
    double grid_best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 1000; ++i) grid_best = std::min(grid_best, ((0.2 + 1.6 * i / 1000.0) * p - g).norm());
    CHECK(best <= grid_best + 1e-9);
  }
}

TEST_CASE("pmpjpe removes similarity transforms and keeps reflections") {
  std::mt19937_64 rng(4);
  const Pose3D g = random_pose(rng);
  for (int k = 0; k < 20; ++k) {
    const Mat3 r = rotation_about_axis(Vec3::Random().normalized(), 3.0 * (k + 1) / 20.0);
    const double s = 0.1 + 0.2 * k;
    Pose3D p = s * g * r.transpose();
    p.rowwise() += Eigen::RowVector3d::Random() * 500.0;
    CHECK(pmpjpe(p, g) < 1e-9);
  }
  Pose3D mirrored = g;
  mirrored.col(0) *= -1.0;
  CHECK(pmpjpe(mirrored, g) > 1.0);

  Pose3D line(5, 3);
  for (int j = 0; j < 5; ++j) line.row(j) = Eigen::RowVector3d(1, 2, 3) * j;
  try {
    (void)pmpjpe(line, g.topRows(5));
    FAIL("expected DegenerateShape");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateShape);
  }
}

TEST_CASE("metrics are symmetric under joint permutation") {
  std::mt19937_64 rng(5);
  const Pose3D a = random_pose(rng), b = random_pose(rng);
  std::vector<int> perm(17);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Pose3D pa(17, 3), pb(17, 3);
  for (int j = 0; j < 17; ++j) {
    pa.row(j) = a.row(perm[static_cast<std::size_t>(j)]);
    pb.row(j) = b.row(perm[static_cast<std::size_t>(j)]);
  }
  CHECK(mpjpe(pa, pb) == doctest::Approx(mpjpe(a, b)).epsilon(1e-12));
  CHECK(nmpjpe(pa, pb) == doctest::Approx(nmpjpe(a, b)).epsilon(1e-12));
  CHECK(pmpjpe(pa, pb) == doctest::Approx(pmpjpe(a, b)).epsilon(1e-9));
}

TEST_CASE("evaluate aggregates per-frame metrics") {
  std::mt19937_64 rng(6);
  std::vector<Pose3D> p, g;
  for (int k = 0; k < 5; ++k) {
    g.push_back(random_pose(rng));
    p.push_back(g.back() + random_pose(rng, 20.0));
  }
  const auto report = evaluate(p, g);
  REQUIRE(report.frames.size() == 5);
  double m = 0.0;
  for (const auto& f : report.frames) m += f.mpjpe;
  CHECK(report.mean.mpjpe == doctest::Approx(m / 5).epsilon(1e-15));
  const auto zero = evaluate(g, g);
  CHECK(zero.mean.mpjpe == 0.0);
  CHECK(zero.mean.nmpjpe < 1e-12);
  CHECK(zero.mean.pmpjpe < 1e-9);
}

TEST_CASE("squared residuals nest across the alignment groups") {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 200; ++k) {
    const Pose3D g = random_pose(rng);
    const Pose3D p = random_pose(rng);
    const double raw = (p - g).squaredNorm();
    const double scaled = (optimal_scale(p, g) * p - g).squaredNorm();
    const double aligned = (procrustes(p, g).apply(p) - g).squaredNorm();
    CHECK(scaled <= raw * (1 + 1e-12));
    CHECK(aligned <= scaled * (1 + 1e-12) + 1e-9);
  }
}

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <optional>

namespace tripose {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// J x 3 joint positions in millimeters, one joint per row.
using Pose3D = Eigen::Matrix<double, Eigen::Dynamic, 3>;
/// J x 2 image-plane joint positions, one joint per row.
using Pose2D = Eigen::Matrix<double, Eigen::Dynamic, 2>;

/// Pinhole intrinsics K = [[fx, 0, cx], [0, fy, cy], [0, 0, 1]].
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  Mat3 matrix() const;
  /// Throws SingularIntrinsics when fx or fy is zero.
  Mat3 inverse() const;
  Vec2 normalize(const Vec2& pixel) const;
  Vec2 denormalize(const Vec2& normalized) const;

  /// Fallback when a view ships without intrinsics: principal point at the
  /// image center, focal length max(w, h).
  static Intrinsics default_for(int width, int height);
};

Mat3 skew(const Vec3& v);

/// Angle in radians of Ra^T Rb.
double rotation_angle_between(const Mat3& ra, const Mat3& rb);

/// Closest rotation in Frobenius norm (SVD with det fixed to +1).
Mat3 nearest_rotation(const Mat3& m);

bool is_rotation(const Mat3& r, double tol = 1e-9);

Mat3 rotation_about_axis(const Vec3& axis, double angle);

/// Rotation taking world coordinates into a camera frame whose optical
/// axis points from `eye` toward `target`, x to the right, y down.
Mat3 look_at_rotation(const Vec3& eye, const Vec3& target, const Vec3& world_up);

/// Pose of view b relative to view a: x_b = rotation * x_a + translation.
struct RelativePose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
};

/// Subtract row `root` from every row.
Pose3D root_centered(const Pose3D& pose, int root = 0);
Pose2D root_centered(const Pose2D& pose, int root = 0);

}  // namespace tripose

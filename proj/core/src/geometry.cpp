#include "tripose/geometry.hpp"

#include "tripose/errors.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace tripose {

Mat3 Intrinsics::matrix() const {
  Mat3 k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Mat3 Intrinsics::inverse() const {
  if (std::abs(fx) < 1e-12 || std::abs(fy) < 1e-12) {
    fail(ErrorCode::SingularIntrinsics, "focal length is zero");
  }
  Mat3 k;
  k << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
  return k;
}

Vec2 Intrinsics::normalize(const Vec2& pixel) const {
  return {(pixel.x() - cx) / fx, (pixel.y() - cy) / fy};
}

Vec2 Intrinsics::denormalize(const Vec2& normalized) const {
  return {normalized.x() * fx + cx, normalized.y() * fy + cy};
}

Intrinsics Intrinsics::default_for(int width, int height) {
  const double f = static_cast<double>(std::max(width, height));
  return {f, f, 0.5 * width, 0.5 * height};
}

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

double rotation_angle_between(const Mat3& ra, const Mat3& rb) {
  const Mat3 d = ra.transpose() * rb;
  // atan2 form stays accurate near zero where acos((tr-1)/2) loses digits.
  const Vec3 axis(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1));
  return std::atan2(0.5 * axis.norm(), 0.5 * (d.trace() - 1.0));
}

Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  return u * v.transpose();
}

bool is_rotation(const Mat3& r, double tol) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(r.determinant() - 1.0) <= tol;
}

Mat3 rotation_about_axis(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

Mat3 look_at_rotation(const Vec3& eye, const Vec3& target, const Vec3& world_up) {
  const Vec3 forward = (target - eye).normalized();
  const Vec3 right = forward.cross(world_up).normalized();
  const Vec3 down = forward.cross(right);
  Mat3 r;
  r.row(0) = right.transpose();
  r.row(1) = down.transpose();
  r.row(2) = forward.transpose();
  return r;
}

Pose3D root_centered(const Pose3D& pose, int root) {
  Pose3D out = pose;
  out.rowwise() -= pose.row(root);
  return out;
}

Pose2D root_centered(const Pose2D& pose, int root) {
  Pose2D out = pose;
  out.rowwise() -= pose.row(root);
  return out;
}

}  // namespace tripose

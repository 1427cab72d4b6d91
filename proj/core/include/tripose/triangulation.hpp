#pragma once

#include "tripose/epipolar.hpp"
#include "tripose/geometry.hpp"
#include "tripose/kinematics.hpp"

#include <vector>

namespace tripose {

using ProjectionMatrix = Eigen::Matrix<double, 3, 4>;

/// K [R | t]
ProjectionMatrix projection_matrix(const Intrinsics& k, const Mat3& r, const Vec3& t);

struct GateConfig {
  double mean_threshold = 0.8;
  double joint_threshold = 0.7;

  void validate() const;
};

/// A view is accepted iff mean confidence >= mean_threshold and every joint
/// confidence >= joint_threshold.
bool gate_view(const Eigen::VectorXd& confidences, const GateConfig& config = {});

/// Indices of accepted views, in input order. May be empty.
std::vector<int> gate_views(const std::vector<Eigen::VectorXd>& per_view, const GateConfig& config = {});

/// Homogeneous DLT. Throws PointAtInfinity when |w| < 1e-12 after
/// normalizing the null vector.
Vec3 triangulate_linear(const Vec2& x1, const Vec2& x2, const ProjectionMatrix& p1, const ProjectionMatrix& p2);

/// Sum of squared image distances between (x1, x2) and the reprojections of X.
double reprojection_cost(const Vec3& point, const Vec2& x1, const Vec2& x2, const ProjectionMatrix& p1,
                         const ProjectionMatrix& p2);

/// Optimal correction of a correspondence onto the epipolar geometry of F.
struct EpipolarCorrection {
  Vec2 x1;
  Vec2 x2;
  /// Pencil parameter of the minimizer; infinite when the minimum is at t = inf.
  double parameter = 0.0;
  /// |g(t)| / sum_k |c_k t^k| at the selected root (0 for t = inf).
  double scaled_residual = 0.0;
  /// Coefficients of the degree-6 polynomial, constant term first.
  std::vector<double> polynomial;
};

EpipolarCorrection correct_correspondence(const Vec2& x1, const Vec2& x2, const Mat3& f);

/// Hartley-Sturm triangulation: correct the pair to exact epipolar
/// consistency by minimizing the geometric error, then triangulate linearly.
Vec3 triangulate_polynomial(const Vec2& x1, const Vec2& x2, const Mat3& f, const ProjectionMatrix& p1,
                            const ProjectionMatrix& p2);

/// Per-joint polynomial triangulation in the view-1 camera frame at the
/// scale of the unit-norm calibrated translation (no rescaling, no centering).
Pose3D triangulate_joints(const Pose2D& view1, const Pose2D& view2, const RelativePose& pose,
                          const Intrinsics& k1, const Intrinsics& k2);

/// Ratio (template mean bone length) / (pose mean bone length).
double skeleton_scale(const Pose3D& raw, const Skeleton& skeleton);

/// Uniformly rescales so the mean bone length matches the template.
/// Throws ZeroExtent when the pose's mean bone length < 1e-12.
Pose3D scale_to_skeleton(const Pose3D& raw, const Skeleton& skeleton);

/// triangulate_joints -> scale_to_skeleton -> root centering.
Pose3D triangulate_pose(const Pose2D& view1, const Pose2D& view2, const RelativePose& pose,
                        const Intrinsics& k1, const Intrinsics& k2, const Skeleton& skeleton);

/// Expresses a view-1 root-relative pose in the view-2 frame.
Pose3D transfer_to_view(const Pose3D& pose, const Mat3& rotation);

/// Mean over joints of |target_j - predicted_j|.
double triangulation_loss(const Pose3D& predicted, const Pose3D& target);

/// d loss / d predicted; rows of coincident joints get zero.
Pose3D triangulation_loss_gradient(const Pose3D& predicted, const Pose3D& target);

}  // namespace tripose

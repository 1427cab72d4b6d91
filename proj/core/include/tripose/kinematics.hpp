#pragma once

#include "tripose/geometry.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace tripose {

/// Kinematic tree rooted at the pelvis (joint 0). Offsets are the rest-pose
/// vectors from each joint's parent, so bone lengths are their norms.
class Skeleton {
 public:
  Skeleton(std::string id, std::vector<std::string> names, std::vector<int> parents,
           Pose3D rest_offsets);

  /// The 17-joint Human3.6M-style layout with template bone lengths in mm.
  static Skeleton h36m17();

  const std::string& id() const { return id_; }
  int joint_count() const { return static_cast<int>(parents_.size()); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<int>& parents() const { return parents_; }
  const Pose3D& rest_offsets() const { return rest_offsets_; }

  /// (parent, child) pairs, ordered by child index.
  std::vector<std::pair<int, int>> bones() const;
  std::vector<double> bone_lengths() const;
  double mean_bone_length() const;
  Pose3D rest_pose() const;
  /// Vertical (z) extent of the rest pose; the reference length for
  /// relative error thresholds.
  double height() const;

  /// Per-bone lengths measured on an arbitrary pose with this topology.
  std::vector<double> measure_bones(const Pose3D& pose) const;
  double mean_bone_length(const Pose3D& pose) const;

 private:
  std::string id_;
  std::vector<std::string> names_;
  std::vector<int> parents_;
  Pose3D rest_offsets_;
};

struct MotionConfig {
  double fps = 50.0;
  double max_frequency_hz = 0.8;
  double min_frequency_hz = 0.1;
  /// Multiplies every per-joint angle amplitude.
  double amplitude_scale = 1.0;
  /// Peak horizontal root excursion.
  double root_travel_mm = 1000.0;
  double max_yaw_rad = 0.6;
  /// Upper bound on any joint's displacement between consecutive frames.
  double velocity_cap_mm_per_frame = 60.0;
};

/// Smooth articulated motion in world coordinates (z up, mm). Each joint
/// angle is a sum of two random sinusoids; the root translates and yaws
/// slowly. Deterministic for a fixed seed; bone lengths are exact.
std::vector<Pose3D> generate_motion(const Skeleton& skeleton, int frame_count, std::uint64_t seed,
                                    const MotionConfig& config = {});

double max_joint_displacement(const std::vector<Pose3D>& motion);

enum class ProjectionMode { FullPerspective, WeakPerspective };

struct Camera {
  Intrinsics intrinsics;
  Mat3 rotation = Mat3::Identity();  ///< world -> camera
  Vec3 translation = Vec3::Zero();   ///< mm
  int width = 1000;
  int height = 1000;
  /// Uniform scale used by weak-perspective projection (pixels per mm).
  double weak_scale = 1.0;

  Vec3 to_camera(const Vec3& world) const { return rotation * world + translation; }
};

/// Relative rotation and translation of camera b with respect to camera a,
/// x_b = R x_a + t, with t in mm (not normalized).
std::pair<Mat3, Vec3> relative_pose(const Camera& a, const Camera& b);

struct ObservationModel {
  double noise_sigma_px = 0.0;
  /// Confidence c = exp(-|noise|^2 / (2 tau^2)).
  double confidence_tau_px = 10.0;
  /// Probability that a joint observation is flagged occluded; occluded
  /// joints draw their confidence uniformly from [0, 0.5].
  double occlusion_rate = 0.0;
};

struct SyntheticScene {
  Skeleton skeleton = Skeleton::h36m17();
  std::vector<Pose3D> motion;  ///< world frame, mm
  std::vector<Camera> cameras;
  ProjectionMode mode = ProjectionMode::FullPerspective;
  ObservationModel observation;
  std::uint64_t seed = 0;

  int frame_count() const { return static_cast<int>(motion.size()); }
  int view_count() const { return static_cast<int>(cameras.size()); }

  /// Ground-truth pose in a camera frame, root-relative.
  Pose3D camera_pose(int view, int frame) const;

  /// Throws InvalidArgument when a camera rotation is not in SO(3) or a
  /// joint has non-positive depth in some camera.
  void validate() const;
};

struct SceneConfig {
  int views = 2;
  int frames = 270;
  std::uint64_t seed = 0;
  ProjectionMode mode = ProjectionMode::FullPerspective;
  ObservationModel observation;
  MotionConfig motion;
  double focal_px = 1000.0;
  int width = 1000;
  int height = 1000;
  double camera_distance_mm = 5000.0;
};

SyntheticScene make_scene(const SceneConfig& config);

struct Projection {
  Pose2D keypoints;
  Eigen::VectorXd confidences;
};

/// Projects one frame of the scene into one view. Noise and occlusion draws
/// are seeded from (scene seed, view, frame), so the call is pure.
/// `occluded_joints` forces the occlusion confidence model on those joints.
Projection project(const SyntheticScene& scene, int view, int frame,
                   const std::vector<int>& occluded_joints = {});

/// Noise-free projection of a single camera-independent world point.
Vec2 project_point(const Camera& camera, ProjectionMode mode, const Vec3& world);

struct KeypointSequence2D {
  int view_id = 0;
  int width = 0;
  int height = 0;
  std::optional<Intrinsics> intrinsics;
  std::vector<Pose2D> frames;
  std::vector<Eigen::VectorXd> confidences;

  int frame_count() const { return static_cast<int>(frames.size()); }
  int joint_count() const { return frames.empty() ? 0 : static_cast<int>(frames.front().rows()); }
  Intrinsics resolved_intrinsics() const {
    return intrinsics ? *intrinsics : Intrinsics::default_for(width, height);
  }
  /// Throws InvalidArgument on confidences outside [0, 1], ragged frames or T = 0.
  void validate(int expected_joints) const;
};

KeypointSequence2D observe_view(const SyntheticScene& scene, int view);

}  // namespace tripose

#include "tripose/kinematics.hpp"

#include "tripose/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

namespace tripose {

Skeleton::Skeleton(std::string id, std::vector<std::string> names, std::vector<int> parents,
                   Pose3D rest_offsets)
    : id_(std::move(id)),
      names_(std::move(names)),
      parents_(std::move(parents)),
      rest_offsets_(std::move(rest_offsets)) {
  const auto j = parents_.size();
  if (j == 0 || names_.size() != j || static_cast<std::size_t>(rest_offsets_.rows()) != j) {
    fail(ErrorCode::InvalidArgument, "skeleton arrays disagree on joint count");
  }
  if (parents_[0] != -1) fail(ErrorCode::InvalidArgument, "joint 0 must be the root");
  for (std::size_t i = 1; i < j; ++i) {
    // Parents precede children, which rules out cycles and a second root.
    if (parents_[i] < 0 || parents_[i] >= static_cast<int>(i)) {
      fail(ErrorCode::InvalidArgument, "parent of joint " + std::to_string(i) + " is not an earlier joint");
    }
    if (rest_offsets_.row(static_cast<Eigen::Index>(i)).norm() <= 0.0) {
      fail(ErrorCode::InvalidArgument, "bone " + std::to_string(i) + " has zero length");
    }
  }
}

Skeleton Skeleton::h36m17() {
  std::vector<std::string> names = {
      "pelvis",     "right_hip",     "right_knee", "right_ankle", "left_hip",       "left_knee",
      "left_ankle", "spine",         "thorax",     "neck",        "head",           "left_shoulder",
      "left_elbow", "left_wrist",    "right_shoulder", "right_elbow", "right_wrist"};
  std::vector<int> parents = {-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15};
  // x toward the subject's left, y forward, z up.
  Pose3D offsets(17, 3);
  offsets << 0, 0, 0,         //
      -130, 0, 0,             // right hip
      0, 10, -450,            // right knee
      0, -20, -440,           // right ankle
      130, 0, 0,              // left hip
      0, 10, -450,            // left knee
      0, -20, -440,           // left ankle
      0, 10, 230,             // spine
      0, 0, 250,              // thorax
      0, 20, 110,             // neck
      0, 10, 115,             // head
      150, 0, -10,            // left shoulder
      50, 0, -275,            // left elbow
      0, 60, -243,            // left wrist
      -150, 0, -10,           // right shoulder
      -50, 0, -275,           // right elbow
      0, 60, -243;            // right wrist
  return Skeleton("h36m17", std::move(names), std::move(parents), std::move(offsets));
}

std::vector<std::pair<int, int>> Skeleton::bones() const {
  std::vector<std::pair<int, int>> out;
  out.reserve(parents_.size() - 1);
  for (int j = 1; j < joint_count(); ++j) out.emplace_back(parents_[j], j);
  return out;
}

std::vector<double> Skeleton::bone_lengths() const {
  std::vector<double> out;
  for (int j = 1; j < joint_count(); ++j) out.push_back(rest_offsets_.row(j).norm());
  return out;
}

double Skeleton::mean_bone_length() const {
  const auto lengths = bone_lengths();
  double sum = 0.0;
  for (double l : lengths) sum += l;
  return sum / static_cast<double>(lengths.size());
}

Pose3D Skeleton::rest_pose() const {
  Pose3D pose = Pose3D::Zero(joint_count(), 3);
  for (int j = 1; j < joint_count(); ++j) pose.row(j) = pose.row(parents_[j]) + rest_offsets_.row(j);
  return pose;
}

double Skeleton::height() const {
  const Pose3D rest = rest_pose();
  return rest.col(2).maxCoeff() - rest.col(2).minCoeff();
}

std::vector<double> Skeleton::measure_bones(const Pose3D& pose) const {
  if (pose.rows() != joint_count()) fail(ErrorCode::ShapeMismatch, "pose joint count differs from skeleton");
  std::vector<double> out;
  for (int j = 1; j < joint_count(); ++j) out.push_back((pose.row(j) - pose.row(parents_[j])).norm());
  return out;
}

double Skeleton::mean_bone_length(const Pose3D& pose) const {
  const auto lengths = measure_bones(pose);
  double sum = 0.0;
  for (double l : lengths) sum += l;
  return sum / static_cast<double>(lengths.size());
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Oscillator {
  double amplitude = 0.0;
  double frequency = 0.0;
  double phase = 0.0;

  double at(double t) const { return amplitude * std::sin(kTwoPi * frequency * t + phase); }
};

// Two oscillators per angle; three Euler angles per joint.
using JointAngles = std::array<std::array<Oscillator, 2>, 3>;

// Peak angle (rad) per joint and Euler axis for the 17-joint layout; other
// layouts fall back to a uniform amplitude.
std::array<double, 3> base_amplitude(const Skeleton& skeleton, int joint) {
  if (skeleton.joint_count() != 17) return {0.3, 0.3, 0.3};
  switch (joint) {
    case 1: case 4: return {0.05, 0.05, 0.05};
    case 2: case 5: return {0.6, 0.15, 0.2};
    case 3: case 6: return {0.5, 0.05, 0.05};
    case 7: return {0.15, 0.15, 0.15};
    case 8: return {0.1, 0.1, 0.1};
    case 9: return {0.15, 0.15, 0.15};
    case 10: return {0.2, 0.2, 0.2};
    case 11: case 14: return {0.1, 0.1, 0.1};
    case 12: case 15: return {0.7, 0.7, 0.7};
    case 13: case 16: return {0.6, 0.6, 0.6};
    default: return {0.3, 0.3, 0.3};
  }
}

Mat3 euler_zyx(double ax, double ay, double az) {
  return (Eigen::AngleAxisd(az, Vec3::UnitZ()) * Eigen::AngleAxisd(ay, Vec3::UnitY()) *
          Eigen::AngleAxisd(ax, Vec3::UnitX()))
      .toRotationMatrix();
}

std::vector<Pose3D> synthesize(const Skeleton& skeleton, int frame_count, const MotionConfig& config,
                               const std::vector<JointAngles>& angles, const std::array<Oscillator, 4>& root,
                               double yaw0, double time_scale) {
  const int j_count = skeleton.joint_count();
  const auto& parents = skeleton.parents();
  const Pose3D& offsets = skeleton.rest_offsets();
  std::vector<Pose3D> motion;
  motion.reserve(static_cast<std::size_t>(frame_count));
  std::vector<Mat3> global(static_cast<std::size_t>(j_count));
  for (int f = 0; f < frame_count; ++f) {
    const double t = time_scale * static_cast<double>(f) / config.fps;
    Pose3D pose(j_count, 3);
    pose.row(0) = Vec3(root[0].at(t), root[1].at(t), root[2].at(t)).transpose();
    global[0] = rotation_about_axis(Vec3::UnitZ(), yaw0 + root[3].at(t));
    for (int j = 1; j < j_count; ++j) {
      const auto& a = angles[static_cast<std::size_t>(j)];
      const Mat3 local = euler_zyx(a[0][0].at(t) + a[0][1].at(t), a[1][0].at(t) + a[1][1].at(t),
                                   a[2][0].at(t) + a[2][1].at(t));
      const auto p = static_cast<std::size_t>(parents[j]);
      global[static_cast<std::size_t>(j)] = global[p] * local;
      pose.row(j) = pose.row(parents[j]) + (global[static_cast<std::size_t>(j)] * offsets.row(j).transpose()).transpose();
    }
    motion.push_back(std::move(pose));
  }
  return motion;
}

}  // namespace

std::vector<Pose3D> generate_motion(const Skeleton& skeleton, int frame_count, std::uint64_t seed,
                                    const MotionConfig& config) {
  if (frame_count < 1) fail(ErrorCode::InvalidArgument, "frame_count must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  auto frequency = [&] { return uniform(config.min_frequency_hz, config.max_frequency_hz); };

  std::vector<JointAngles> angles(static_cast<std::size_t>(skeleton.joint_count()));
  for (int j = 1; j < skeleton.joint_count(); ++j) {
    const auto base = base_amplitude(skeleton, j);
    for (int axis = 0; axis < 3; ++axis) {
      for (auto& osc : angles[static_cast<std::size_t>(j)][static_cast<std::size_t>(axis)]) {
        osc.amplitude = 0.5 * base[static_cast<std::size_t>(axis)] * config.amplitude_scale * uniform(0.3, 1.0);
        osc.frequency = frequency();
        osc.phase = uniform(0.0, kTwoPi);
      }
    }
  }
  std::array<Oscillator, 4> root;
  root[0] = {config.root_travel_mm * uniform(0.3, 1.0), 0.5 * frequency(), uniform(0.0, kTwoPi)};
  root[1] = {config.root_travel_mm * uniform(0.3, 1.0), 0.5 * frequency(), uniform(0.0, kTwoPi)};
  root[2] = {20.0 * uniform(0.0, 1.0), frequency(), uniform(0.0, kTwoPi)};
  root[3] = {config.max_yaw_rad * uniform(0.3, 1.0), 0.5 * frequency(), uniform(0.0, kTwoPi)};
  const double yaw0 = uniform(-std::numbers::pi, std::numbers::pi);

  // Slow the clock until the displacement cap holds. Slowing scales every
  // frame-to-frame displacement down, so this terminates quickly.
  double time_scale = 1.0;
  for (int attempt = 0; attempt < 64; ++attempt) {
    auto motion = synthesize(skeleton, frame_count, config, angles, root, yaw0, time_scale);
    const double peak = max_joint_displacement(motion);
    if (peak < config.velocity_cap_mm_per_frame) return motion;
    time_scale *= 0.95 * config.velocity_cap_mm_per_frame / peak;
  }
  fail(ErrorCode::NumericalFailure, "could not satisfy the velocity cap");
}

double max_joint_displacement(const std::vector<Pose3D>& motion) {
  double peak = 0.0;
  for (std::size_t f = 1; f < motion.size(); ++f) {
    peak = std::max(peak, (motion[f] - motion[f - 1]).rowwise().norm().maxCoeff());
  }
  return peak;
}

std::pair<Mat3, Vec3> relative_pose(const Camera& a, const Camera& b) {
  const Mat3 r = b.rotation * a.rotation.transpose();
  return {r, b.translation - r * a.translation};
}

Pose3D SyntheticScene::camera_pose(int view, int frame) const {
  const Camera& cam = cameras.at(static_cast<std::size_t>(view));
  const Pose3D& world = motion.at(static_cast<std::size_t>(frame));
  Pose3D out = (world * cam.rotation.transpose()).rowwise() + cam.translation.transpose();
  return root_centered(out);
}

void SyntheticScene::validate() const {
  for (std::size_t v = 0; v < cameras.size(); ++v) {
    if (!is_rotation(cameras[v].rotation, 1e-9)) {
      fail(ErrorCode::InvalidArgument, "camera " + std::to_string(v) + " rotation is not in SO(3)");
    }
    for (const auto& pose : motion) {
      for (Eigen::Index j = 0; j < pose.rows(); ++j) {
        if (cameras[v].to_camera(pose.row(j).transpose()).z() <= 0.0) {
          fail(ErrorCode::InvalidArgument, "joint behind camera " + std::to_string(v));
        }
      }
    }
  }
}

SyntheticScene make_scene(const SceneConfig& config) {
  if (config.views < 1 || config.frames < 1) fail(ErrorCode::InvalidArgument, "views and frames must be >= 1");
  if (config.observation.noise_sigma_px < 0.0 || config.observation.confidence_tau_px <= 0.0 ||
      config.observation.occlusion_rate < 0.0 || config.observation.occlusion_rate > 1.0) {
    fail(ErrorCode::InvalidArgument, "invalid observation model");
  }
  SyntheticScene scene;
  scene.mode = config.mode;
  scene.observation = config.observation;
  scene.seed = config.seed;
  scene.motion = generate_motion(scene.skeleton, config.frames, config.seed, config.motion);

  std::seed_seq camera_seed{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                            0xCA3E7Au};
  std::mt19937_64 rng(camera_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const double spacing = config.views <= 4 ? 0.5 * std::numbers::pi : kTwoPi / config.views;
  const double azimuth0 = uniform(0.0, kTwoPi);
  for (int v = 0; v < config.views; ++v) {
    const double azimuth = azimuth0 + spacing * v + uniform(-0.15, 0.15);
    const double distance = config.camera_distance_mm * uniform(0.9, 1.1);
    const Vec3 eye(distance * std::cos(azimuth), distance * std::sin(azimuth), uniform(200.0, 700.0));
    const Vec3 target(uniform(-100.0, 100.0), uniform(-100.0, 100.0), uniform(-200.0, 0.0));
    Camera cam;
    cam.width = config.width;
    cam.height = config.height;
    cam.intrinsics = {config.focal_px, config.focal_px, 0.5 * config.width, 0.5 * config.height};
    cam.rotation = look_at_rotation(eye, target, Vec3::UnitZ());
    cam.translation = -cam.rotation * eye;
    cam.weak_scale = config.focal_px / cam.translation.z();
    scene.cameras.push_back(cam);
  }
  scene.validate();
  return scene;
}

Vec2 project_point(const Camera& camera, ProjectionMode mode, const Vec3& world) {
  const Vec3 p = camera.to_camera(world);
  const auto& k = camera.intrinsics;
  if (mode == ProjectionMode::WeakPerspective) {
    return {camera.weak_scale * p.x() + k.cx, camera.weak_scale * p.y() + k.cy};
  }
  if (p.z() <= 0.0) fail(ErrorCode::BehindCamera, "point has non-positive depth");
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

Projection project(const SyntheticScene& scene, int view, int frame, const std::vector<int>& occluded_joints) {
  if (view < 0 || view >= scene.view_count() || frame < 0 || frame >= scene.frame_count()) {
    fail(ErrorCode::InvalidArgument, "view or frame index out of range");
  }
  const Camera& cam = scene.cameras[static_cast<std::size_t>(view)];
  const Pose3D& pose = scene.motion[static_cast<std::size_t>(frame)];
  const auto j_count = pose.rows();
  const auto& obs = scene.observation;

  std::seed_seq seq{static_cast<std::uint32_t>(scene.seed), static_cast<std::uint32_t>(scene.seed >> 32),
                    static_cast<std::uint32_t>(view), static_cast<std::uint32_t>(frame), 0x5EEDu};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Projection out{Pose2D(j_count, 2), Eigen::VectorXd(j_count)};
  for (Eigen::Index j = 0; j < j_count; ++j) {
    const Vec2 clean = project_point(cam, scene.mode, pose.row(j).transpose());
    // Draw every variate unconditionally so streams stay aligned across settings.
    const Vec2 noise(obs.noise_sigma_px * gauss(rng), obs.noise_sigma_px * gauss(rng));
    const double occlusion_draw = unit(rng);
    const double occluded_confidence = 0.5 * unit(rng);
    out.keypoints.row(j) = (clean + noise).transpose();
    double c = 1.0;
    if (obs.noise_sigma_px > 0.0) {
      c = std::exp(-noise.squaredNorm() / (2.0 * obs.confidence_tau_px * obs.confidence_tau_px));
    }
    const bool forced = std::find(occluded_joints.begin(), occluded_joints.end(), static_cast<int>(j)) !=
                        occluded_joints.end();
    if (forced || occlusion_draw < obs.occlusion_rate) c = occluded_confidence;
    out.confidences(j) = c;
  }
  return out;
}

void KeypointSequence2D::validate(int expected_joints) const {
  if (frames.empty()) fail(ErrorCode::InvalidArgument, "keypoint sequence has no frames");
  if (frames.size() != confidences.size()) fail(ErrorCode::InvalidArgument, "frames/confidences length differ");
  if (width <= 0 || height <= 0) fail(ErrorCode::InvalidArgument, "frame size must be positive");
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].rows() != expected_joints || confidences[t].size() != expected_joints) {
      fail(ErrorCode::InvalidArgument, "frame " + std::to_string(t) + " has the wrong joint count");
    }
    if (confidences[t].minCoeff() < 0.0 || confidences[t].maxCoeff() > 1.0) {
      fail(ErrorCode::InvalidArgument, "confidence outside [0, 1] in frame " + std::to_string(t));
    }
  }
}

KeypointSequence2D observe_view(const SyntheticScene& scene, int view) {
  KeypointSequence2D seq;
  const Camera& cam = scene.cameras.at(static_cast<std::size_t>(view));
  seq.view_id = view;
  seq.width = cam.width;
  seq.height = cam.height;
  seq.intrinsics = cam.intrinsics;
  for (int f = 0; f < scene.frame_count(); ++f) {
    auto p = project(scene, view, f);
    seq.frames.push_back(std::move(p.keypoints));
    seq.confidences.push_back(std::move(p.confidences));
  }
  return seq;
}

}  // namespace tripose

#pragma once

#include "tripose/geometry.hpp"

#include <vector>

namespace tripose {

/// Mean per-joint Euclidean distance. Throws ShapeMismatch on differing J.
double mpjpe(const Pose3D& pred, const Pose3D& gt);

/// Least-squares scale <pred, gt> / <pred, pred>. Throws ZeroExtent.
double optimal_scale(const Pose3D& pred, const Pose3D& gt);
double nmpjpe(const Pose3D& pred, const Pose3D& gt);

struct Similarity {
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Pose3D apply(const Pose3D& pose) const;
};

/// Similarity (no reflection) minimizing |s R pred + t - gt|_F.
/// Throws DegenerateShape when either pose is collinear.
Similarity procrustes(const Pose3D& pred, const Pose3D& gt);
double pmpjpe(const Pose3D& pred, const Pose3D& gt);

struct FrameMetrics {
  double mpjpe = 0.0;
  double nmpjpe = 0.0;
  double pmpjpe = 0.0;
};

struct EvalReport {
  std::vector<FrameMetrics> frames;
  FrameMetrics mean;
};

EvalReport evaluate(const std::vector<Pose3D>& predictions, const std::vector<Pose3D>& ground_truth);

}  // namespace tripose

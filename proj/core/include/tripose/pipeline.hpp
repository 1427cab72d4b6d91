#pragma once

#include "tripose/epipolar.hpp"
#include "tripose/kinematics.hpp"
#include "tripose/triangulation.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace tripose {

struct CalibrationOptions {
  GateConfig gate;
  double confidence = 0.999;
  int max_iterations = 10000;
  std::uint64_t seed = 0;
  /// Overrides the 3 / (f1 + f2) default.
  std::optional<double> threshold;
};

struct ViewPairCalibration {
  int view_a = 0;
  int view_b = 0;
  /// Frames where both views passed the gate; their joints fed RANSAC.
  std::vector<int> frames;
  PairCalibration result;
};

struct MultiViewCalibration {
  std::vector<ViewPairCalibration> pairs;

  const ViewPairCalibration* find(int a, int b) const;
  /// Rotation taking view `from` coordinates to view `to`; identity for
  /// from == to, transposed when only (to, from) was calibrated.
  std::optional<Mat3> rotation(int from, int to) const;
};

struct GatedCorrespondences {
  std::vector<Correspondence> points;  ///< pixels
  std::vector<double> confidences;     ///< min of both views
  std::vector<int> frames;
};

/// All joint correspondences of the frames where both views pass the gate.
GatedCorrespondences collect_correspondences(const KeypointSequence2D& a, const KeypointSequence2D& b,
                                             const GateConfig& gate);

/// Calibrates every view pair (a < b) that has at least one jointly gated
/// frame; pairs without data are skipped. Throws EmptyDataset when no pair
/// could be calibrated.
MultiViewCalibration calibrate_views(const std::vector<KeypointSequence2D>& views, const CalibrationOptions& options);

struct PseudoPose {
  int frame = 0;
  int view_a = 0;
  int view_b = 0;
  /// Root-relative, mm, in the camera frame of view_a.
  Pose3D pose;
  double mean_confidence_a = 0.0;
  double mean_confidence_b = 0.0;
};

struct PseudoGroundTruth {
  std::vector<PseudoPose> poses;  ///< ordered by frame
  int frames_total = 0;
  int gated_out = 0;  ///< fewer than two accepted views with a calibrated pair
  int failed = 0;     ///< some joint failed to triangulate

  const PseudoPose* find(int frame) const;
};

/// Triangulates every frame from its best gated, calibrated view pair
/// (highest summed mean confidence) and rescales to the skeleton template.
PseudoGroundTruth build_pseudo_ground_truth(const std::vector<KeypointSequence2D>& views,
                                            const MultiViewCalibration& calibration, const Skeleton& skeleton,
                                            const GateConfig& gate);

}  // namespace tripose

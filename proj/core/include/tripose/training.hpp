#pragma once

#include "tripose/lifting.hpp"
#include "tripose/pipeline.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace tripose {

struct TrainConfig {
  NetworkConfig network;
  int epochs = 10;
  int batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  bool use_triangulation = true;
  bool use_reprojection = true;
  bool use_camera_correction = true;
  /// Zero the reprojection residual of joints below the gate's joint threshold.
  bool confidence_mask = true;
  double triangulation_weight = 1.0;
  double reprojection_weight = 1.0;
  GateConfig gate;
  /// Abort with NonFiniteLoss on any non-finite value or gradient.
  bool check_finite = true;

  void validate() const;
};

/// Everything training reads; the pseudo ground truth is never modified.
struct TrainingData {
  std::vector<KeypointSequence2D> views;
  MultiViewCalibration calibration;
  PseudoGroundTruth pseudo_gt;
};

struct LossRecord {
  int epoch = 0;
  double triangulation = 0.0;  ///< L_T, mm
  double reprojection = 0.0;   ///< L_R
  double total = 0.0;
};

struct TrainResult {
  LiftingModel lifting;
  std::optional<CameraCorrectionModel> camera;
  std::vector<LossRecord> history;  ///< one per epoch, means over steps
  std::vector<LossRecord> steps;
};

using EpochCallback = std::function<void(int epoch, LiftingModel& model, const LossRecord& record)>;

/// Minibatch Adam on L = w_T L_T + w_R L_R over windows centered on every
/// frame. L_T compares each view's prediction with the pseudo ground truth
/// moved into that view by the calibrated rotation; L_R sums over all view
/// pairs with (optionally corrected) calibrated rotations.
TrainResult train(const TrainingData& data, const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Losses of a fixed model over the given frames (all frames when empty),
/// computed exactly as in training but without updates.
LossRecord evaluate_losses(LiftingModel& lifting, CameraCorrectionModel* camera, const TrainingData& data,
                           const TrainConfig& config, const std::vector<int>& frames = {});

/// rotations[i][j] maps view-i camera coordinates to view j.
using RotationTable = std::vector<std::vector<Mat3>>;
RotationTable rotation_table(const MultiViewCalibration& calibration, int views);

/// Mean over frames and ordered view pairs of the MPJPE between view i's
/// prediction rotated into view j and view j's own prediction.
double view_consistency(LiftingModel& model, const std::vector<KeypointSequence2D>& views,
                        const RotationTable& rotations, const std::vector<int>& frames);

}  // namespace tripose

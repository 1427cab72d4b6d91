#pragma once

#include "tripose/geometry.hpp"
#include "tripose/kinematics.hpp"
#include "tripose/nn/layers.hpp"

#include <cstdint>
#include <vector>

namespace tripose {

struct NetworkConfig {
  int joints = 17;
  int hidden = 1024;
  int width = 1000;
  /// Frames per input window, 2T + 1.
  int window = 27;
  /// Network outputs are multiplied by this to give millimeters.
  double output_scale_mm = 1000.0;

  void validate() const;
};

/// Per-frame flattened keypoints (u0, v0, u1, v1, ...) in [-1, 1] units.
using NormalizedSequence = std::vector<Eigen::RowVectorXd>;

/// u' = 2u / w - 1, v' = (2v - h) / w.
Eigen::RowVectorXd normalize_keypoints(const Pose2D& pixels, int width, int height);
Pose2D denormalize_keypoints(const Eigen::RowVectorXd& flat, int width, int height);
NormalizedSequence normalize_input(const KeypointSequence2D& sequence);

/// Frame indices of the window centered on `center`, clamped to the
/// sequence (replicate padding).
std::vector<int> window_indices(int center, int window, int frame_count);

/// [window, centers.size(), features] input tensor.
nn::Tensor make_windows(const NormalizedSequence& sequence, const std::vector<int>& centers, int window);

class LiftingModel {
 public:
  LiftingModel() = default;
  LiftingModel(const NetworkConfig& config, std::uint64_t seed);

  /// [W, B, 2J] -> [B, 3J] root-relative millimeters.
  nn::Var forward(nn::Graph& g, nn::Var windows);
  /// Center-frame pose of one window.
  Pose3D lift(const NormalizedSequence& window);

  std::vector<nn::Parameter*> parameters();
  const NetworkConfig& config() const { return config_; }

 private:
  NetworkConfig config_;
  nn::GruLayer gru1_, gru2_;
  nn::Linear input_;
  nn::ResidualBlock block1_, block2_;
  nn::Linear output_;
};

/// Same trunk as the lifting network over both views' windows
/// ([W, B, 4J]); emits an additive 3x3 correction per sample. The output
/// layer starts at zero so the initial correction vanishes.
class CameraCorrectionModel {
 public:
  CameraCorrectionModel() = default;
  CameraCorrectionModel(const NetworkConfig& config, std::uint64_t seed);

  /// [W, B, 4J] -> [B, 9], row-major.
  nn::Var forward(nn::Graph& g, nn::Var windows);

  std::vector<nn::Parameter*> parameters();
  const NetworkConfig& config() const { return config_; }

 private:
  NetworkConfig config_;
  nn::GruLayer gru1_, gru2_;
  nn::Linear input_;
  nn::ResidualBlock block1_, block2_;
  nn::Linear output_;
};

namespace ops {

/// Nearest rotation of every [B, 9] row (SVD, det fixed to +1), with the
/// exact derivative of the projection.
nn::Var project_to_rotation(nn::Var matrices);

/// sum_b w_b * mean_j |pred_bj - target_bj| for [B, 3J] inputs. Divide by
/// the total weight for the mean over supervised rows.
nn::Var weighted_joint_error(nn::Var predictions, const nn::Tensor& targets, const std::vector<double>& row_weights);

}  // namespace ops

/// Nearest rotation to R_triang + correction(windows of both views).
Mat3 correct_rotation(CameraCorrectionModel& model, const NormalizedSequence& window_a,
                      const NormalizedSequence& window_b, const Mat3& triangulated);

/// One center-frame pose per input frame, sliding window with replicate padding.
std::vector<Pose3D> infer(LiftingModel& model, const KeypointSequence2D& sequence, int batch_size = 256);

}  // namespace tripose

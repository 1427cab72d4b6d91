#pragma once

#include "tripose/lifting.hpp"
#include "tripose/training.hpp"

#include <vector>

namespace tripose {

/// Wasserstein critic: two GRU layers over a [T, B, 3J] pose sequence and a
/// linear score on the last hidden state. Inputs are divided by
/// `input_scale_mm` before the first layer.
class CriticModel {
 public:
  CriticModel() = default;
  CriticModel(int joints, int hidden, std::uint64_t seed, double clip = 0.01, double input_scale_mm = 1000.0);

  /// [T, B, 3J] -> [B, 1]
  nn::Var forward(nn::Graph& g, nn::Var sequences);
  /// Score of one sequence of root-relative poses (T >= 1).
  double score(const std::vector<Pose3D>& sequence);

  std::vector<nn::Parameter*> parameters();
  int joints() const { return joints_; }
  double clip() const { return clip_; }
  /// Largest |w| over all parameters.
  double max_abs_parameter();

 private:
  int joints_ = 0;
  double clip_ = 0.01;
  double input_scale_mm_ = 1000.0;
  nn::GruLayer gru1_, gru2_;
  nn::Linear head_;
};

/// [T, B, 3J] tensor from B sequences of T poses each.
nn::Tensor stack_sequences(const std::vector<std::vector<Pose3D>>& sequences);

struct CriticStep {
  double gap = 0.0;  ///< E_real[C] - E_fake[C] before the update
};

/// One SGD ascent step on E_real[C] - E_fake[C], then clipping to
/// [-clip, clip].
CriticStep critic_step(CriticModel& critic, const nn::Tensor& real, const nn::Tensor& fake, double lr = 5e-5);

/// -E_fake[C]. The critic ranks real sequences high, so descending this
/// moves the generator's scores toward the real side and shrinks the gap.
nn::Var generator_adversarial_loss(CriticModel& critic, nn::Var fake);

struct AdversarialConfig {
  NetworkConfig network;
  int critic_hidden = 1024;
  /// Consecutive poses per critic input; 1 scores single poses.
  int critic_sequence = 4;
  int epochs = 10;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double critic_learning_rate = 5e-5;
  double clip = 0.01;
  int critic_steps = 5;
  bool use_adversarial = true;
  bool confidence_mask = true;
  GateConfig gate;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AdversarialRecord {
  int epoch = 0;
  double reprojection = 0.0;  ///< single-view L_R
  double adversarial = 0.0;   ///< L_advG
  double total = 0.0;
  double critic_gap = 0.0;
};

struct AdversarialResult {
  LiftingModel lifting;
  CriticModel critic;
  std::vector<AdversarialRecord> history;
  std::vector<AdversarialRecord> steps;
};

/// Single-view training with L = L_R + L_advG: every view is treated as an
/// independent video, the critic compares lifted pose sequences with
/// sequences drawn from the unpaired `real_poses` archive.
AdversarialResult train_adversarial(const std::vector<KeypointSequence2D>& views, const std::vector<Pose3D>& real_poses,
                                    const AdversarialConfig& config);

}  // namespace tripose

#include "tripose/training.hpp"

#include "tripose/errors.hpp"
#include "tripose/metrics.hpp"
#include "tripose/nn/optim.hpp"
#include "tripose/reprojection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace tripose {

using nn::Graph;
using nn::Shape;
using nn::Tensor;
using nn::Var;

void TrainConfig::validate() const {
  network.validate();
  if (epochs < 0) fail(ErrorCode::InvalidArgument, "epochs must be non-negative");
  if (batch_size < 1) fail(ErrorCode::InvalidArgument, "batch size must be positive");
  if (!(learning_rate > 0.0)) fail(ErrorCode::InvalidArgument, "learning rate must be positive");
  if (!use_triangulation && !use_reprojection) fail(ErrorCode::InvalidArgument, "at least one loss term is required");
  if (triangulation_weight < 0.0 || reprojection_weight < 0.0) fail(ErrorCode::InvalidArgument, "loss weights must be non-negative");
  gate.validate();
}

RotationTable rotation_table(const MultiViewCalibration& calibration, int views) {
  RotationTable out(static_cast<std::size_t>(views), std::vector<Mat3>(static_cast<std::size_t>(views)));
  for (int i = 0; i < views; ++i) {
    for (int j = 0; j < views; ++j) {
      const auto r = calibration.rotation(i, j);
      if (!r) fail(ErrorCode::EmptyDataset, "no calibrated rotation between views " + std::to_string(i) + " and " + std::to_string(j));
      out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = *r;
    }
  }
  return out;
}

namespace {

Tensor flat_rotation(const Mat3& r) {
  Tensor t(Shape{1, 9});
  Eigen::Map<Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(t.data()) = r;
  return t;
}

/// Inputs shared by every step: normalized sequences and per-pair stacks.
struct Prepared {
  std::size_t views = 0;
  int joints = 0;
  std::vector<NormalizedSequence> sequences;
  std::vector<std::vector<NormalizedSequence>> pair_sequences;  ///< [i][j], i < j
  RotationTable rotations;
};

Prepared prepare(const TrainingData& data, const TrainConfig& config) {
  Prepared p;
  p.views = data.views.size();
  if (p.views == 0) fail(ErrorCode::EmptyDataset, "no views to train on");
  const int frames = data.views.front().frame_count();
  if (frames < 1) fail(ErrorCode::EmptyDataset, "no frames to train on");
  p.joints = data.views.front().joint_count();
  if (p.joints != config.network.joints) fail(ErrorCode::ShapeMismatch, "keypoint joint count differs from the network's");
  for (const auto& v : data.views) {
    if (v.frame_count() != frames) fail(ErrorCode::ShapeMismatch, "views differ in frame count");
    v.validate(p.joints);
    p.sequences.push_back(normalize_input(v));
  }
  p.rotations = rotation_table(data.calibration, static_cast<int>(p.views));
  if (config.use_camera_correction) {
    p.pair_sequences.assign(p.views, std::vector<NormalizedSequence>(p.views));
    for (std::size_t i = 0; i < p.views; ++i) {
      for (std::size_t j = i + 1; j < p.views; ++j) {
        auto& joint = p.pair_sequences[i][j];
        joint.resize(static_cast<std::size_t>(frames));
        for (std::size_t f = 0; f < joint.size(); ++f) {
          joint[f].resize(4 * p.joints);
          joint[f] << p.sequences[i][f], p.sequences[j][f];
        }
      }
    }
  }
  return p;
}

struct StepLosses {
  Var total;
  double triangulation = 0.0;
  double reprojection = 0.0;
};

StepLosses build_step(Graph& g, LiftingModel& lifting, CameraCorrectionModel* camera, const TrainingData& data,
                      const Prepared& p, const TrainConfig& config, const std::vector<int>& centers) {
  const int window = config.network.window;
  const std::size_t batch = centers.size();
  const auto joints = static_cast<std::size_t>(p.joints);

  std::vector<Var> predictions;
  for (std::size_t v = 0; v < p.views; ++v) {
    predictions.push_back(lifting.forward(g, g.constant(make_windows(p.sequences[v], centers, window))));
  }

  StepLosses out;
  Var total;
  if (config.use_triangulation) {
    Var sum;
    double weight = 0.0;
    for (std::size_t v = 0; v < p.views; ++v) {
      Tensor targets(Shape{batch, 3 * joints});
      std::vector<double> weights(batch, 0.0);
      for (std::size_t b = 0; b < batch; ++b) {
        const auto f = static_cast<std::size_t>(centers[b]);
        const PseudoPose* gt = data.pseudo_gt.find(centers[b]);
        if (!gt || !gate_view(data.views[v].confidences[f], config.gate)) continue;
        const Mat3& r = p.rotations[static_cast<std::size_t>(gt->view_a)][v];
        const Pose3D target = transfer_to_view(gt->pose, r);
        for (std::size_t j = 0; j < joints; ++j)
          for (std::size_t c = 0; c < 3; ++c) targets[b * 3 * joints + 3 * j + c] = target(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c));
        weights[b] = 1.0;
        weight += 1.0;
      }
      const Var term = ops::weighted_joint_error(predictions[v], targets, weights);
      sum = sum.valid() ? sum + term : term;
    }
    const Var lt = weight > 0.0 ? nn::scale(sum, 1.0 / weight) : nn::scale(sum, 0.0);
    out.triangulation = lt.value().item();
    total = nn::scale(lt, config.triangulation_weight);
  }

  if (config.use_reprojection) {
    std::vector<Tensor> observations, masks;
    for (std::size_t v = 0; v < p.views; ++v) {
      Tensor obs(Shape{batch, 2 * joints});
      Tensor mask(Shape{batch, 2 * joints}, 1.0);
      for (std::size_t b = 0; b < batch; ++b) {
        const auto f = static_cast<std::size_t>(centers[b]);
        const Pose2D n = normalize_2d(data.views[v].frames[f]);
        for (std::size_t j = 0; j < joints; ++j) {
          obs[b * 2 * joints + 2 * j] = n(static_cast<Eigen::Index>(j), 0);
          obs[b * 2 * joints + 2 * j + 1] = n(static_cast<Eigen::Index>(j), 1);
          if (data.views[v].confidences[f](static_cast<Eigen::Index>(j)) < config.gate.joint_threshold) {
            mask[b * 2 * joints + 2 * j] = 0.0;
            mask[b * 2 * joints + 2 * j + 1] = 0.0;
          }
        }
      }
      observations.push_back(std::move(obs));
      masks.push_back(std::move(mask));
    }

    std::vector<std::vector<Var>> pair(p.views, std::vector<Var>(p.views));
    for (std::size_t i = 0; i < p.views; ++i) {
      for (std::size_t j = i + 1; j < p.views; ++j) {
        const Var base = g.constant(flat_rotation(p.rotations[i][j]));
        if (camera) {
          const Var correction = camera->forward(g, g.constant(make_windows(p.pair_sequences[i][j], centers, window)));
          pair[i][j] = ops::project_to_rotation(correction + base);
        } else {
          pair[i][j] = base;
        }
        pair[j][i] = ops::transpose_rotations(pair[i][j]);
      }
    }
    const Var lr = ops::reprojection_loss(predictions, observations,
                                          [&pair](std::size_t i, std::size_t j) { return pair[i][j]; },
                                          config.confidence_mask ? std::span<const Tensor>(masks) : std::span<const Tensor>());
    out.reprojection = lr.value().item();
    const Var weighted = nn::scale(lr, config.reprojection_weight);
    total = total.valid() ? total + weighted : weighted;
  }
  out.total = total;
  return out;
}

std::vector<std::vector<int>> batches(std::vector<int> frames, int batch_size) {
  std::vector<std::vector<int>> out;
  for (std::size_t s = 0; s < frames.size(); s += static_cast<std::size_t>(batch_size)) {
    const auto e = std::min(frames.size(), s + static_cast<std::size_t>(batch_size));
    out.emplace_back(frames.begin() + static_cast<std::ptrdiff_t>(s), frames.begin() + static_cast<std::ptrdiff_t>(e));
  }
  return out;
}

}  // namespace

TrainResult train(const TrainingData& data, const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  const Prepared p = prepare(data, config);
  if (config.use_triangulation && data.pseudo_gt.poses.empty()) {
    fail(ErrorCode::EmptyDataset, "triangulation loss requested but the pseudo ground truth is empty");
  }

  TrainResult result;
  result.lifting = LiftingModel(config.network, config.seed);
  const bool correct = config.use_camera_correction && config.use_reprojection && p.views > 1;
  if (correct) result.camera = CameraCorrectionModel(config.network, config.seed);

  std::vector<nn::Parameter*> params = result.lifting.parameters();
  if (result.camera) {
    for (auto* q : result.camera->parameters()) params.push_back(q);
  }
  nn::Adam adam(params, nn::AdamConfig{config.learning_rate});

  std::vector<int> order(static_cast<std::size_t>(data.views.front().frame_count()));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(config.seed ^ 0x7A11A5EEDULL);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    LossRecord acc{epoch, 0.0, 0.0, 0.0};
    const auto groups = batches(order, config.batch_size);
    for (const auto& centers : groups) {
      Graph g;
      g.set_check_finite(config.check_finite);
      const StepLosses losses = build_step(g, result.lifting, result.camera ? &*result.camera : nullptr, data, p, config, centers);
      const double total = losses.total.value().item();
      if (!std::isfinite(total)) fail(ErrorCode::NonFiniteLoss, "non-finite loss at epoch " + std::to_string(epoch));
      adam.zero_grad();
      g.backward(losses.total);
      adam.step();
      const LossRecord step{epoch, losses.triangulation, losses.reprojection, total};
      result.steps.push_back(step);
      acc.triangulation += step.triangulation;
      acc.reprojection += step.reprojection;
    }
    const double n = static_cast<double>(groups.size());
    acc.triangulation /= n;
    acc.reprojection /= n;
    acc.total = config.triangulation_weight * acc.triangulation * (config.use_triangulation ? 1.0 : 0.0) +
                config.reprojection_weight * acc.reprojection * (config.use_reprojection ? 1.0 : 0.0);
    result.history.push_back(acc);
    if (on_epoch) on_epoch(epoch, result.lifting, acc);
  }
  return result;
}

LossRecord evaluate_losses(LiftingModel& lifting, CameraCorrectionModel* camera, const TrainingData& data,
                           const TrainConfig& config, const std::vector<int>& frames) {
  config.validate();
  TrainConfig effective = config;
  effective.use_camera_correction = camera != nullptr;
  const Prepared p = prepare(data, effective);
  std::vector<int> selected = frames;
  if (selected.empty()) {
    selected.resize(static_cast<std::size_t>(data.views.front().frame_count()));
    std::iota(selected.begin(), selected.end(), 0);
  }
  LossRecord out;
  double weight = 0.0;
  for (const auto& centers : batches(selected, config.batch_size)) {
    Graph g;
    const StepLosses losses = build_step(g, lifting, camera, data, p, effective, centers);
    const double w = static_cast<double>(centers.size());
    out.triangulation += w * losses.triangulation;
    out.reprojection += w * losses.reprojection;
    weight += w;
  }
  out.triangulation /= weight;
  out.reprojection /= weight;
  out.total = (config.use_triangulation ? config.triangulation_weight * out.triangulation : 0.0) +
              (config.use_reprojection ? config.reprojection_weight * out.reprojection : 0.0);
  return out;
}

double view_consistency(LiftingModel& model, const std::vector<KeypointSequence2D>& views,
                        const RotationTable& rotations, const std::vector<int>& frames) {
  if (views.size() < 2 || frames.empty()) fail(ErrorCode::EmptyDataset, "view consistency needs two views and a frame");
  std::vector<std::vector<Pose3D>> preds;
  for (const auto& v : views) {
    const auto seq = normalize_input(v);
    Graph g;
    const Var out = model.forward(g, g.constant(make_windows(seq, frames, model.config().window)));
    std::vector<Pose3D> per_frame;
    for (std::size_t b = 0; b < frames.size(); ++b) {
      per_frame.push_back(Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>>(
          out.value().data() + b * out.value().cols(), model.config().joints, 3));
    }
    preds.push_back(std::move(per_frame));
  }
  double total = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < views.size(); ++i) {
    for (std::size_t j = 0; j < views.size(); ++j) {
      if (i == j) continue;
      for (std::size_t b = 0; b < frames.size(); ++b) {
        total += mpjpe(transfer_to_view(preds[i][b], rotations[i][j]), preds[j][b]);
        ++count;
      }
    }
  }
  return total / count;
}

}  // namespace tripose

#include "tripose/lifting.hpp"

#include "tripose/errors.hpp"
#include "tripose/reprojection.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace tripose {

using nn::Graph;
using nn::Shape;
using nn::Tensor;
using nn::Var;

void NetworkConfig::validate() const {
  if (joints < 1 || hidden < 1 || width < 1) fail(ErrorCode::InvalidArgument, "network sizes must be positive");
  if (window < 1 || window % 2 == 0) fail(ErrorCode::InvalidArgument, "window length must be odd");
  if (!(output_scale_mm > 0.0)) fail(ErrorCode::InvalidArgument, "output scale must be positive");
}

Eigen::RowVectorXd normalize_keypoints(const Pose2D& pixels, int width, int height) {
  if (width <= 0 || height <= 0) fail(ErrorCode::InvalidArgument, "frame size must be positive");
  const double w = width, h = height;
  Eigen::RowVectorXd out(2 * pixels.rows());
  for (Eigen::Index j = 0; j < pixels.rows(); ++j) {
    out(2 * j) = 2.0 * pixels(j, 0) / w - 1.0;
    out(2 * j + 1) = (2.0 * pixels(j, 1) - h) / w;
  }
  return out;
}

Pose2D denormalize_keypoints(const Eigen::RowVectorXd& flat, int width, int height) {
  const double w = width, h = height;
  Pose2D out(flat.size() / 2, 2);
  for (Eigen::Index j = 0; j < out.rows(); ++j) {
    out(j, 0) = (flat(2 * j) + 1.0) * w / 2.0;
    out(j, 1) = (flat(2 * j + 1) * w + h) / 2.0;
  }
  return out;
}

NormalizedSequence normalize_input(const KeypointSequence2D& sequence) {
  NormalizedSequence out;
  out.reserve(sequence.frames.size());
  for (const auto& f : sequence.frames) out.push_back(normalize_keypoints(f, sequence.width, sequence.height));
  return out;
}

std::vector<int> window_indices(int center, int window, int frame_count) {
  std::vector<int> out(static_cast<std::size_t>(window));
  const int half = window / 2;
  for (int k = 0; k < window; ++k) out[static_cast<std::size_t>(k)] = std::clamp(center - half + k, 0, frame_count - 1);
  return out;
}

Tensor make_windows(const NormalizedSequence& sequence, const std::vector<int>& centers, int window) {
  if (sequence.empty()) fail(ErrorCode::SequenceTooShort, "empty sequence");
  const auto features = static_cast<std::size_t>(sequence.front().size());
  const auto w = static_cast<std::size_t>(window);
  Tensor out(Shape{w, centers.size(), features});
  const int n = static_cast<int>(sequence.size());
  for (std::size_t b = 0; b < centers.size(); ++b) {
    const auto idx = window_indices(centers[b], window, n);
    for (std::size_t t = 0; t < w; ++t) {
      const auto& frame = sequence[static_cast<std::size_t>(idx[t])];
      std::copy(frame.data(), frame.data() + features, out.data() + (t * centers.size() + b) * features);
    }
  }
  return out;
}

namespace {

nn::Rng seeded(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(salt)};
  return nn::Rng(seq);
}

}  // namespace

LiftingModel::LiftingModel(const NetworkConfig& config, std::uint64_t seed) : config_(config) {
  config.validate();
  auto rng = seeded(seed, 0x11F7);
  const auto j = static_cast<std::size_t>(config.joints);
  const auto h = static_cast<std::size_t>(config.hidden);
  const auto n = static_cast<std::size_t>(config.width);
  gru1_ = nn::GruLayer("lift.gru1", 2 * j, h, rng);
  gru2_ = nn::GruLayer("lift.gru2", h, h, rng);
  input_ = nn::Linear("lift.fc_in", 2 * h, n, rng);
  block1_ = nn::ResidualBlock("lift.block1", n, rng);
  block2_ = nn::ResidualBlock("lift.block2", n, rng);
  output_ = nn::Linear("lift.fc_out", n, 3 * j, rng);
}

Var LiftingModel::forward(Graph& g, Var windows) {
  const Shape s = windows.shape();
  if (s.size() != 3 || s[2] != static_cast<std::size_t>(2 * config_.joints)) {
    fail(ErrorCode::ShapeMismatch, "lifting input must be [W, B, 2J], got " + nn::to_string(s));
  }
  const Var hidden = gru2_.forward(g, gru1_.forward(g, windows));
  Var x = nn::relu(input_.forward(g, nn::pool_concat(hidden)));
  x = block2_.forward(g, block1_.forward(g, x));
  const Var pose = nn::scale(output_.forward(g, x), config_.output_scale_mm);
  return ops::root_center(pose, 3);
}

Pose3D LiftingModel::lift(const NormalizedSequence& window) {
  if (static_cast<int>(window.size()) != config_.window) {
    fail(ErrorCode::ShapeMismatch, "window has " + std::to_string(window.size()) + " frames, model expects " +
                                       std::to_string(config_.window));
  }
  Graph g;
  const Var out = forward(g, g.constant(make_windows(window, {config_.window / 2}, config_.window)));
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>>(out.value().data(),
                                                                                      config_.joints, 3);
}

std::vector<nn::Parameter*> LiftingModel::parameters() {
  std::vector<nn::Parameter*> out;
  gru1_.collect(out);
  gru2_.collect(out);
  input_.collect(out);
  block1_.collect(out);
  block2_.collect(out);
  output_.collect(out);
  return out;
}

CameraCorrectionModel::CameraCorrectionModel(const NetworkConfig& config, std::uint64_t seed) : config_(config) {
  config.validate();
  auto rng = seeded(seed, 0xCA3E);
  const auto j = static_cast<std::size_t>(config.joints);
  const auto h = static_cast<std::size_t>(config.hidden);
  const auto n = static_cast<std::size_t>(config.width);
  gru1_ = nn::GruLayer("camera.gru1", 4 * j, h, rng);
  gru2_ = nn::GruLayer("camera.gru2", h, h, rng);
  input_ = nn::Linear("camera.fc_in", 2 * h, n, rng);
  block1_ = nn::ResidualBlock("camera.block1", n, rng);
  block2_ = nn::ResidualBlock("camera.block2", n, rng);
  output_ = nn::Linear("camera.fc_out", n, 9, rng, true);
}

Var CameraCorrectionModel::forward(Graph& g, Var windows) {
  const Shape s = windows.shape();
  if (s.size() != 3 || s[2] != static_cast<std::size_t>(4 * config_.joints)) {
    fail(ErrorCode::ShapeMismatch, "camera network input must be [W, B, 4J], got " + nn::to_string(s));
  }
  const Var hidden = gru2_.forward(g, gru1_.forward(g, windows));
  Var x = nn::relu(input_.forward(g, nn::pool_concat(hidden)));
  x = block2_.forward(g, block1_.forward(g, x));
  return output_.forward(g, x);
}

std::vector<nn::Parameter*> CameraCorrectionModel::parameters() {
  std::vector<nn::Parameter*> out;
  gru1_.collect(out);
  gru2_.collect(out);
  input_.collect(out);
  block1_.collect(out);
  block2_.collect(out);
  output_.collect(out);
  return out;
}

namespace ops {

namespace {

struct PolarFactor {
  Mat3 u;  ///< last column flipped when det(U V^T) < 0
  Mat3 v;
  Vec3 sigma;  ///< signed to match u
};

PolarFactor polar(const Mat3& m) {
  const Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  PolarFactor p{svd.matrixU(), svd.matrixV(), svd.singularValues()};
  if ((p.u * p.v.transpose()).determinant() < 0.0) {
    p.u.col(2) *= -1.0;
    p.sigma(2) *= -1.0;
  }
  return p;
}

using RowMat3 = Eigen::Matrix<double, 3, 3, Eigen::RowMajor>;

}  // namespace

Var project_to_rotation(Var matrices) {
  const Tensor& m = matrices.value();
  if (m.rank() != 2 || m.cols() != 9) fail(ErrorCode::ShapeMismatch, "project_to_rotation expects [B, 9]");
  const std::size_t batch = m.rows();
  std::vector<PolarFactor> factors;
  factors.reserve(batch);
  Tensor out(m.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    const Mat3 mb = Eigen::Map<const RowMat3>(m.data() + 9 * b);
    factors.push_back(polar(mb));
    Eigen::Map<RowMat3>(out.data() + 9 * b) = factors.back().u * factors.back().v.transpose();
  }
  const std::size_t im = matrices.id();
  return matrices.graph().record(std::move(out), {matrices},
                                 [im, factors = std::move(factors)](Graph& g, std::size_t self) {
    if (!g.requires_grad(im)) return;
    const Tensor& gy = g.grad(self);
    Tensor& gm = g.accumulate_grad(im);
    for (std::size_t b = 0; b < factors.size(); ++b) {
      const auto& f = factors[b];
      const Mat3 gb = Eigen::Map<const RowMat3>(gy.data() + 9 * b);
      const Mat3 a = f.u.transpose() * gb * f.v;
      Mat3 c = Mat3::Zero();
      for (int i = 0; i < 3; ++i) {
        for (int k = 0; k < 3; ++k) {
          if (i == k) continue;
          const double denom = f.sigma(i) + f.sigma(k);
          if (std::abs(denom) > 1e-12) c(i, k) = (a(i, k) - a(k, i)) / denom;
        }
      }
      Eigen::Map<RowMat3>(gm.data() + 9 * b) += f.u * c * f.v.transpose();
    }
  });
}

Var weighted_joint_error(Var predictions, const Tensor& targets, const std::vector<double>& row_weights) {
  const Tensor& p = predictions.value();
  if (p.shape() != targets.shape() || p.rank() != 2 || p.cols() % 3 != 0 || row_weights.size() != p.rows()) {
    fail(ErrorCode::ShapeMismatch, "weighted_joint_error expects matching [B, 3J] inputs and B weights");
  }
  const std::size_t batch = p.rows(), joints = p.cols() / 3;
  Tensor residual(p.shape());
  std::vector<double> dist(batch * joints, 0.0);
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    if (row_weights[b] == 0.0) continue;
    for (std::size_t j = 0; j < joints; ++j) {
      double sq = 0.0;
      for (std::size_t c = 0; c < 3; ++c) {
        const std::size_t k = b * 3 * joints + 3 * j + c;
        residual[k] = p[k] - targets[k];
        sq += residual[k] * residual[k];
      }
      dist[b * joints + j] = std::sqrt(sq);
      total += row_weights[b] * dist[b * joints + j] / static_cast<double>(joints);
    }
  }
  const std::size_t ip = predictions.id();
  return predictions.graph().record(
      Tensor::scalar(total), {predictions},
      [ip, batch, joints, row_weights, residual = std::move(residual), dist = std::move(dist)](Graph& g,
                                                                                              std::size_t self) {
    if (!g.requires_grad(ip)) return;
    const double gy = g.grad(self).item();
    Tensor& gp = g.accumulate_grad(ip);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < joints; ++j) {
        const double d = dist[b * joints + j];
        if (row_weights[b] == 0.0 || d == 0.0) continue;
        const double coef = gy * row_weights[b] / (static_cast<double>(joints) * d);
        for (std::size_t c = 0; c < 3; ++c) {
          const std::size_t k = b * 3 * joints + 3 * j + c;
          gp[k] += coef * residual[k];
        }
      }
    }
  });
}

}  // namespace ops

Mat3 correct_rotation(CameraCorrectionModel& model, const NormalizedSequence& window_a,
                      const NormalizedSequence& window_b, const Mat3& triangulated) {
  if (window_a.size() != window_b.size()) fail(ErrorCode::ShapeMismatch, "view windows differ in length");
  NormalizedSequence joint(window_a.size());
  for (std::size_t t = 0; t < joint.size(); ++t) {
    joint[t].resize(window_a[t].size() + window_b[t].size());
    joint[t] << window_a[t], window_b[t];
  }
  const int w = static_cast<int>(joint.size());
  Graph g;
  const Var correction = model.forward(g, g.constant(make_windows(joint, {w / 2}, w)));
  Tensor base(Shape{1, 9});
  Eigen::Map<Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(base.data()) = triangulated;
  const Var r = ops::project_to_rotation(correction + g.constant(base));
  return Eigen::Map<const Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(r.value().data());
}

std::vector<Pose3D> infer(LiftingModel& model, const KeypointSequence2D& sequence, int batch_size) {
  if (sequence.frame_count() < 1) fail(ErrorCode::SequenceTooShort, "inference needs at least one frame");
  if (batch_size < 1) fail(ErrorCode::InvalidArgument, "batch size must be positive");
  const auto normalized = normalize_input(sequence);
  const int joints = model.config().joints;
  std::vector<Pose3D> out;
  out.reserve(normalized.size());
  for (int start = 0; start < sequence.frame_count(); start += batch_size) {
    std::vector<int> centers;
    for (int f = start; f < std::min(start + batch_size, sequence.frame_count()); ++f) centers.push_back(f);
    Graph g;
    const Var poses = model.forward(g, g.constant(make_windows(normalized, centers, model.config().window)));
    for (std::size_t b = 0; b < centers.size(); ++b) {
      out.push_back(Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>>(
          poses.value().data() + b * 3 * static_cast<std::size_t>(joints), joints, 3));
    }
  }
  return out;
}

}  // namespace tripose

#include "tripose/reprojection.hpp"

#include "tripose/errors.hpp"
#include "tripose/nn/ops.hpp"

#include <cmath>

namespace tripose {

Pose2D weak_perspective_project(const Pose3D& pose, const Mat3& rotation) {
  return (pose * rotation.transpose()).leftCols<2>();
}

Pose2D normalize_2d(const Pose2D& pose, int root) {
  const Pose2D centered = root_centered(pose, root);
  const double norm = centered.norm();
  if (norm < 1e-12) fail(ErrorCode::ZeroExtent, "2D pose has zero extent after root centering");
  return centered / norm;
}

double reprojection_loss(const std::vector<Pose3D>& predictions, const std::vector<Pose2D>& observations,
                         const std::vector<std::vector<Mat3>>& rotations,
                         const std::vector<Eigen::VectorXd>& joint_masks) {
  const std::size_t n = predictions.size();
  if (n == 0 || observations.size() != n || rotations.size() != n) {
    fail(ErrorCode::ShapeMismatch, "reprojection loss needs one prediction, observation and rotation row per view");
  }
  if (!joint_masks.empty() && joint_masks.size() != n) fail(ErrorCode::ShapeMismatch, "one mask per view");
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const Pose2D obs = normalize_2d(observations[j]);
    for (std::size_t i = 0; i < n; ++i) {
      const Mat3& r = i == j ? Mat3::Identity() : rotations[i].at(j);
      Pose2D residual = obs - normalize_2d(weak_perspective_project(predictions[i], r));
      if (!joint_masks.empty()) residual.array().colwise() *= joint_masks[j].array();
      total += residual.norm();
    }
  }
  return total;
}

namespace ops {

using nn::Graph;
using nn::Shape;
using nn::Tensor;
using nn::Var;

namespace {
void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::ShapeMismatch, what);
}
}  // namespace

Var rotate_project(Var poses, Var rotations) {
  const Tensor& p = poses.value();
  const Tensor& r = rotations.value();
  require(p.rank() == 2 && p.cols() % 3 == 0, "rotate_project poses must be [B, 3J], got " + nn::to_string(p.shape()));
  require(r.rank() == 2 && r.cols() == 9 && (r.rows() == p.rows() || r.rows() == 1),
          "rotate_project rotations must be [B, 9] or [1, 9], got " + nn::to_string(r.shape()));
  const std::size_t batch = p.rows(), joints = p.cols() / 3;
  const bool shared = r.rows() == 1 && batch != 1;
  Tensor out(Shape{batch, 2 * joints});
  for (std::size_t b = 0; b < batch; ++b) {
    const double* rb = r.data() + (shared ? 0 : 9 * b);
    const double* pb = p.data() + 3 * joints * b;
    double* ob = out.data() + 2 * joints * b;
    for (std::size_t j = 0; j < joints; ++j) {
      const double* x = pb + 3 * j;
      ob[2 * j] = rb[0] * x[0] + rb[1] * x[1] + rb[2] * x[2];
      ob[2 * j + 1] = rb[3] * x[0] + rb[4] * x[1] + rb[5] * x[2];
    }
  }
  const std::size_t ip = poses.id(), ir = rotations.id();
  return poses.graph().record(std::move(out), {poses, rotations},
                              [ip, ir, batch, joints, shared](Graph& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    const Tensor& pv = g.value(ip);
    const Tensor& rv = g.value(ir);
    Tensor* gp = g.requires_grad(ip) ? &g.accumulate_grad(ip) : nullptr;
    Tensor* gr = g.requires_grad(ir) ? &g.accumulate_grad(ir) : nullptr;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t roff = shared ? 0 : 9 * b;
      const double* rb = rv.data() + roff;
      for (std::size_t j = 0; j < joints; ++j) {
        const double g0 = gy[2 * joints * b + 2 * j];
        const double g1 = gy[2 * joints * b + 2 * j + 1];
        const std::size_t poff = 3 * joints * b + 3 * j;
        for (std::size_t c = 0; c < 3; ++c) {
          if (gp) (*gp)[poff + c] += g0 * rb[c] + g1 * rb[3 + c];
          if (gr) {
            (*gr)[roff + c] += g0 * pv[poff + c];
            (*gr)[roff + 3 + c] += g1 * pv[poff + c];
          }
        }
      }
    }
  });
}

Var root_center(Var flat, std::size_t dims, std::size_t root) {
  const Tensor& x = flat.value();
  require(x.rank() == 2 && dims > 0 && x.cols() % dims == 0 && root < x.cols() / dims,
          "root_center expects [B, dims*J], got " + nn::to_string(x.shape()));
  const std::size_t batch = x.rows(), joints = x.cols() / dims;
  Tensor out = x;
  for (std::size_t b = 0; b < batch; ++b) {
    double* row = out.data() + b * x.cols();
    for (std::size_t d = 0; d < dims; ++d) {
      const double origin = x[b * x.cols() + root * dims + d];
      for (std::size_t j = 0; j < joints; ++j) row[j * dims + d] -= origin;
    }
  }
  const std::size_t ix = flat.id();
  return flat.graph().record(std::move(out), {flat}, [ix, dims, root, batch, joints](Graph& g, std::size_t self) {
    if (!g.requires_grad(ix)) return;
    const Tensor& gy = g.grad(self);
    Tensor& gx = g.accumulate_grad(ix);
    const std::size_t cols = dims * joints;
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t d = 0; d < dims; ++d) {
        double total = 0.0;
        for (std::size_t j = 0; j < joints; ++j) {
          const double v = gy[b * cols + j * dims + d];
          gx[b * cols + j * dims + d] += v;
          total += v;
        }
        gx[b * cols + root * dims + d] -= total;
      }
    }
  });
}

Var normalize_2d(Var flat, std::size_t root) {
  const Var centered = root_center(flat, 2, root);
  const Tensor& c = centered.value();
  const std::size_t batch = c.rows();
  Tensor out = c;
  std::vector<double> norms(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const double n = c.matrix().row(static_cast<Eigen::Index>(b)).norm();
    if (n < 1e-12) fail(ErrorCode::ZeroExtent, "2D pose has zero extent after root centering");
    norms[b] = n;
    out.matrix().row(static_cast<Eigen::Index>(b)) /= n;
  }
  const std::size_t ic = centered.id();
  return flat.graph().record(std::move(out), {centered},
                             [ic, batch, norms = std::move(norms)](Graph& g, std::size_t self) {
    if (!g.requires_grad(ic)) return;
    const auto y = g.value(self).matrix();
    const auto gy = g.grad(self).matrix();
    auto gc = g.accumulate_grad(ic).matrix();
    for (std::size_t b = 0; b < batch; ++b) {
      const auto r = static_cast<Eigen::Index>(b);
      const double proj = y.row(r).dot(gy.row(r));
      gc.row(r) += (gy.row(r) - proj * y.row(r)) / norms[b];
    }
  });
}

Var transpose_rotations(Var rotations) {
  const Tensor& r = rotations.value();
  require(r.rank() == 2 && r.cols() == 9, "transpose_rotations expects [B, 9]");
  static constexpr std::size_t kPerm[9] = {0, 3, 6, 1, 4, 7, 2, 5, 8};
  Tensor out(r.shape());
  for (std::size_t b = 0; b < r.rows(); ++b)
    for (std::size_t k = 0; k < 9; ++k) out[9 * b + k] = r[9 * b + kPerm[k]];
  const std::size_t ir = rotations.id();
  return rotations.graph().record(std::move(out), {rotations}, [ir](Graph& g, std::size_t self) {
    if (!g.requires_grad(ir)) return;
    const Tensor& gy = g.grad(self);
    Tensor& gx = g.accumulate_grad(ir);
    for (std::size_t b = 0; b < gy.rows(); ++b)
      for (std::size_t k = 0; k < 9; ++k) gx[9 * b + kPerm[k]] += gy[9 * b + k];
  });
}

Var reprojection_loss(std::span<const Var> predictions, std::span<const Tensor> observations,
                      const RotationLookup& rotation, std::span<const Tensor> masks) {
  const std::size_t n = predictions.size();
  require(n > 0 && observations.size() == n, "reprojection_loss needs one observation per prediction");
  require(masks.empty() || masks.size() == n, "reprojection_loss needs one mask per view");
  Graph& g = predictions.front().graph();
  const std::size_t batch = predictions.front().value().rows();
  const Var identity = g.constant(Tensor(Shape{1, 9}, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  Var per_sample;
  for (std::size_t j = 0; j < n; ++j) {
    const Var obs = g.constant(observations[j]);
    for (std::size_t i = 0; i < n; ++i) {
      const Var r = i == j ? identity : rotation(i, j);
      Var residual = obs - normalize_2d(rotate_project(predictions[i], r));
      if (!masks.empty()) residual = residual * g.constant(masks[j]);
      const Var term = nn::row_norm(residual);
      per_sample = per_sample.valid() ? per_sample + term : term;
    }
  }
  return nn::scale(nn::sum(per_sample), 1.0 / static_cast<double>(batch));
}

}  // namespace ops

}  // namespace tripose

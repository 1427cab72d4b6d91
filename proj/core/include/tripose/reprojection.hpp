#pragma once

#include "tripose/geometry.hpp"
#include "tripose/nn/graph.hpp"

#include <functional>
#include <span>
#include <vector>

namespace tripose {

/// First two rows of R X for every joint: [[1,0,0],[0,1,0]] R X.
Pose2D weak_perspective_project(const Pose3D& pose, const Mat3& rotation);

/// Root-centered, then divided by the Frobenius norm of the centered pose.
/// Throws ZeroExtent when that norm is below 1e-12.
Pose2D normalize_2d(const Pose2D& pose, int root = 0);

/// Sum over all view pairs (i, j), i == j included, of
/// |normalize(obs_j) - normalize(project(pred_i, R_ij))|_F.
/// `rotations[i][j]` maps view-i camera coordinates to view j.
/// `joint_masks`, if given, holds one 0/1 vector per observed view; masked
/// joints contribute no residual.
double reprojection_loss(const std::vector<Pose3D>& predictions, const std::vector<Pose2D>& observations,
                         const std::vector<std::vector<Mat3>>& rotations,
                         const std::vector<Eigen::VectorXd>& joint_masks = {});

namespace ops {

// Batched, differentiable counterparts. Poses are flattened per row:
// [B, 3J] for 3D and [B, 2J] for 2D, joint-major (x0, y0, z0, x1, ...).
// Rotations are [B, 9] (or [1, 9] shared by all rows), row-major R.

nn::Var rotate_project(nn::Var poses, nn::Var rotations);

/// Subtract the root joint from every joint of each row.
nn::Var root_center(nn::Var flat, std::size_t dims, std::size_t root = 0);

/// Root-centers each [B, 2J] row and scales it to unit norm.
nn::Var normalize_2d(nn::Var flat, std::size_t root = 0);

/// R -> R^T for each row of a [B, 9] rotation tensor.
nn::Var transpose_rotations(nn::Var rotations);

/// Returns the pair rotation Var for (i, j), i != j.
using RotationLookup = std::function<nn::Var(std::size_t i, std::size_t j)>;

/// Batch mean of the per-sample reprojection loss. `observations` are already
/// normalized [B, 2J]; `masks` (optional) are 0/1 [B, 2J].
nn::Var reprojection_loss(std::span<const nn::Var> predictions, std::span<const nn::Tensor> observations,
                          const RotationLookup& rotation, std::span<const nn::Tensor> masks = {});

}  // namespace ops

}  // namespace tripose

#pragma once

#include "tripose/geometry.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace tripose {

/// A point pair with the epipolar convention x2^T F x1 = 0.
struct Correspondence {
  Vec2 x1;
  Vec2 x2;
};

/// Rank-2 fundamental matrix, stored with unit Frobenius norm and the last
/// nonzero entry (row-major scan) positive so equal geometries compare equal.
class FundamentalMatrix {
 public:
  FundamentalMatrix() = default;
  /// Enforces rank 2 and the scale/sign normalization.
  explicit FundamentalMatrix(const Mat3& m);

  const Mat3& matrix() const { return m_; }
  double residual(const Correspondence& c) const;
  /// Square root of the Sampson error: a first-order estimate of the
  /// distance from the correspondence to the epipolar variety.
  double sampson_distance(const Correspondence& c) const;

 private:
  Mat3 m_ = Mat3::Zero();
};

/// Scale to unit Frobenius norm and fix the sign; no rank projection.
Mat3 normalize_scale_and_sign(const Mat3& m);

/// K2^-T [t]_x R K1^-1 for a known rig.
Mat3 fundamental_from_pose(const RelativePose& pose, const Intrinsics& k1, const Intrinsics& k2);

/// Normalized (Hartley) eight-point algorithm over >= 8 correspondences.
FundamentalMatrix estimate_fundamental_8pt(std::span<const Correspondence> correspondences);

struct RansacConfig {
  /// Sampson-distance inlier threshold in intrinsics-normalized coordinates.
  double threshold = 3.0 / 2000.0;
  double confidence = 0.999;
  int max_iterations = 10000;
  std::uint64_t seed = 0;

  /// Threshold 3 / (f1 + f2).
  static RansacConfig for_focals(double f1, double f2);
  void validate() const;
};

struct RansacResult {
  FundamentalMatrix fundamental;
  std::vector<bool> inliers;
  int inlier_count = 0;
  int iterations = 0;
};

/// Robust fit with 8-point hypotheses. `confidences` (may be empty) weight
/// the minimal-sample draw; the result is refit on the consensus set.
RansacResult ransac_fundamental(std::span<const Correspondence> correspondences,
                                std::span<const double> confidences, const RansacConfig& config);

/// Projects onto the essential manifold: singular values (s, s, 0).
Mat3 project_to_essential(const Mat3& m);

/// E = K2^T F K1 followed by manifold projection.
Mat3 essential_from_fundamental(const FundamentalMatrix& f, const Intrinsics& k1, const Intrinsics& k2);

/// The four (R, t) factorizations of E, each with det R = +1 and |t| = 1.
std::array<RelativePose, 4> essential_candidates(const Mat3& e);

/// Number of normalized correspondences that triangulate in front of both cameras.
int count_in_front(const RelativePose& pose, std::span<const Correspondence> normalized);

/// Picks the candidate with most points in front of both cameras.
/// Correspondences are in pixels. Throws CheiralityAmbiguous on a tie.
RelativePose decompose_essential(const Mat3& e, std::span<const Correspondence> correspondences,
                                 const Intrinsics& k1, const Intrinsics& k2);

struct PoseRefinement {
  RelativePose pose;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
};

/// Levenberg-Marquardt over (R, t) with |t| = 1, minimizing
/// sum c^2 log(1 + r^2 / c^2) of signed Sampson residuals r of normalized
/// correspondences. Steps are only taken when they lower the cost, so the
/// result is never worse than `initial`.
PoseRefinement refine_relative_pose(std::span<const Correspondence> normalized, const RelativePose& initial,
                                    double scale, int max_iterations = 100);

struct PairCalibration {
  FundamentalMatrix fundamental;  ///< pixel coordinates
  Mat3 essential = Mat3::Zero();
  RelativePose pose;
  std::vector<bool> inliers;
  int inlier_count = 0;
  int iterations = 0;
  double mean_sampson = 0.0;  ///< inliers, normalized coordinates
  double max_sampson = 0.0;
  /// Robust cost before and after the final pose refinement.
  double linear_cost = 0.0;
  double refined_cost = 0.0;
};

/// Gated correspondences -> RANSAC -> essential -> cheirality-resolved pose,
/// then robust refinement over all correspondences with the RANSAC threshold
/// as the kernel scale. Inliers and residual stats refer to the refined model.
PairCalibration calibrate_pair(std::span<const Correspondence> pixels, std::span<const double> confidences,
                               const Intrinsics& k1, const Intrinsics& k2, const RansacConfig& config);

}  // namespace tripose

#include "tripose/epipolar.hpp"

#include "tripose/errors.hpp"
#include "tripose/triangulation.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace tripose {

namespace {

using DesignMatrix = Eigen::Matrix<double, Eigen::Dynamic, 9>;

// Isotropic scaling: centroid to the origin, mean distance sqrt(2).
Mat3 hartley_transform(std::span<const Vec2> points) {
  Vec2 centroid = Vec2::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());
  double mean_distance = 0.0;
  for (const auto& p : points) mean_distance += (p - centroid).norm();
  mean_distance /= static_cast<double>(points.size());
  if (mean_distance < 1e-12) fail(ErrorCode::DegenerateConfiguration, "all points coincide");
  const double s = std::sqrt(2.0) / mean_distance;
  Mat3 t;
  t << s, 0.0, -s * centroid.x(), 0.0, s, -s * centroid.y(), 0.0, 0.0, 1.0;
  return t;
}

Mat3 enforce_rank2(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 s = svd.singularValues();
  s(2) = 0.0;
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

}  // namespace

Mat3 normalize_scale_and_sign(const Mat3& m) {
  const double norm = m.norm();
  if (norm < std::numeric_limits<double>::min()) return m;
  Mat3 out = m / norm;
  for (int idx = 8; idx >= 0; --idx) {
    const double v = out(idx / 3, idx % 3);
    if (std::abs(v) > 1e-14) {
      if (v < 0.0) out = -out;
      break;
    }
  }
  return out;
}

FundamentalMatrix::FundamentalMatrix(const Mat3& m) : m_(normalize_scale_and_sign(enforce_rank2(m))) {}

double FundamentalMatrix::residual(const Correspondence& c) const {
  return c.x2.homogeneous().dot(m_ * c.x1.homogeneous());
}

double FundamentalMatrix::sampson_distance(const Correspondence& c) const {
  const Vec3 fx1 = m_ * c.x1.homogeneous();
  const Vec3 ftx2 = m_.transpose() * c.x2.homogeneous();
  const double r = c.x2.homogeneous().dot(fx1);
  const double denom = fx1.head<2>().squaredNorm() + ftx2.head<2>().squaredNorm();
  if (denom <= 0.0) return std::abs(r) > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return std::abs(r) / std::sqrt(denom);
}

Mat3 fundamental_from_pose(const RelativePose& pose, const Intrinsics& k1, const Intrinsics& k2) {
  return k2.inverse().transpose() * skew(pose.translation) * pose.rotation * k1.inverse();
}

FundamentalMatrix estimate_fundamental_8pt(std::span<const Correspondence> correspondences) {
  const auto n = correspondences.size();
  if (n < 8) fail(ErrorCode::DegenerateConfiguration, "need at least 8 correspondences, got " + std::to_string(n));

  std::vector<Vec2> p1(n), p2(n);
  for (std::size_t i = 0; i < n; ++i) {
    p1[i] = correspondences[i].x1;
    p2[i] = correspondences[i].x2;
  }
  const Mat3 t1 = hartley_transform(p1);
  const Mat3 t2 = hartley_transform(p2);

  // Row i encodes x2^T F x1 = 0 with f the row-major flattening of F.
  DesignMatrix a(static_cast<Eigen::Index>(std::max<std::size_t>(n, 9)), 9);
  a.setZero();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 x1 = t1 * p1[i].homogeneous();
    const Vec3 x2 = t2 * p2[i].homogeneous();
    const auto r = static_cast<Eigen::Index>(i);
    a.row(r) << x2(0) * x1(0), x2(0) * x1(1), x2(0), x2(1) * x1(0), x2(1) * x1(1), x2(1), x1(0), x1(1), 1.0;
  }
  Eigen::JacobiSVD<DesignMatrix> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // A one-dimensional null space is expected; a second near-zero singular
  // value means the points do not pin F down.
  if (sv(7) <= 1e-9 * sv(0)) {
    fail(ErrorCode::DegenerateConfiguration, "design matrix null space has dimension > 1");
  }
  const Eigen::Matrix<double, 9, 1> f = svd.matrixV().col(8);
  Mat3 fn;
  fn << f(0), f(1), f(2), f(3), f(4), f(5), f(6), f(7), f(8);
  fn = enforce_rank2(fn);
  return FundamentalMatrix(t2.transpose() * fn * t1);
}

RansacConfig RansacConfig::for_focals(double f1, double f2) {
  RansacConfig c;
  c.threshold = 3.0 / (f1 + f2);
  return c;
}

void RansacConfig::validate() const {
  if (!(threshold > 0.0)) fail(ErrorCode::InvalidArgument, "RANSAC threshold must be > 0");
  if (!(confidence > 0.0 && confidence < 1.0)) fail(ErrorCode::InvalidArgument, "RANSAC confidence must be in (0, 1)");
  if (max_iterations < 1) fail(ErrorCode::InvalidArgument, "RANSAC max_iterations must be >= 1");
}

namespace {

struct Score {
  int count = 0;
  double error = std::numeric_limits<double>::infinity();

  bool better_than(const Score& o) const { return count > o.count || (count == o.count && error < o.error); }
};

Score score(const FundamentalMatrix& f, std::span<const Correspondence> pts, double threshold,
            std::vector<bool>* mask) {
  Score s{0, 0.0};
  if (mask) mask->assign(pts.size(), false);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = f.sampson_distance(pts[i]);
    if (d <= threshold) {
      ++s.count;
      s.error += d;
      if (mask) (*mask)[i] = true;
    }
  }
  return s;
}

std::vector<Correspondence> select(std::span<const Correspondence> pts, const std::vector<bool>& mask) {
  std::vector<Correspondence> out;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (mask[i]) out.push_back(pts[i]);
  return out;
}

}  // namespace

RansacResult ransac_fundamental(std::span<const Correspondence> correspondences,
                                std::span<const double> confidences, const RansacConfig& config) {
  config.validate();
  const auto n = correspondences.size();
  if (n < 8) fail(ErrorCode::DegenerateConfiguration, "RANSAC needs at least 8 correspondences");
  if (!confidences.empty() && confidences.size() != n) {
    fail(ErrorCode::ShapeMismatch, "confidences must match correspondences");
  }

  std::mt19937_64 rng(config.seed);
  std::vector<double> weights(n, 1.0);
  for (std::size_t i = 0; i < confidences.size(); ++i) weights[i] = std::max(confidences[i], 1e-6);
  std::discrete_distribution<std::size_t> draw(weights.begin(), weights.end());

  constexpr int kSample = 8;
  FundamentalMatrix best;
  Score best_score;
  bool found = false;
  long long required = config.max_iterations;
  int iteration = 0;
  std::vector<std::size_t> sample;
  std::vector<Correspondence> minimal(kSample);
  while (iteration < required && iteration < config.max_iterations) {
    ++iteration;
    sample.clear();
    // Distinct indices; bounded retries guard against a few dominant weights.
    for (int guard = 0; sample.size() < kSample && guard < 1000; ++guard) {
      const std::size_t idx = draw(rng);
      if (std::find(sample.begin(), sample.end(), idx) == sample.end()) sample.push_back(idx);
    }
    if (sample.size() < kSample) continue;
    for (int k = 0; k < kSample; ++k) minimal[static_cast<std::size_t>(k)] = correspondences[sample[static_cast<std::size_t>(k)]];
    FundamentalMatrix hypothesis;
    try {
      hypothesis = estimate_fundamental_8pt(minimal);
    } catch (const Error&) {
      continue;
    }
    const Score s = score(hypothesis, correspondences, config.threshold, nullptr);
    if (s.count >= kSample && (!found || s.better_than(best_score))) {
      found = true;
      best = hypothesis;
      best_score = s;
      const double w = static_cast<double>(s.count) / static_cast<double>(n);
      const double p_good = std::pow(w, kSample);
      if (p_good >= 1.0) {
        required = iteration;
      } else if (p_good > 0.0) {
        // log1p keeps tiny inlier ratios from rounding 1 - p to 1.
        const double needed = std::log(1.0 - config.confidence) / std::log1p(-p_good);
        if (std::isfinite(needed) && needed < config.max_iterations)
          required = std::max<long long>(static_cast<long long>(std::ceil(needed)), 1);
        else
          required = config.max_iterations;
      }
    }
  }
  if (!found) fail(ErrorCode::NoConsensus, "no hypothesis reached 8 inliers");

  RansacResult result;
  result.iterations = iteration;
  score(best, correspondences, config.threshold, &result.inliers);
  // Refit on the consensus set until the mask settles.
  for (int round = 0; round < 5; ++round) {
    const auto subset = select(correspondences, result.inliers);
    FundamentalMatrix refit;
    try {
      refit = estimate_fundamental_8pt(subset);
    } catch (const Error&) {
      break;
    }
    std::vector<bool> mask;
    const Score s = score(refit, correspondences, config.threshold, &mask);
    if (s.count < kSample) break;
    best = refit;
    const bool settled = mask == result.inliers;
    result.inliers = std::move(mask);
    if (settled) break;
  }
  result.fundamental = best;
  result.inlier_count = static_cast<int>(std::count(result.inliers.begin(), result.inliers.end(), true));
  return result;
}

Mat3 project_to_essential(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 s = svd.singularValues();
  const double mean = 0.5 * (s(0) + s(1));
  return svd.matrixU() * Vec3(mean, mean, 0.0).asDiagonal() * svd.matrixV().transpose();
}

Mat3 essential_from_fundamental(const FundamentalMatrix& f, const Intrinsics& k1, const Intrinsics& k2) {
  // inverse() raises SingularIntrinsics for a non-invertible K.
  (void)k1.inverse();
  (void)k2.inverse();
  return project_to_essential(k2.matrix().transpose() * f.matrix() * k1.matrix());
}

std::array<RelativePose, 4> essential_candidates(const Mat3& e) {
  Eigen::JacobiSVD<Mat3> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  Mat3 v = svd.matrixV();
  // E is only defined up to sign, so flipping U or V keeps it valid.
  if (u.determinant() < 0.0) u = -u;
  if (v.determinant() < 0.0) v = -v;
  Mat3 w;
  w << 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0;
  const Mat3 ra = u * w * v.transpose();
  const Mat3 rb = u * w.transpose() * v.transpose();
  const Vec3 t = u.col(2).normalized();
  return {RelativePose{ra, t}, RelativePose{ra, -t}, RelativePose{rb, t}, RelativePose{rb, -t}};
}

int count_in_front(const RelativePose& pose, std::span<const Correspondence> normalized) {
  const ProjectionMatrix p1 = projection_matrix(Intrinsics{}, Mat3::Identity(), Vec3::Zero());
  const ProjectionMatrix p2 = projection_matrix(Intrinsics{}, pose.rotation, pose.translation);
  int count = 0;
  for (const auto& c : normalized) {
    try {
      const Vec3 x = triangulate_linear(c.x1, c.x2, p1, p2);
      if (x.z() > 0.0 && (pose.rotation * x + pose.translation).z() > 0.0) ++count;
    } catch (const Error&) {
      // A point at infinity is in front of neither camera.
    }
  }
  return count;
}

RelativePose decompose_essential(const Mat3& e, std::span<const Correspondence> correspondences,
                                 const Intrinsics& k1, const Intrinsics& k2) {
  if (correspondences.empty()) fail(ErrorCode::InvalidArgument, "cheirality check needs at least one correspondence");
  std::vector<Correspondence> normalized;
  normalized.reserve(correspondences.size());
  for (const auto& c : correspondences) normalized.push_back({k1.normalize(c.x1), k2.normalize(c.x2)});

  const auto candidates = essential_candidates(e);
  std::array<int, 4> counts{};
  for (std::size_t i = 0; i < 4; ++i) counts[i] = count_in_front(candidates[i], normalized);
  const auto best = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  for (std::size_t i = 0; i < 4; ++i) {
    if (i != best && counts[i] == counts[best]) {
      fail(ErrorCode::CheiralityAmbiguous,
           "candidates " + std::to_string(best) + " and " + std::to_string(i) + " both have " +
               std::to_string(counts[best]) + " points in front");
    }
  }
  return candidates[best];
}

namespace {

double signed_sampson(const Mat3& e, const Correspondence& c) {
  const Vec3 x1 = c.x1.homogeneous(), x2 = c.x2.homogeneous();
  const Vec3 ex1 = e * x1, etx2 = e.transpose() * x2;
  const double denom = ex1.head<2>().squaredNorm() + etx2.head<2>().squaredNorm();
  return denom > 0.0 ? x2.dot(ex1) / std::sqrt(denom) : 0.0;
}

using Step = Eigen::Matrix<double, 5, 1>;

// Rotation increment on the right, translation moved in the tangent plane.
RelativePose perturb(const RelativePose& p, const Vec3& ta, const Vec3& tb, const Step& d) {
  const Vec3 w = d.head<3>();
  const double angle = w.norm();
  const Mat3 dr = angle > 0.0 ? Mat3(Eigen::AngleAxisd(angle, w / angle)) : Mat3::Identity();
  return {p.rotation * dr, (p.translation + d(3) * ta + d(4) * tb).normalized()};
}

}  // namespace

PoseRefinement refine_relative_pose(std::span<const Correspondence> normalized, const RelativePose& initial,
                                    double scale, int max_iterations) {
  if (!(scale > 0.0)) fail(ErrorCode::InvalidArgument, "refinement scale must be positive");
  const double c2 = scale * scale;
  auto cost = [&](const RelativePose& p) {
    const Mat3 e = skew(p.translation) * p.rotation;
    double sum = 0.0;
    for (const auto& c : normalized) sum += c2 * std::log1p(std::pow(signed_sampson(e, c), 2) / c2);
    return sum;
  };

  PoseRefinement out;
  out.pose = {initial.rotation, initial.translation.normalized()};
  out.initial_cost = out.final_cost = cost(out.pose);
  double lambda = 1e-3;
  constexpr double h = 1e-7;
  for (; out.iterations < max_iterations; ++out.iterations) {
    const Vec3 ta = out.pose.translation.unitOrthogonal();
    const Vec3 tb = out.pose.translation.cross(ta);
    const Mat3 e = skew(out.pose.translation) * out.pose.rotation;
    std::array<Mat3, 5> plus, minus;
    for (int k = 0; k < 5; ++k) {
      const Step d = Step::Unit(k) * h;
      const RelativePose p = perturb(out.pose, ta, tb, d), m = perturb(out.pose, ta, tb, -d);
      plus[static_cast<std::size_t>(k)] = skew(p.translation) * p.rotation;
      minus[static_cast<std::size_t>(k)] = skew(m.translation) * m.rotation;
    }
    // Gauss-Newton on the iteratively reweighted residuals.
    Eigen::Matrix<double, 5, 5> hess = Eigen::Matrix<double, 5, 5>::Zero();
    Step grad = Step::Zero();
    for (const auto& c : normalized) {
      const double r = signed_sampson(e, c);
      const double w = 1.0 / (1.0 + r * r / c2);
      Step j;
      for (std::size_t k = 0; k < 5; ++k) j(static_cast<Eigen::Index>(k)) = (signed_sampson(plus[k], c) - signed_sampson(minus[k], c)) / (2 * h);
      hess.noalias() += w * j * j.transpose();
      grad.noalias() += w * r * j;
    }
    bool improved = false;
    for (int attempt = 0; attempt < 10 && !improved; ++attempt) {
      Eigen::Matrix<double, 5, 5> a = hess;
      a.diagonal() *= 1.0 + lambda;
      const Step d = -a.ldlt().solve(grad);
      const RelativePose candidate = perturb(out.pose, ta, tb, d);
      const double next = cost(candidate);
      if (std::isfinite(next) && next < out.final_cost) {
        const double gain = out.final_cost - next;
        out.pose = candidate;
        out.final_cost = next;
        lambda *= 0.3;
        improved = true;
        if (gain <= 1e-12 * next) return out;
      } else {
        lambda *= 10.0;
      }
    }
    if (!improved) break;
  }
  return out;
}

PairCalibration calibrate_pair(std::span<const Correspondence> pixels, std::span<const double> confidences,
                               const Intrinsics& k1, const Intrinsics& k2, const RansacConfig& config) {
  std::vector<Correspondence> normalized;
  normalized.reserve(pixels.size());
  for (const auto& c : pixels) normalized.push_back({k1.normalize(c.x1), k2.normalize(c.x2)});

  const RansacResult fit = ransac_fundamental(normalized, confidences, config);
  PairCalibration out;
  out.iterations = fit.iterations;
  {
    const FundamentalMatrix f(k2.inverse().transpose() * fit.fundamental.matrix() * k1.inverse());
    std::vector<Correspondence> inlier_pixels;
    for (std::size_t i = 0; i < pixels.size(); ++i)
      if (fit.inliers[i]) inlier_pixels.push_back(pixels[i]);
    out.pose = decompose_essential(essential_from_fundamental(f, k1, k2), inlier_pixels, k1, k2);
  }

  const PoseRefinement refined = refine_relative_pose(normalized, out.pose, config.threshold);
  out.pose = refined.pose;
  {
    // The cost cannot tell the twisted pair apart; recheck cheirality on the
    // refined model's inliers.
    const FundamentalMatrix m(skew(out.pose.translation) * out.pose.rotation);
    std::vector<Correspondence> inliers;
    for (const auto& c : normalized)
      if (m.sampson_distance(c) <= config.threshold) inliers.push_back(c);
    int best = count_in_front(out.pose, inliers);
    for (const auto& candidate : essential_candidates(m.matrix())) {
      const int n = count_in_front(candidate, inliers);
      if (n > best) {
        best = n;
        out.pose = candidate;
      }
    }
  }
  out.linear_cost = refined.initial_cost;
  out.refined_cost = refined.final_cost;
  const FundamentalMatrix model(skew(out.pose.translation) * out.pose.rotation);
  out.fundamental = FundamentalMatrix(fundamental_from_pose(out.pose, k1, k2));
  out.essential = essential_from_fundamental(out.fundamental, k1, k2);

  out.inliers.assign(pixels.size(), false);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const double d = model.sampson_distance(normalized[i]);
    if (d > config.threshold) continue;
    out.inliers[i] = true;
    ++out.inlier_count;
    out.mean_sampson += d;
    out.max_sampson = std::max(out.max_sampson, d);
  }
  if (out.inlier_count > 0) out.mean_sampson /= out.inlier_count;
  return out;
}

}  // namespace tripose

#include "tripose/triangulation.hpp"

#include "tripose/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <complex>
#include <limits>

namespace tripose {

ProjectionMatrix projection_matrix(const Intrinsics& k, const Mat3& r, const Vec3& t) {
  ProjectionMatrix rt;
  rt.leftCols<3>() = r;
  rt.col(3) = t;
  return k.matrix() * rt;
}

void GateConfig::validate() const {
  if (mean_threshold < 0.0 || mean_threshold > 1.0 || joint_threshold < 0.0 || joint_threshold > 1.0) {
    fail(ErrorCode::InvalidArgument, "gate thresholds must lie in [0, 1]");
  }
}

bool gate_view(const Eigen::VectorXd& confidences, const GateConfig& config) {
  if (confidences.size() == 0) return false;
  return confidences.mean() >= config.mean_threshold && confidences.minCoeff() >= config.joint_threshold;
}

std::vector<int> gate_views(const std::vector<Eigen::VectorXd>& per_view, const GateConfig& config) {
  config.validate();
  std::vector<int> accepted;
  for (std::size_t v = 0; v < per_view.size(); ++v)
    if (gate_view(per_view[v], config)) accepted.push_back(static_cast<int>(v));
  return accepted;
}

Vec3 triangulate_linear(const Vec2& x1, const Vec2& x2, const ProjectionMatrix& p1, const ProjectionMatrix& p2) {
  Eigen::Matrix4d a;
  a.row(0) = x1.x() * p1.row(2) - p1.row(0);
  a.row(1) = x1.y() * p1.row(2) - p1.row(1);
  a.row(2) = x2.x() * p2.row(2) - p2.row(0);
  a.row(3) = x2.y() * p2.row(2) - p2.row(1);
  Eigen::JacobiSVD<Eigen::Matrix4d> svd(a, Eigen::ComputeFullV);
  const Eigen::Vector4d& s = svd.singularValues();
  if (s(2) <= 1e-12 * s(0)) fail(ErrorCode::PointAtInfinity, "rays coincide; depth is undetermined");
  const Eigen::Vector4d x = svd.matrixV().col(3);
  if (std::abs(x(3)) < 1e-12) fail(ErrorCode::PointAtInfinity, "rays are parallel");
  return x.head<3>() / x(3);
}

double reprojection_cost(const Vec3& point, const Vec2& x1, const Vec2& x2, const ProjectionMatrix& p1,
                         const ProjectionMatrix& p2) {
  const Vec3 a = p1 * point.homogeneous();
  const Vec3 b = p2 * point.homogeneous();
  return (a.hnormalized() - x1).squaredNorm() + (b.hnormalized() - x2).squaredNorm();
}

namespace {

using Poly = std::vector<double>;  // constant term first

Poly mul(const Poly& p, const Poly& q) {
  Poly r(p.size() + q.size() - 1, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < q.size(); ++j) r[i + j] += p[i] * q[j];
  return r;
}

Poly add(const Poly& p, const Poly& q, double q_scale = 1.0) {
  Poly r(std::max(p.size(), q.size()), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) r[i] += p[i];
  for (std::size_t i = 0; i < q.size(); ++i) r[i] += q_scale * q[i];
  return r;
}

double eval(const Poly& p, double t) {
  double v = 0.0;
  for (auto it = p.rbegin(); it != p.rend(); ++it) v = v * t + *it;
  return v;
}

double eval_derivative(const Poly& p, double t) {
  double v = 0.0;
  for (std::size_t k = p.size() - 1; k >= 1; --k) v = v * t + static_cast<double>(k) * p[k];
  return v;
}

double scaled_residual(const Poly& p, double t) {
  double mag = 0.0;
  double tk = 1.0;
  for (double c : p) {
    mag += std::abs(c) * tk;
    tk *= std::abs(t);
  }
  return mag > 0.0 ? std::abs(eval(p, t)) / mag : 0.0;
}

std::vector<std::complex<double>> roots(Poly p) {
  double largest = 0.0;
  for (double c : p) largest = std::max(largest, std::abs(c));
  while (p.size() > 1 && std::abs(p.back()) <= 1e-14 * largest) p.pop_back();
  const auto degree = static_cast<Eigen::Index>(p.size()) - 1;
  if (degree < 1) return {};
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(degree, degree);
  for (Eigen::Index i = 1; i < degree; ++i) companion(i, i - 1) = 1.0;
  for (Eigen::Index i = 0; i < degree; ++i) companion(i, degree - 1) = -p[static_cast<std::size_t>(i)] / p.back();
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  std::vector<std::complex<double>> out;
  for (Eigen::Index i = 0; i < degree; ++i) out.push_back(solver.eigenvalues()(i));
  return out;
}

// Newton refinement; NumericalFailure if it blows up.
double polish(const Poly& p, double t) {
  double best = t;
  double best_res = std::abs(eval(p, t));
  for (int it = 0; it < 50; ++it) {
    const double d = eval_derivative(p, t);
    if (d == 0.0) break;
    const double step = eval(p, t) / d;
    t -= step;
    if (!std::isfinite(t)) fail(ErrorCode::NumericalFailure, "root polishing diverged");
    const double res = std::abs(eval(p, t));
    if (res < best_res) {
      best = t;
      best_res = res;
    }
    if (std::abs(step) <= 1e-15 * (1.0 + std::abs(t))) break;
  }
  return best;
}

// Foot of the perpendicular from the origin to the line (l0, l1, l2).
Vec3 closest_to_origin(const Vec3& l) { return {-l(0) * l(2), -l(1) * l(2), l(0) * l(0) + l(1) * l(1)}; }

}  // namespace

EpipolarCorrection correct_correspondence(const Vec2& x1, const Vec2& x2, const Mat3& f) {
  // Move both measurements to the origin.
  Mat3 t1_inv = Mat3::Identity();
  t1_inv.col(2) << x1.x(), x1.y(), 1.0;
  Mat3 t2_inv = Mat3::Identity();
  t2_inv.col(2) << x2.x(), x2.y(), 1.0;
  const Mat3 ft = t2_inv.transpose() * f * t1_inv;

  Eigen::JacobiSVD<Mat3> svd(ft, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 e1 = svd.matrixV().col(2);
  Vec3 e2 = svd.matrixU().col(2);
  const double n1 = e1.head<2>().norm();
  const double n2 = e2.head<2>().norm();
  if (n1 < 1e-14 || n2 < 1e-14) fail(ErrorCode::NumericalFailure, "measured point coincides with an epipole");
  e1 /= n1;
  e2 /= n2;
  Mat3 r1;
  r1 << e1(0), e1(1), 0.0, -e1(1), e1(0), 0.0, 0.0, 0.0, 1.0;
  Mat3 r2;
  r2 << e2(0), e2(1), 0.0, -e2(1), e2(0), 0.0, 0.0, 0.0, 1.0;
  const Mat3 fr = r2 * ft * r1.transpose();
  const double f1 = e1(2);
  const double f2 = e2(2);
  const double a = fr(1, 1), b = fr(1, 2), c = fr(2, 1), d = fr(2, 2);

  const Poly at_b{b, a};
  const Poly ct_d{d, c};
  const Poly inner = add(mul(at_b, at_b), mul(ct_d, ct_d), f2 * f2);
  const Poly term1 = mul(Poly{0.0, 1.0}, mul(inner, inner));
  const Poly q{1.0, 0.0, f1 * f1};
  const Poly term2 = mul(mul(q, q), mul(at_b, ct_d));
  const Poly g = add(term1, term2, -(a * d - b * c));

  auto cost = [&](double t) {
    const double lin = c * t + d;
    const double den = (a * t + b) * (a * t + b) + f2 * f2 * lin * lin;
    return t * t / (1.0 + f1 * f1 * t * t) + (den > 0.0 ? lin * lin / den : 0.0);
  };
  const double cost_inf = (f1 != 0.0 ? 1.0 / (f1 * f1) : std::numeric_limits<double>::infinity()) +
                          (a * a + f2 * f2 * c * c > 0.0 ? c * c / (a * a + f2 * f2 * c * c) : 0.0);

  double best_t = std::numeric_limits<double>::infinity();
  double best_cost = cost_inf;
  for (const auto& z : roots(g)) {
    double t = z.real();
    if (std::abs(z.imag()) <= 1e-6 * (1.0 + std::abs(z.real()))) t = polish(g, t);
    const double s = cost(t);
    if (s < best_cost) {
      best_cost = s;
      best_t = t;
    }
  }

  EpipolarCorrection out;
  out.polynomial = g;
  out.parameter = best_t;
  Vec3 l1, l2;
  if (std::isinf(best_t)) {
    l1 << f1, 0.0, -1.0;
    l2 << -f2 * c, a, c;
    out.scaled_residual = 0.0;
  } else {
    l1 << best_t * f1, 1.0, -best_t;
    l2 << -f2 * (c * best_t + d), a * best_t + b, c * best_t + d;
    out.scaled_residual = scaled_residual(g, best_t);
  }
  const Vec3 p1 = t1_inv * r1.transpose() * closest_to_origin(l1);
  const Vec3 p2 = t2_inv * r2.transpose() * closest_to_origin(l2);
  if (std::abs(p1.z()) < 1e-300 || std::abs(p2.z()) < 1e-300) {
    fail(ErrorCode::NumericalFailure, "corrected point at infinity");
  }
  out.x1 = p1.hnormalized();
  out.x2 = p2.hnormalized();
  if (!out.x1.allFinite() || !out.x2.allFinite()) fail(ErrorCode::NumericalFailure, "non-finite corrected point");
  return out;
}

Vec3 triangulate_polynomial(const Vec2& x1, const Vec2& x2, const Mat3& f, const ProjectionMatrix& p1,
                            const ProjectionMatrix& p2) {
  const EpipolarCorrection corrected = correct_correspondence(x1, x2, f);
  return triangulate_linear(corrected.x1, corrected.x2, p1, p2);
}

Pose3D triangulate_joints(const Pose2D& view1, const Pose2D& view2, const RelativePose& pose,
                          const Intrinsics& k1, const Intrinsics& k2) {
  if (view1.rows() != view2.rows()) fail(ErrorCode::ShapeMismatch, "views disagree on joint count");
  const ProjectionMatrix p1 = projection_matrix(k1, Mat3::Identity(), Vec3::Zero());
  const ProjectionMatrix p2 = projection_matrix(k2, pose.rotation, pose.translation);
  const Mat3 f = fundamental_from_pose(pose, k1, k2);
  Pose3D out(view1.rows(), 3);
  for (Eigen::Index j = 0; j < view1.rows(); ++j) {
    out.row(j) = triangulate_polynomial(view1.row(j).transpose(), view2.row(j).transpose(), f, p1, p2).transpose();
  }
  return out;
}

double skeleton_scale(const Pose3D& raw, const Skeleton& skeleton) {
  if (!raw.allFinite()) fail(ErrorCode::InvalidArgument, "pose has non-finite coordinates");
  const double mean = skeleton.mean_bone_length(raw);
  if (mean < 1e-12) fail(ErrorCode::ZeroExtent, "pose has zero mean bone length");
  return skeleton.mean_bone_length() / mean;
}

Pose3D scale_to_skeleton(const Pose3D& raw, const Skeleton& skeleton) { return skeleton_scale(raw, skeleton) * raw; }

Pose3D triangulate_pose(const Pose2D& view1, const Pose2D& view2, const RelativePose& pose,
                        const Intrinsics& k1, const Intrinsics& k2, const Skeleton& skeleton) {
  return root_centered(scale_to_skeleton(triangulate_joints(view1, view2, pose, k1, k2), skeleton));
}

Pose3D transfer_to_view(const Pose3D& pose, const Mat3& rotation) { return pose * rotation.transpose(); }

double triangulation_loss(const Pose3D& predicted, const Pose3D& target) {
  if (predicted.rows() != target.rows()) fail(ErrorCode::ShapeMismatch, "joint counts differ");
  return (target - predicted).rowwise().norm().mean();
}

Pose3D triangulation_loss_gradient(const Pose3D& predicted, const Pose3D& target) {
  if (predicted.rows() != target.rows()) fail(ErrorCode::ShapeMismatch, "joint counts differ");
  Pose3D grad = Pose3D::Zero(predicted.rows(), 3);
  const double inv_j = 1.0 / static_cast<double>(predicted.rows());
  for (Eigen::Index j = 0; j < predicted.rows(); ++j) {
    const Eigen::RowVector3d diff = predicted.row(j) - target.row(j);
    const double n = diff.norm();
    if (n > 0.0) grad.row(j) = inv_j * diff / n;
  }
  return grad;
}

}  // namespace tripose

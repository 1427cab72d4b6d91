#include "tripose/metrics.hpp"

#include "tripose/errors.hpp"

#include <Eigen/SVD>

namespace tripose {

namespace {

void check_shapes(const Pose3D& pred, const Pose3D& gt) {
  if (pred.rows() != gt.rows() || pred.rows() == 0) fail(ErrorCode::ShapeMismatch, "poses differ in joint count");
}

bool collinear(const Eigen::Matrix<double, Eigen::Dynamic, 3>& centered) {
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
  const auto& s = svd.singularValues();
  return s(0) < 1e-12 || s(1) <= 1e-9 * s(0);
}

}  // namespace

double mpjpe(const Pose3D& pred, const Pose3D& gt) {
  check_shapes(pred, gt);
  return (pred - gt).rowwise().norm().mean();
}

double optimal_scale(const Pose3D& pred, const Pose3D& gt) {
  check_shapes(pred, gt);
  const double pp = pred.squaredNorm();
  if (pp < 1e-24) fail(ErrorCode::ZeroExtent, "prediction has zero extent");
  return pred.cwiseProduct(gt).sum() / pp;
}

double nmpjpe(const Pose3D& pred, const Pose3D& gt) { return mpjpe(optimal_scale(pred, gt) * pred, gt); }

Pose3D Similarity::apply(const Pose3D& pose) const {
  return ((scale * pose * rotation.transpose()).rowwise() + translation.transpose()).eval();
}

Similarity procrustes(const Pose3D& pred, const Pose3D& gt) {
  check_shapes(pred, gt);
  const Eigen::RowVector3d mu_p = pred.colwise().mean();
  const Eigen::RowVector3d mu_g = gt.colwise().mean();
  const Pose3D p = pred.rowwise() - mu_p;
  const Pose3D q = gt.rowwise() - mu_g;
  if (collinear(p) || collinear(q)) fail(ErrorCode::DegenerateShape, "Procrustes needs non-collinear joints");

  // gt_j ~ s R pred_j: maximize tr(R^T Q^T P)
  const Mat3 cov = q.transpose() * p;
  const Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 d = Vec3::Ones();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) d(2) = -1.0;
  Similarity out;
  out.rotation = svd.matrixU() * d.asDiagonal() * svd.matrixV().transpose();
  out.scale = svd.singularValues().dot(d) / p.squaredNorm();
  out.translation = mu_g.transpose() - out.scale * out.rotation * mu_p.transpose();
  return out;
}

double pmpjpe(const Pose3D& pred, const Pose3D& gt) { return mpjpe(procrustes(pred, gt).apply(pred), gt); }

EvalReport evaluate(const std::vector<Pose3D>& predictions, const std::vector<Pose3D>& ground_truth) {
  if (predictions.size() != ground_truth.size()) fail(ErrorCode::ShapeMismatch, "prediction and ground-truth frame counts differ");
  if (predictions.empty()) fail(ErrorCode::EmptyDataset, "nothing to evaluate");
  EvalReport report;
  for (std::size_t f = 0; f < predictions.size(); ++f) {
    const FrameMetrics m{mpjpe(predictions[f], ground_truth[f]), nmpjpe(predictions[f], ground_truth[f]),
                         pmpjpe(predictions[f], ground_truth[f])};
    report.frames.push_back(m);
    report.mean.mpjpe += m.mpjpe;
    report.mean.nmpjpe += m.nmpjpe;
    report.mean.pmpjpe += m.pmpjpe;
  }
  const double n = static_cast<double>(predictions.size());
  report.mean.mpjpe /= n;
  report.mean.nmpjpe /= n;
  report.mean.pmpjpe /= n;
  return report;
}

}  // namespace tripose

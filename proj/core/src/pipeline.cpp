#include "tripose/pipeline.hpp"

#include "tripose/errors.hpp"

#include <algorithm>

namespace tripose {

const ViewPairCalibration* MultiViewCalibration::find(int a, int b) const {
  for (const auto& p : pairs)
    if (p.view_a == a && p.view_b == b) return &p;
  return nullptr;
}

std::optional<Mat3> MultiViewCalibration::rotation(int from, int to) const {
  if (from == to) return Mat3::Identity();
  if (const auto* p = find(from, to)) return p->result.pose.rotation;
  if (const auto* p = find(to, from)) return p->result.pose.rotation.transpose();
  return std::nullopt;
}

GatedCorrespondences collect_correspondences(const KeypointSequence2D& a, const KeypointSequence2D& b,
                                             const GateConfig& gate) {
  if (a.frame_count() != b.frame_count()) fail(ErrorCode::ShapeMismatch, "views differ in frame count");
  GatedCorrespondences out;
  for (int f = 0; f < a.frame_count(); ++f) {
    const auto fi = static_cast<std::size_t>(f);
    if (!gate_view(a.confidences[fi], gate) || !gate_view(b.confidences[fi], gate)) continue;
    out.frames.push_back(f);
    for (Eigen::Index j = 0; j < a.frames[fi].rows(); ++j) {
      out.points.push_back({a.frames[fi].row(j).transpose(), b.frames[fi].row(j).transpose()});
      out.confidences.push_back(std::min(a.confidences[fi](j), b.confidences[fi](j)));
    }
  }
  return out;
}

MultiViewCalibration calibrate_views(const std::vector<KeypointSequence2D>& views, const CalibrationOptions& options) {
  options.gate.validate();
  MultiViewCalibration out;
  for (std::size_t a = 0; a < views.size(); ++a) {
    for (std::size_t b = a + 1; b < views.size(); ++b) {
      const auto data = collect_correspondences(views[a], views[b], options.gate);
      if (data.frames.empty()) continue;
      const Intrinsics ka = views[a].resolved_intrinsics();
      const Intrinsics kb = views[b].resolved_intrinsics();
      RansacConfig ransac = RansacConfig::for_focals(ka.fx, kb.fx);
      if (options.threshold) ransac.threshold = *options.threshold;
      ransac.confidence = options.confidence;
      ransac.max_iterations = options.max_iterations;
      ransac.seed = options.seed + 7919 * a + b;
      ViewPairCalibration pair;
      pair.view_a = static_cast<int>(a);
      pair.view_b = static_cast<int>(b);
      pair.frames = data.frames;
      pair.result = calibrate_pair(data.points, data.confidences, ka, kb, ransac);
      out.pairs.push_back(std::move(pair));
    }
  }
  if (out.pairs.empty()) fail(ErrorCode::EmptyDataset, "gating left no frame with two accepted views");
  return out;
}

const PseudoPose* PseudoGroundTruth::find(int frame) const {
  const auto it = std::lower_bound(poses.begin(), poses.end(), frame,
                                   [](const PseudoPose& p, int f) { return p.frame < f; });
  return it != poses.end() && it->frame == frame ? &*it : nullptr;
}

PseudoGroundTruth build_pseudo_ground_truth(const std::vector<KeypointSequence2D>& views,
                                            const MultiViewCalibration& calibration, const Skeleton& skeleton,
                                            const GateConfig& gate) {
  PseudoGroundTruth out;
  if (views.empty()) return out;
  out.frames_total = views.front().frame_count();
  for (int f = 0; f < out.frames_total; ++f) {
    const auto fi = static_cast<std::size_t>(f);
    std::vector<Eigen::VectorXd> confidences;
    for (const auto& v : views) confidences.push_back(v.confidences.at(fi));
    const auto accepted = gate_views(confidences, gate);

    const ViewPairCalibration* best = nullptr;
    double best_score = -1.0;
    for (std::size_t x = 0; x < accepted.size(); ++x) {
      for (std::size_t y = x + 1; y < accepted.size(); ++y) {
        const auto* pair = calibration.find(accepted[x], accepted[y]);
        if (!pair) continue;
        const double s = confidences[static_cast<std::size_t>(accepted[x])].mean() +
                         confidences[static_cast<std::size_t>(accepted[y])].mean();
        if (s > best_score) {
          best_score = s;
          best = pair;
        }
      }
    }
    if (!best) {
      ++out.gated_out;
      continue;
    }
    const auto& va = views[static_cast<std::size_t>(best->view_a)];
    const auto& vb = views[static_cast<std::size_t>(best->view_b)];
    PseudoPose p;
    p.frame = f;
    p.view_a = best->view_a;
    p.view_b = best->view_b;
    p.mean_confidence_a = va.confidences[fi].mean();
    p.mean_confidence_b = vb.confidences[fi].mean();
    try {
      p.pose = triangulate_pose(va.frames[fi], vb.frames[fi], best->result.pose, va.resolved_intrinsics(),
                                vb.resolved_intrinsics(), skeleton);
    } catch (const Error&) {
      ++out.failed;
      continue;
    }
    out.poses.push_back(std::move(p));
  }
  return out;
}

}  // namespace tripose

#include "tripose/io.hpp"

#include "tripose/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace tripose::io {

using json = nlohmann::json;

namespace {

json mat(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json flat(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  return out;
}

Eigen::MatrixXd to_mat(const json& j, Eigen::Index cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const json& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols) fail(ErrorCode::Format, "row of wrong width");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

Mat3 to_mat3(const json& j) {
  if (j.size() != 9) fail(ErrorCode::Format, "3x3 matrix needs 9 values");
  Mat3 m;
  for (int k = 0; k < 9; ++k) m(k / 3, k % 3) = j.at(static_cast<std::size_t>(k)).get<double>();
  return m;
}

Vec3 to_vec3(const json& j) {
  if (j.size() != 3) fail(ErrorCode::Format, "vector needs 3 values");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json intrinsics(const Intrinsics& k) { return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}}; }

Intrinsics to_intrinsics(const json& j) {
  return {j.at("fx").get<double>(), j.at("fy").get<double>(), j.at("cx").get<double>(), j.at("cy").get<double>()};
}

json parse_document(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::Format, std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("schema_version")) fail(ErrorCode::Format, "missing schema_version");
  if (doc["schema_version"] != kSchemaVersion) fail(ErrorCode::Format, "unsupported schema_version");
  return doc;
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

template <typename F>
auto guarded(F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const json::exception& e) {
    fail(ErrorCode::Format, std::string("invalid document: ") + e.what());
  }
}

json network(const NetworkConfig& n) {
  return {{"joints", n.joints}, {"hidden", n.hidden}, {"width", n.width}, {"window", n.window},
          {"output_scale_mm", n.output_scale_mm}};
}

NetworkConfig to_network(const json& j) {
  NetworkConfig n;
  n.joints = j.at("joints").get<int>();
  n.hidden = j.at("hidden").get<int>();
  n.width = j.at("width").get<int>();
  n.window = j.at("window").get<int>();
  n.output_scale_mm = j.at("output_scale_mm").get<double>();
  return n;
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Format, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Format, "cannot write " + path);
  out << contents;
  out.flush();
  if (!out) fail(ErrorCode::Format, "write failed for " + path);
}

std::string dump_scene(const SyntheticScene& scene) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["seed"] = scene.seed;
  doc["projection_mode"] = scene.mode == ProjectionMode::FullPerspective ? "full_perspective" : "weak_perspective";
  doc["observation"] = {{"noise_sigma_px", scene.observation.noise_sigma_px},
                        {"confidence_tau_px", scene.observation.confidence_tau_px},
                        {"occlusion_rate", scene.observation.occlusion_rate}};
  doc["skeleton"] = {{"id", scene.skeleton.id()},
                     {"names", scene.skeleton.names()},
                     {"parents", scene.skeleton.parents()},
                     {"rest_offsets", mat(scene.skeleton.rest_offsets())}};
  json cams = json::array();
  for (const auto& c : scene.cameras) {
    cams.push_back({{"intrinsics", intrinsics(c.intrinsics)},
                    {"rotation", flat(c.rotation)},
                    {"translation", flat(c.translation.transpose())},
                    {"width", c.width},
                    {"height", c.height},
                    {"weak_scale", c.weak_scale}});
  }
  doc["cameras"] = std::move(cams);
  json motion = json::array();
  for (const auto& p : scene.motion) motion.push_back(mat(p));
  doc["motion"] = std::move(motion);
  return dump(doc);
}

SyntheticScene parse_scene(const std::string& text) {
  const json doc = parse_document(text);
  return guarded([&] {
    const json& sk = doc.at("skeleton");
    SyntheticScene s;
    s.skeleton = Skeleton(sk.at("id").get<std::string>(), sk.at("names").get<std::vector<std::string>>(),
                             sk.at("parents").get<std::vector<int>>(), to_mat(sk.at("rest_offsets"), 3));
    s.seed = doc.at("seed").get<std::uint64_t>();
    const auto mode = doc.at("projection_mode").get<std::string>();
    if (mode != "full_perspective" && mode != "weak_perspective") fail(ErrorCode::Format, "unknown projection_mode " + mode);
    s.mode = mode == "full_perspective" ? ProjectionMode::FullPerspective : ProjectionMode::WeakPerspective;
    const json& ob = doc.at("observation");
    s.observation = {ob.at("noise_sigma_px").get<double>(), ob.at("confidence_tau_px").get<double>(),
                     ob.at("occlusion_rate").get<double>()};
    for (const json& c : doc.at("cameras")) {
      Camera cam;
      cam.intrinsics = to_intrinsics(c.at("intrinsics"));
      cam.rotation = to_mat3(c.at("rotation"));
      cam.translation = to_vec3(c.at("translation"));
      cam.width = c.at("width").get<int>();
      cam.height = c.at("height").get<int>();
      cam.weak_scale = c.at("weak_scale").get<double>();
      s.cameras.push_back(cam);
    }
    for (const json& p : doc.at("motion")) s.motion.push_back(to_mat(p, 3));
    s.validate();
    return s;
  });
}

std::string dump_keypoints(const KeypointFile& file) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["skeleton_id"] = file.skeleton_id;
  json views = json::array();
  for (const auto& v : file.views) {
    json view = {{"view_id", v.view_id}, {"width", v.width}, {"height", v.height}};
    if (v.intrinsics) view["intrinsics"] = intrinsics(*v.intrinsics);
    json frames = json::array();
    for (std::size_t f = 0; f < v.frames.size(); ++f) {
      json joints = json::array();
      for (Eigen::Index j = 0; j < v.frames[f].rows(); ++j)
        joints.push_back({v.frames[f](j, 0), v.frames[f](j, 1), v.confidences[f](j)});
      frames.push_back(std::move(joints));
    }
    view["frames"] = std::move(frames);
    views.push_back(std::move(view));
  }
  doc["views"] = std::move(views);
  return dump(doc);
}

KeypointFile parse_keypoints(const std::string& text) {
  const json doc = parse_document(text);
  return guarded([&] {
    KeypointFile out;
    out.skeleton_id = doc.at("skeleton_id").get<std::string>();
    for (const json& v : doc.at("views")) {
      KeypointSequence2D seq;
      seq.view_id = v.at("view_id").get<int>();
      seq.width = v.at("width").get<int>();
      seq.height = v.at("height").get<int>();
      if (v.contains("intrinsics")) seq.intrinsics = to_intrinsics(v.at("intrinsics"));
      for (const json& frame : v.at("frames")) {
        const Eigen::MatrixXd m = to_mat(frame, 3);
        seq.frames.push_back(m.leftCols(2));
        seq.confidences.push_back(m.col(2));
      }
      if (seq.frames.empty()) fail(ErrorCode::Format, "view without frames");
      seq.validate(seq.joint_count());
      out.views.push_back(std::move(seq));
    }
    for (const auto& v : out.views) {
      if (v.frame_count() != out.views.front().frame_count() || v.joint_count() != out.views.front().joint_count()) {
        fail(ErrorCode::Format, "views must share frame and joint counts");
      }
    }
    return out;
  });
}

std::string dump_calibration(const MultiViewCalibration& calibration, const std::vector<double>& oracle_rotation_errors) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  json pairs = json::array();
  for (std::size_t k = 0; k < calibration.pairs.size(); ++k) {
    const auto& p = calibration.pairs[k];
    const auto& r = p.result;
    json inliers = json::array();
    for (bool b : r.inliers) inliers.push_back(b);
    json pair = {{"view_a", p.view_a},
                 {"view_b", p.view_b},
                 {"frames", p.frames},
                 {"fundamental", flat(r.fundamental.matrix())},
                 {"essential", flat(r.essential)},
                 {"rotation", flat(r.pose.rotation)},
                 {"translation", flat(r.pose.translation.transpose())},
                 {"inliers", std::move(inliers)},
                 {"inlier_count", r.inlier_count},
                 {"iterations", r.iterations},
                 {"mean_sampson", r.mean_sampson},
                 {"max_sampson", r.max_sampson},
                 {"linear_cost", r.linear_cost},
                 {"refined_cost", r.refined_cost}};
    if (k < oracle_rotation_errors.size()) pair["oracle_rotation_error_rad"] = oracle_rotation_errors[k];
    pairs.push_back(std::move(pair));
  }
  doc["pairs"] = std::move(pairs);
  return dump(doc);
}

MultiViewCalibration parse_calibration(const std::string& text) {
  const json doc = parse_document(text);
  return guarded([&] {
    MultiViewCalibration out;
    for (const json& p : doc.at("pairs")) {
      ViewPairCalibration pair;
      pair.view_a = p.at("view_a").get<int>();
      pair.view_b = p.at("view_b").get<int>();
      pair.frames = p.at("frames").get<std::vector<int>>();
      auto& r = pair.result;
      r.fundamental = FundamentalMatrix(to_mat3(p.at("fundamental")));
      r.essential = to_mat3(p.at("essential"));
      r.pose.rotation = to_mat3(p.at("rotation"));
      r.pose.translation = to_vec3(p.at("translation"));
      r.inliers = p.at("inliers").get<std::vector<bool>>();
      r.inlier_count = p.at("inlier_count").get<int>();
      r.iterations = p.at("iterations").get<int>();
      r.mean_sampson = p.at("mean_sampson").get<double>();
      r.max_sampson = p.at("max_sampson").get<double>();
      r.linear_cost = p.at("linear_cost").get<double>();
      r.refined_cost = p.at("refined_cost").get<double>();
      if (!is_rotation(r.pose.rotation, 1e-6)) fail(ErrorCode::Format, "calibration rotation is not in SO(3)");
      out.pairs.push_back(std::move(pair));
    }
    return out;
  });
}

std::string dump_pseudo_gt(const PseudoGroundTruth& pseudo, const std::string& skeleton_id) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["skeleton_id"] = skeleton_id;
  doc["frames_total"] = pseudo.frames_total;
  doc["gated_out"] = pseudo.gated_out;
  doc["failed"] = pseudo.failed;
  json poses = json::array();
  for (const auto& p : pseudo.poses) {
    poses.push_back({{"frame", p.frame},
                     {"view_a", p.view_a},
                     {"view_b", p.view_b},
                     {"mean_confidence_a", p.mean_confidence_a},
                     {"mean_confidence_b", p.mean_confidence_b},
                     {"pose", mat(p.pose)}});
  }
  doc["poses"] = std::move(poses);
  return dump(doc);
}

PseudoGroundTruth parse_pseudo_gt(const std::string& text) {
  const json doc = parse_document(text);
  return guarded([&] {
    PseudoGroundTruth out;
    out.frames_total = doc.at("frames_total").get<int>();
    out.gated_out = doc.at("gated_out").get<int>();
    out.failed = doc.at("failed").get<int>();
    for (const json& p : doc.at("poses")) {
      PseudoPose pose;
      pose.frame = p.at("frame").get<int>();
      pose.view_a = p.at("view_a").get<int>();
      pose.view_b = p.at("view_b").get<int>();
      pose.mean_confidence_a = p.at("mean_confidence_a").get<double>();
      pose.mean_confidence_b = p.at("mean_confidence_b").get<double>();
      pose.pose = to_mat(p.at("pose"), 3);
      if (!out.poses.empty() && pose.frame <= out.poses.back().frame) fail(ErrorCode::Format, "pseudo-GT frames must increase");
      out.poses.push_back(std::move(pose));
    }
    return out;
  });
}

std::string dump_poses(const std::vector<Pose3D>& poses) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  json arr = json::array();
  for (const auto& p : poses) arr.push_back(mat(p));
  doc["poses"] = std::move(arr);
  return dump(doc);
}

std::vector<Pose3D> parse_poses(const std::string& text) {
  const json doc = parse_document(text);
  return guarded([&] {
    std::vector<Pose3D> out;
    for (const json& p : doc.at("poses")) out.push_back(to_mat(p, 3));
    return out;
  });
}

std::string dump_checkpoint(const Checkpoint& checkpoint) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["format"] = "tripose-checkpoint";
  doc["kind"] = checkpoint.kind;
  doc["network"] = network(checkpoint.network);
  if (checkpoint.critic_hidden > 0) doc["critic_hidden"] = checkpoint.critic_hidden;
  json params = json::array();
  for (const auto* p : checkpoint.parameters) {
    params.push_back({{"name", p->name},
                      {"shape", p->value.shape()},
                      {"values", std::vector<double>(p->value.values().begin(), p->value.values().end())}});
  }
  doc["parameters"] = std::move(params);
  return doc.dump() + "\n";
}

LoadedCheckpoint parse_checkpoint(const std::string& text) {
  const json doc = parse_document(text);
  return guarded([&] {
    if (doc.at("format") != "tripose-checkpoint") fail(ErrorCode::Format, "not a tripose checkpoint");
    LoadedCheckpoint out;
    out.kind = doc.at("kind").get<std::string>();
    out.network = to_network(doc.at("network"));
    out.critic_hidden = doc.value("critic_hidden", 0);
    for (const json& p : doc.at("parameters")) {
      nn::Tensor t(p.at("shape").get<nn::Shape>(), p.at("values").get<std::vector<double>>());
      out.parameters.emplace(p.at("name").get<std::string>(), std::move(t));
    }
    return out;
  });
}

void assign_parameters(const LoadedCheckpoint& checkpoint, const std::vector<nn::Parameter*>& targets) {
  for (auto* p : targets) {
    const auto it = checkpoint.parameters.find(p->name);
    if (it == checkpoint.parameters.end()) fail(ErrorCode::Format, "checkpoint lacks parameter " + p->name);
    if (it->second.shape() != p->value.shape()) fail(ErrorCode::Format, "shape mismatch for parameter " + p->name);
    p->value = it->second;
  }
}

LiftingModel load_lifting(const LoadedCheckpoint& checkpoint) {
  if (checkpoint.kind != "lifting") fail(ErrorCode::Format, "checkpoint holds a " + checkpoint.kind + " model");
  LiftingModel model(checkpoint.network, 0);
  assign_parameters(checkpoint, model.parameters());
  return model;
}

std::string dump_eval_report(const EvalReport& report, const std::map<std::string, std::string>& config_echo,
                             const std::optional<LossRecord>& losses) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["frame_count"] = report.frames.size();
  doc["config"] = config_echo;
  doc["mean"] = {{"mpjpe_mm", report.mean.mpjpe}, {"nmpjpe_mm", report.mean.nmpjpe}, {"pmpjpe_mm", report.mean.pmpjpe}};
  json frames = json::array();
  for (const auto& f : report.frames)
    frames.push_back({{"mpjpe_mm", f.mpjpe}, {"nmpjpe_mm", f.nmpjpe}, {"pmpjpe_mm", f.pmpjpe}});
  doc["frames"] = std::move(frames);
  if (losses) {
    doc["losses"] = {{"triangulation", losses->triangulation}, {"reprojection", losses->reprojection}, {"total", losses->total}};
  }
  return dump(doc);
}

std::string loss_csv(const std::vector<LossRecord>& history, bool with_triangulation, bool with_reprojection) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch";
  if (with_triangulation) out << ",L_T";
  if (with_reprojection) out << ",L_R";
  out << ",total\n";
  for (const auto& r : history) {
    out << r.epoch;
    if (with_triangulation) out << ',' << r.triangulation;
    if (with_reprojection) out << ',' << r.reprojection;
    out << ',' << r.total << '\n';
  }
  return out.str();
}

}  // namespace tripose::io

#include "tripose/cli.hpp"

#include "tripose/adversarial.hpp"
#include "tripose/errors.hpp"
#include "tripose/io.hpp"
#include "tripose/metrics.hpp"
#include "tripose/pipeline.hpp"
#include "tripose/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#ifndef TRIPOSE_VERSION
#define TRIPOSE_VERSION "0.0.0"
#endif

namespace tripose::cli {

using nlohmann::json;

namespace {

std::string fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

/// Written next to the first output as <output>.manifest.json.
struct Manifest {
  std::string command;
  std::optional<std::uint64_t> seed;
  std::map<std::string, std::string> options;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
};

std::string dump_manifest(const Manifest& m) {
  json doc;
  doc["schema_version"] = io::kSchemaVersion;
  doc["command"] = m.command;
  doc["versions"] = {{"tripose", TRIPOSE_VERSION},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)}};
  doc["seed"] = m.seed ? json(*m.seed) : json(nullptr);
  doc["options"] = m.options;
  json inputs = json::array(), outputs = json::array();
  for (const auto& p : m.inputs) inputs.push_back({{"path", p}, {"fnv1a64", fnv1a(io::read_file(p))}});
  for (const auto& p : m.outputs) outputs.push_back({{"path", p}, {"fnv1a64", fnv1a(io::read_file(p))}});
  doc["inputs"] = std::move(inputs);
  doc["outputs"] = std::move(outputs);
  return doc.dump(2) + "\n";
}

std::map<std::string, std::string> resolved_options(const CLI::App& sub) {
  std::map<std::string, std::string> out;
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_lnames().empty() || opt->get_lnames().front() == "help") continue;
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
    } else {
      value = opt->get_default_str();
      if (value.size() >= 2 && value.front() == '[' && value.back() == ']') value = value.substr(1, value.size() - 2);
    }
    if (!value.empty()) out[opt->get_lnames().front()] = value;
  }
  return out;
}

[[noreturn]] void config_error(const std::string& message) { fail(ErrorCode::InvalidArgument, message); }

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool on_off(const std::string& v) { return v == "on"; }

ProjectionMode parse_mode(const std::string& v) {
  return v == "weak" ? ProjectionMode::WeakPerspective : ProjectionMode::FullPerspective;
}

double rotation_angle(const Mat3& a, const Mat3& b) {
  const Mat3 d = a.transpose() * b;
  const Vec3 axis(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1));
  return std::atan2(0.5 * axis.norm(), 0.5 * (d.trace() - 1.0));
}

std::vector<KeypointSequence2D> load_views(const std::string& path, int limit = 0) {
  auto file = io::parse_keypoints(io::read_file(path));
  if (file.skeleton_id != Skeleton::h36m17().id()) throw DataError("unknown skeleton '" + file.skeleton_id + "'");
  if (limit > 0) {
    if (limit > static_cast<int>(file.views.size()))
      throw DataError("requested " + std::to_string(limit) + " views, file has " + std::to_string(file.views.size()));
    file.views.resize(static_cast<std::size_t>(limit));
  }
  return std::move(file.views);
}

GateConfig gate_from(double mean, double joint) {
  GateConfig g;
  g.mean_threshold = mean;
  g.joint_threshold = joint;
  g.validate();
  return g;
}

// ---- options -------------------------------------------------------------

struct SynthOptions {
  int views = 2, frames = 270, width = 1000, height = 1000, gt_view = 0;
  std::uint64_t seed = 0;
  double noise = 0.0, tau = 10.0, occlusion = 0.0, focal = 1000.0, distance = 5000.0;
  std::string mode = "perspective", intrinsics = "on";
  std::string scene_out, keypoints_out, gt_out;
};

struct GateOptions {
  double mean = 0.8, joint = 0.7;
};

struct CalibrateOptions {
  std::string keypoints, out, oracle;
  std::uint64_t seed = 0;
  double threshold = 0.0;
  int max_iterations = 10000;
  GateOptions gate;
};

struct TriangulateOptions {
  std::string keypoints, calibration, out;
  GateOptions gate;
};

struct TrainOptions {
  std::string keypoints, calibration, pseudo_gt, checkpoint_out, loss_csv, real_poses;
  std::string mode = "weak", camera_correction = "on", confidence_mask = "on";
  std::vector<std::string> loss{"triang", "reproj"};
  int views = 0, window = 27, hidden = 1024, width = 1000, epochs = 10, batch = 64, critic_hidden = 1024,
      critic_sequence = 4, critic_steps = 5;
  double lr = 1e-3, critic_lr = 5e-5, clip = 0.01, triang_weight = 1.0, reproj_weight = 1.0;
  std::uint64_t seed = 0;
  GateOptions gate;
};

struct InferOptions {
  std::string checkpoint, keypoints, out;
  int view = 0, batch = 256;
};

struct EvalOptions {
  std::string pred, gt, report;
  std::string loss_breakdown = "off";
  std::string checkpoint, keypoints, calibration, pseudo_gt;
  GateOptions gate;
};

struct PlotOptions {
  std::string report, poses, out;
  int frame = 0;
};

struct ReplayOptions {
  std::string manifest;
  std::string verify = "off";
};

void add_gate(CLI::App* sub, GateOptions& g) {
  sub->add_option("--mean-threshold", g.mean, "View gate: minimum mean confidence");
  sub->add_option("--joint-threshold", g.joint, "View gate: minimum per-joint confidence");
}

// ---- commands ------------------------------------------------------------

Manifest cmd_synth(const SynthOptions& o, std::ostream& out) {
  SceneConfig cfg;
  cfg.views = o.views;
  cfg.frames = o.frames;
  cfg.seed = o.seed;
  cfg.mode = parse_mode(o.mode);
  cfg.observation.noise_sigma_px = o.noise;
  cfg.observation.confidence_tau_px = o.tau;
  cfg.observation.occlusion_rate = o.occlusion;
  cfg.focal_px = o.focal;
  cfg.width = o.width;
  cfg.height = o.height;
  cfg.camera_distance_mm = o.distance;
  if (o.gt_view < 0 || o.gt_view >= o.views) config_error("--gt-view out of range");
  const auto scene = make_scene(cfg);

  io::KeypointFile file{scene.skeleton.id(), {}};
  for (int v = 0; v < scene.view_count(); ++v) {
    file.views.push_back(observe_view(scene, v));
    if (!on_off(o.intrinsics)) file.views.back().intrinsics.reset();
  }
  io::write_file(o.scene_out, io::dump_scene(scene));
  io::write_file(o.keypoints_out, io::dump_keypoints(file));
  Manifest m{"synth", o.seed, {}, {}, {o.keypoints_out, o.scene_out}};
  if (!o.gt_out.empty()) {
    std::vector<Pose3D> gt;
    for (int f = 0; f < scene.frame_count(); ++f) gt.push_back(scene.camera_pose(o.gt_view, f));
    io::write_file(o.gt_out, io::dump_poses(gt));
    m.outputs.push_back(o.gt_out);
  }
  out << "synth: " << scene.view_count() << " views, " << scene.frame_count() << " frames\n";
  return m;
}

Manifest cmd_calibrate(const CalibrateOptions& o, std::ostream& out) {
  const auto views = load_views(o.keypoints);
  if (views.size() < 2) throw DataError("calibration needs at least two views, got " + std::to_string(views.size()));
  CalibrationOptions opts;
  opts.gate = gate_from(o.gate.mean, o.gate.joint);
  opts.seed = o.seed;
  opts.max_iterations = o.max_iterations;
  if (o.threshold > 0.0) opts.threshold = o.threshold;
  MultiViewCalibration cal;
  try {
    cal = calibrate_views(views, opts);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::EmptyDataset) throw DataError(e.what());
    throw;
  }

  Manifest m{"calibrate", o.seed, {}, {o.keypoints}, {o.out}};
  std::vector<double> errors;
  if (!o.oracle.empty()) {
    const auto scene = io::parse_scene(io::read_file(o.oracle));
    for (const auto& p : cal.pairs) {
      if (p.view_b >= scene.view_count()) throw DataError("oracle scene has fewer views than the keypoint file");
      const Mat3 truth = relative_pose(scene.cameras[static_cast<std::size_t>(p.view_a)],
                                       scene.cameras[static_cast<std::size_t>(p.view_b)]).first;
      errors.push_back(rotation_angle(p.result.pose.rotation, truth));
    }
    m.inputs.push_back(o.oracle);
  }
  io::write_file(o.out, io::dump_calibration(cal, errors));
  for (std::size_t k = 0; k < cal.pairs.size(); ++k) {
    const auto& p = cal.pairs[k];
    out << "pair " << p.view_a << "-" << p.view_b << ": " << p.result.inlier_count << " inliers";
    if (!errors.empty()) out << ", rotation error " << errors[k] << " rad";
    out << "\n";
  }
  return m;
}

Manifest cmd_triangulate(const TriangulateOptions& o, std::ostream& out) {
  const auto views = load_views(o.keypoints);
  const auto cal = io::parse_calibration(io::read_file(o.calibration));
  const auto skeleton = Skeleton::h36m17();
  const auto pgt = build_pseudo_ground_truth(views, cal, skeleton, gate_from(o.gate.mean, o.gate.joint));
  io::write_file(o.out, io::dump_pseudo_gt(pgt, skeleton.id()));
  out << "triangulate: " << pgt.poses.size() << "/" << pgt.frames_total << " frames (" << pgt.gated_out
      << " gated out, " << pgt.failed << " failed)\n";
  return {"triangulate", std::nullopt, {}, {o.keypoints, o.calibration}, {o.out}};
}

NetworkConfig network_from(const TrainOptions& o, int joints) {
  NetworkConfig n;
  n.joints = joints;
  n.hidden = o.hidden;
  n.width = o.width;
  n.window = o.window;
  n.validate();
  return n;
}

std::vector<const nn::Parameter*> const_params(const std::vector<nn::Parameter*>& ps) {
  return {ps.begin(), ps.end()};
}

Manifest cmd_train_adversarial(const TrainOptions& o, std::ostream& out) {
  if (o.real_poses.empty()) config_error("--mode adversarial requires --real-poses");
  const auto views = load_views(o.keypoints, o.views);
  const auto real = io::parse_poses(io::read_file(o.real_poses));
  AdversarialConfig cfg;
  cfg.network = network_from(o, views.front().joint_count());
  cfg.critic_hidden = o.critic_hidden;
  cfg.critic_sequence = o.critic_sequence;
  cfg.critic_steps = o.critic_steps;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch;
  cfg.learning_rate = o.lr;
  cfg.critic_learning_rate = o.critic_lr;
  cfg.clip = o.clip;
  cfg.confidence_mask = on_off(o.confidence_mask);
  cfg.gate = gate_from(o.gate.mean, o.gate.joint);
  cfg.seed = o.seed;
  auto result = train_adversarial(views, real, cfg);

  io::Checkpoint cp{"lifting", cfg.network, 0, const_params(result.lifting.parameters())};
  io::write_file(o.checkpoint_out, io::dump_checkpoint(cp));
  Manifest m{"train", o.seed, {}, {o.keypoints, o.real_poses}, {o.checkpoint_out}};
  if (!o.loss_csv.empty()) {
    std::ostringstream csv;
    csv.precision(17);
    csv << "epoch,L_R,L_advG,total,critic_gap\n";
    for (const auto& r : result.history)
      csv << r.epoch << ',' << r.reprojection << ',' << r.adversarial << ',' << r.total << ',' << r.critic_gap << '\n';
    io::write_file(o.loss_csv, csv.str());
    m.outputs.push_back(o.loss_csv);
  }
  if (!result.history.empty()) out << "train: final total " << result.history.back().total << "\n";
  return m;
}

Manifest cmd_train(const TrainOptions& o, std::ostream& out) {
  if (o.mode == "adversarial") return cmd_train_adversarial(o, out);
  if (o.calibration.empty()) config_error("--calibration is required");
  TrainConfig cfg;
  cfg.use_triangulation = std::find(o.loss.begin(), o.loss.end(), "triang") != o.loss.end();
  cfg.use_reprojection = std::find(o.loss.begin(), o.loss.end(), "reproj") != o.loss.end();
  cfg.use_camera_correction = on_off(o.camera_correction);
  cfg.confidence_mask = on_off(o.confidence_mask);
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch;
  cfg.learning_rate = o.lr;
  cfg.seed = o.seed;
  cfg.triangulation_weight = o.triang_weight;
  cfg.reprojection_weight = o.reproj_weight;
  cfg.gate = gate_from(o.gate.mean, o.gate.joint);

  TrainingData data;
  data.views = load_views(o.keypoints, o.views);
  cfg.network = network_from(o, data.views.front().joint_count());
  cfg.validate();
  data.calibration = io::parse_calibration(io::read_file(o.calibration));
  Manifest m{"train", o.seed, {}, {o.keypoints, o.calibration}, {o.checkpoint_out}};
  if (cfg.use_triangulation) {
    if (o.pseudo_gt.empty()) config_error("--loss triang requires --pseudo-gt");
    data.pseudo_gt = io::parse_pseudo_gt(io::read_file(o.pseudo_gt));
    m.inputs.push_back(o.pseudo_gt);
  }
  auto result = train(data, cfg);

  io::Checkpoint cp{"lifting", cfg.network, 0, const_params(result.lifting.parameters())};
  io::write_file(o.checkpoint_out, io::dump_checkpoint(cp));
  if (!o.loss_csv.empty()) {
    io::write_file(o.loss_csv, io::loss_csv(result.history, cfg.use_triangulation, cfg.use_reprojection));
    m.outputs.push_back(o.loss_csv);
  }
  if (!result.history.empty()) out << "train: final total " << result.history.back().total << "\n";
  return m;
}

Manifest cmd_infer(const InferOptions& o, std::ostream& out) {
  auto model = io::load_lifting(io::parse_checkpoint(io::read_file(o.checkpoint)));
  const auto views = load_views(o.keypoints);
  if (o.view < 0 || o.view >= static_cast<int>(views.size())) config_error("--view out of range");
  const auto poses = infer(model, views[static_cast<std::size_t>(o.view)], o.batch);
  io::write_file(o.out, io::dump_poses(poses));
  out << "infer: " << poses.size() << " poses\n";
  return {"infer", std::nullopt, {}, {o.checkpoint, o.keypoints}, {o.out}};
}

Manifest cmd_eval(const EvalOptions& o, std::ostream& out) {
  const auto pred = io::parse_poses(io::read_file(o.pred));
  const auto gt = io::parse_poses(io::read_file(o.gt));
  const auto report = evaluate(pred, gt);
  Manifest m{"eval", std::nullopt, {}, {o.pred, o.gt}, {o.report}};
  std::optional<LossRecord> losses;
  if (on_off(o.loss_breakdown)) {
    if (o.checkpoint.empty() || o.keypoints.empty() || o.calibration.empty() || o.pseudo_gt.empty())
      config_error("--loss-breakdown on requires --checkpoint, --keypoints, --calibration and --pseudo-gt");
    auto model = io::load_lifting(io::parse_checkpoint(io::read_file(o.checkpoint)));
    TrainingData data;
    data.views = load_views(o.keypoints);
    data.calibration = io::parse_calibration(io::read_file(o.calibration));
    data.pseudo_gt = io::parse_pseudo_gt(io::read_file(o.pseudo_gt));
    TrainConfig cfg;
    cfg.use_camera_correction = false;
    cfg.gate = gate_from(o.gate.mean, o.gate.joint);
    losses = evaluate_losses(model, nullptr, data, cfg);
    for (const auto& p : {o.checkpoint, o.keypoints, o.calibration, o.pseudo_gt}) m.inputs.push_back(p);
  }
  const std::map<std::string, std::string> echo{{"pred", o.pred}, {"gt", o.gt}};
  io::write_file(o.report, io::dump_eval_report(report, echo, losses));
  out << std::setprecision(6) << "eval: MPJPE " << report.mean.mpjpe << " mm, NMPJPE " << report.mean.nmpjpe
      << " mm, PMPJPE " << report.mean.pmpjpe << " mm\n";
  return m;
}

Manifest cmd_plot(const PlotOptions& o, std::ostream& out) {
  std::ostringstream csv;
  csv.precision(17);
  Manifest m{"plot", std::nullopt, {}, {}, {o.out}};
  if (!o.report.empty() == !o.poses.empty()) config_error("plot needs exactly one of --report or --poses");
  if (!o.report.empty()) {
    json doc;
    try {
      doc = json::parse(io::read_file(o.report));
      csv << "frame,mpjpe_mm,nmpjpe_mm,pmpjpe_mm\n";
      int f = 0;
      for (const auto& fr : doc.at("frames"))
        csv << f++ << ',' << fr.at("mpjpe_mm").get<double>() << ',' << fr.at("nmpjpe_mm").get<double>() << ','
            << fr.at("pmpjpe_mm").get<double>() << '\n';
    } catch (const json::exception& e) {
      fail(ErrorCode::Format, std::string("eval report: ") + e.what());
    }
    m.inputs.push_back(o.report);
  } else {
    const auto poses = io::parse_poses(io::read_file(o.poses));
    if (o.frame < 0 || o.frame >= static_cast<int>(poses.size())) config_error("--frame out of range");
    const auto skeleton = Skeleton::h36m17();
    const Pose3D& p = poses[static_cast<std::size_t>(o.frame)];
    if (p.rows() != skeleton.joint_count()) throw DataError("pose joint count does not match the skeleton");
    csv << "joint,parent,x,y,z,parent_x,parent_y,parent_z\n";
    for (int j = 0; j < skeleton.joint_count(); ++j) {
      const int parent = skeleton.parents()[static_cast<std::size_t>(j)];
      if (parent < 0) continue;
      csv << skeleton.names()[static_cast<std::size_t>(j)] << ',' << skeleton.names()[static_cast<std::size_t>(parent)];
      for (int c = 0; c < 3; ++c) csv << ',' << p(j, c);
      for (int c = 0; c < 3; ++c) csv << ',' << p(parent, c);
      csv << '\n';
    }
    m.inputs.push_back(o.poses);
  }
  io::write_file(o.out, csv.str());
  out << "plot: wrote " << o.out << "\n";
  return m;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, int depth);

int cmd_replay(const ReplayOptions& o, std::ostream& out, std::ostream& err, int depth) {
  if (depth > 0) config_error("replay manifests cannot nest");
  json doc;
  try {
    doc = json::parse(io::read_file(o.manifest));
  } catch (const json::exception& e) {
    throw DataError(std::string("manifest: ") + e.what());
  }
  if (doc.value("schema_version", 0) != io::kSchemaVersion) throw DataError("manifest schema_version mismatch");
  for (const auto& in : doc.at("inputs")) {
    const auto path = in.at("path").get<std::string>();
    if (fnv1a(io::read_file(path)) != in.at("fnv1a64").get<std::string>())
      throw DataError("input " + path + " differs from the manifest");
  }
  std::vector<std::string> args{doc.at("command").get<std::string>()};
  for (const auto& [k, v] : doc.at("options").items()) {
    args.push_back("--" + k);
    args.push_back(v.get<std::string>());
  }
  const int code = dispatch(args, out, err, depth + 1);
  if (code != kOk || !on_off(o.verify)) return code;
  for (const auto& outp : doc.at("outputs")) {
    const auto path = outp.at("path").get<std::string>();
    if (fnv1a(io::read_file(path)) != outp.at("fnv1a64").get<std::string>()) {
      err << "replay: output " << path << " differs from the manifest\n";
      return kDataError;
    }
  }
  out << "replay: outputs match\n";
  return kOk;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, int depth) {
  CLI::App app{"Weakly-supervised 3D pose: calibration, triangulation, lifting", "tripose"};
  app.option_defaults()->always_capture_default();
  app.set_config("--config", "", "TOML config file (default from $TRIPOSE_CONFIG)")->envname("TRIPOSE_CONFIG");
  app.require_subcommand(1, 1);

  SynthOptions synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic scene and its keypoint file");
  s->add_option("--views", synth.views)->check(CLI::Range(1, 64));
  s->add_option("--frames", synth.frames)->check(CLI::Range(1, 10000000));
  s->add_option("--seed", synth.seed);
  s->add_option("--noise", synth.noise, "Pixel noise sigma")->check(CLI::NonNegativeNumber);
  s->add_option("--tau", synth.tau, "Confidence decay scale (px)")->check(CLI::PositiveNumber);
  s->add_option("--occlusion", synth.occlusion)->check(CLI::Range(0.0, 1.0));
  s->add_option("--mode", synth.mode)->check(CLI::IsMember({"perspective", "weak"}));
  s->add_option("--focal", synth.focal)->check(CLI::PositiveNumber);
  s->add_option("--width", synth.width)->check(CLI::PositiveNumber);
  s->add_option("--height", synth.height)->check(CLI::PositiveNumber);
  s->add_option("--distance", synth.distance, "Camera distance (mm)")->check(CLI::PositiveNumber);
  s->add_option("--intrinsics", synth.intrinsics, "Embed intrinsics in the keypoint file")
      ->check(CLI::IsMember({"on", "off"}));
  s->add_option("--scene-out", synth.scene_out)->required();
  s->add_option("--keypoints-out", synth.keypoints_out)->required();
  s->add_option("--gt-out", synth.gt_out, "Root-relative camera-frame poses of --gt-view");
  s->add_option("--gt-view", synth.gt_view);

  CalibrateOptions calib;
  auto* c = app.add_subcommand("calibrate", "Estimate relative camera rotations");
  c->add_option("--keypoints", calib.keypoints)->required()->check(CLI::ExistingFile);
  c->add_option("--out", calib.out)->required();
  c->add_option("--oracle", calib.oracle, "Scene file for ground-truth rotation errors")->check(CLI::ExistingFile);
  c->add_option("--seed", calib.seed);
  c->add_option("--threshold", calib.threshold, "Sampson threshold override (0: 3 / (f1 + f2))")
      ->check(CLI::NonNegativeNumber);
  c->add_option("--max-iterations", calib.max_iterations)->check(CLI::PositiveNumber);
  add_gate(c, calib.gate);

  TriangulateOptions tri;
  auto* t = app.add_subcommand("triangulate", "Triangulate gated pseudo ground truth");
  t->add_option("--keypoints", tri.keypoints)->required()->check(CLI::ExistingFile);
  t->add_option("--calibration", tri.calibration)->required()->check(CLI::ExistingFile);
  t->add_option("--out", tri.out)->required();
  add_gate(t, tri.gate);

  TrainOptions tr;
  auto* r = app.add_subcommand("train", "Train the lifting network");
  r->add_option("--keypoints", tr.keypoints)->required()->check(CLI::ExistingFile);
  r->add_option("--calibration", tr.calibration)->check(CLI::ExistingFile);
  r->add_option("--pseudo-gt", tr.pseudo_gt)->check(CLI::ExistingFile);
  r->add_option("--views", tr.views, "Use the first N views (0: all)")->check(CLI::NonNegativeNumber);
  r->add_option("--window", tr.window)->check(CLI::PositiveNumber);
  r->add_option("--hidden", tr.hidden)->check(CLI::PositiveNumber);
  r->add_option("--width", tr.width)->check(CLI::PositiveNumber);
  r->add_option("--lr", tr.lr)->check(CLI::PositiveNumber);
  r->add_option("--epochs", tr.epochs)->check(CLI::NonNegativeNumber);
  r->add_option("--batch", tr.batch)->check(CLI::PositiveNumber);
  r->add_option("--seed", tr.seed);
  r->add_option("--loss", tr.loss, "Comma-separated subset of triang,reproj")
      ->delimiter(',')
      ->check(CLI::IsMember({"triang", "reproj"}));
  r->add_option("--triang-weight", tr.triang_weight)->check(CLI::NonNegativeNumber);
  r->add_option("--reproj-weight", tr.reproj_weight)->check(CLI::NonNegativeNumber);
  r->add_option("--camera-correction", tr.camera_correction)->check(CLI::IsMember({"on", "off"}));
  r->add_option("--confidence-mask", tr.confidence_mask)->check(CLI::IsMember({"on", "off"}));
  r->add_option("--checkpoint-out", tr.checkpoint_out)->required();
  r->add_option("--loss-csv", tr.loss_csv);
  r->add_option("--mode", tr.mode)->check(CLI::IsMember({"weak", "adversarial"}));
  r->add_option("--real-poses", tr.real_poses)->check(CLI::ExistingFile);
  r->add_option("--critic-hidden", tr.critic_hidden)->check(CLI::PositiveNumber);
  r->add_option("--critic-sequence", tr.critic_sequence)->check(CLI::PositiveNumber);
  r->add_option("--critic-steps", tr.critic_steps)->check(CLI::PositiveNumber);
  r->add_option("--critic-lr", tr.critic_lr)->check(CLI::PositiveNumber);
  r->add_option("--clip", tr.clip)->check(CLI::PositiveNumber);
  add_gate(r, tr.gate);

  InferOptions inf;
  auto* i = app.add_subcommand("infer", "Lift one view's keypoints to 3D");
  i->add_option("--checkpoint", inf.checkpoint)->required()->check(CLI::ExistingFile);
  i->add_option("--keypoints", inf.keypoints)->required()->check(CLI::ExistingFile);
  i->add_option("--view", inf.view);
  i->add_option("--batch", inf.batch)->check(CLI::PositiveNumber);
  i->add_option("--out", inf.out)->required();

  EvalOptions ev;
  auto* e = app.add_subcommand("eval", "MPJPE / NMPJPE / PMPJPE report");
  e->add_option("--pred", ev.pred)->required()->check(CLI::ExistingFile);
  e->add_option("--gt", ev.gt)->required()->check(CLI::ExistingFile);
  e->add_option("--report", ev.report)->required();
  e->add_option("--loss-breakdown", ev.loss_breakdown)->check(CLI::IsMember({"on", "off"}));
  e->add_option("--checkpoint", ev.checkpoint)->check(CLI::ExistingFile);
  e->add_option("--keypoints", ev.keypoints)->check(CLI::ExistingFile);
  e->add_option("--calibration", ev.calibration)->check(CLI::ExistingFile);
  e->add_option("--pseudo-gt", ev.pseudo_gt)->check(CLI::ExistingFile);
  add_gate(e, ev.gate);

  PlotOptions pl;
  auto* p = app.add_subcommand("plot", "Export plot data as CSV");
  p->add_option("--report", pl.report, "Eval report: per-frame errors")->check(CLI::ExistingFile);
  p->add_option("--poses", pl.poses, "Pose file: bone segments of --frame")->check(CLI::ExistingFile);
  p->add_option("--frame", pl.frame);
  p->add_option("--out", pl.out)->required();

  ReplayOptions rp;
  auto* y = app.add_subcommand("replay", "Re-run a command from its manifest");
  y->add_option("--manifest", rp.manifest)->required()->check(CLI::ExistingFile);
  y->add_option("--verify", rp.verify, "Compare outputs with the recorded hashes")->check(CLI::IsMember({"on", "off"}));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  const std::vector<std::pair<CLI::App*, std::function<Manifest()>>> table{
      {s, [&] { return cmd_synth(synth, out); }},
      {c, [&] { return cmd_calibrate(calib, out); }},
      {t, [&] { return cmd_triangulate(tri, out); }},
      {r, [&] { return cmd_train(tr, out); }},
      {i, [&] { return cmd_infer(inf, out); }},
      {e, [&] { return cmd_eval(ev, out); }},
      {p, [&] { return cmd_plot(pl, out); }},
  };
  if (y->parsed()) return cmd_replay(rp, out, err, depth);
  for (const auto& [sub, run] : table) {
    if (!sub->parsed()) continue;
    Manifest m = run();
    m.options = resolved_options(*sub);
    io::write_file(m.outputs.front() + ".manifest.json", dump_manifest(m));
    return kOk;
  }
  return kConfigError;
}

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
      return kConfigError;
    case ErrorCode::NumericalFailure:
    case ErrorCode::NonFiniteLoss:
      return kNumericalError;
    default:
      return kDataError;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err, 0);
  } catch (const Error& e) {
    err << "tripose: " << to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const DataError& e) {
    err << "tripose: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "tripose: " << e.what() << "\n";
    return kDataError;
  }
}

}  // namespace tripose::cli

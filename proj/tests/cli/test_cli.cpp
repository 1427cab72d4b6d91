#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tripose/cli.hpp"
#include "tripose/io.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kArtifacts = TRIPOSE_CLI_ARTIFACTS;

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = tripose::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string path(const std::string& name) {
  fs::create_directories(kArtifacts);
  return (kArtifacts / name).string();
}

std::string slurp(const std::string& p) { return tripose::io::read_file(p); }

/// Synthetic keypoints, calibration and pseudo-GT shared by several cases.
void small_pipeline() {
  static bool done = false;
  if (done) return;
  REQUIRE(run({"synth", "--frames", "60", "--noise", "0.5", "--seed", "5", "--scene-out", path("scene.json"),
               "--keypoints-out", path("keypoints.json"), "--gt-out", path("poses_gt.json")})
              .code == 0);
  REQUIRE(run({"calibrate", "--keypoints", path("keypoints.json"), "--out", path("calibration.json"), "--oracle",
               path("scene.json")})
              .code == 0);
  REQUIRE(run({"triangulate", "--keypoints", path("keypoints.json"), "--calibration", path("calibration.json"),
               "--out", path("pseudo_gt.json")})
              .code == 0);
  done = true;
}

std::vector<std::string> small_train(const std::string& ckpt, const std::string& csv) {
  return {"train", "--keypoints", path("keypoints.json"), "--calibration", path("calibration.json"), "--pseudo-gt",
          path("pseudo_gt.json"), "--hidden", "8", "--width", "16", "--window", "5", "--epochs", "2", "--batch", "16",
          "--checkpoint-out", path(ckpt), "--loss-csv", path(csv)};
}

}  // namespace

TEST_CASE("synth is deterministic and echoes its config") {
  const auto a = run({"synth", "--views", "2", "--frames", "270", "--seed", "9", "--scene-out", path("det_scene_a.json"),
                      "--keypoints-out", path("det_kp_a.json")});
  const auto b = run({"synth", "--views", "2", "--frames", "270", "--seed", "9", "--scene-out", path("det_scene_b.json"),
                      "--keypoints-out", path("det_kp_b.json")});
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(slurp(path("det_scene_a.json")) == slurp(path("det_scene_b.json")));
  CHECK(slurp(path("det_kp_a.json")) == slurp(path("det_kp_b.json")));

  const auto kp = tripose::io::parse_keypoints(slurp(path("det_kp_a.json")));
  REQUIRE(kp.views.size() == 2);
  for (const auto& v : kp.views) {
    CHECK(v.frame_count() == 270);
    for (const auto& c : v.confidences) CHECK(c.minCoeff() == 1.0);  // --noise defaults to 0
  }
  const auto manifest = json::parse(slurp(path("det_kp_a.json.manifest.json")));
  CHECK(manifest.at("seed").get<int>() == 9);
  CHECK(manifest.at("options").at("frames") == "270");
  CHECK(manifest.dump().find("time") == std::string::npos);
}

TEST_CASE("invalid configuration exits 2") {
  CHECK(run({"synth", "--frames", "0", "--scene-out", path("x.json"), "--keypoints-out", path("y.json")}).code == 2);
  CHECK(run({"synth", "--mode", "fisheye", "--scene-out", path("x.json"), "--keypoints-out", path("y.json")}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("calibrate: noiseless oracle error and the two-view precondition") {
  REQUIRE(run({"synth", "--frames", "270", "--seed", "1", "--scene-out", path("clean_scene.json"), "--keypoints-out",
               path("clean_kp.json")})
              .code == 0);
  const auto r = run({"calibrate", "--keypoints", path("clean_kp.json"), "--out", path("clean_calibration.json"),
                      "--oracle", path("clean_scene.json")});
  REQUIRE(r.code == 0);
  const auto doc = json::parse(slurp(path("clean_calibration.json")));
  CHECK(doc.at("pairs").at(0).at("oracle_rotation_error_rad").get<double>() < 1e-6);

  REQUIRE(run({"synth", "--views", "1", "--frames", "20", "--scene-out", path("mono_scene.json"), "--keypoints-out",
               path("mono_kp.json")})
              .code == 0);
  const auto mono = run({"calibrate", "--keypoints", path("mono_kp.json"), "--out", path("mono_cal.json")});
  CHECK(mono.code == 3);
  CHECK_FALSE(mono.err.empty());

  // Every frame gated out: occluded joints score below 0.5.
  REQUIRE(run({"synth", "--frames", "20", "--occlusion", "1", "--scene-out", path("occ_scene.json"),
               "--keypoints-out", path("occ_kp.json")})
              .code == 0);
  CHECK(run({"calibrate", "--keypoints", path("occ_kp.json"), "--out", path("occ_cal.json")}).code == 3);
}

TEST_CASE("train toggles, infer, eval identity and plot export") {
  small_pipeline();
  auto args = small_train("checkpoint_triang.json", "losses_triang.csv");
  args.insert(args.end(), {"--loss", "triang"});
  REQUIRE(run(args).code == 0);
  const auto csv = slurp(path("losses_triang.csv"));
  CHECK(csv.starts_with("epoch,L_T,total\n"));
  CHECK(csv.find("L_R") == std::string::npos);

  REQUIRE(run(small_train("checkpoint.json", "losses.csv")).code == 0);
  CHECK(slurp(path("losses.csv")).starts_with("epoch,L_T,L_R,total\n"));

  REQUIRE(run({"infer", "--checkpoint", path("checkpoint.json"), "--keypoints", path("keypoints.json"), "--out",
               path("poses_pred.json")})
              .code == 0);
  CHECK(tripose::io::parse_poses(slurp(path("poses_pred.json"))).size() == 60);

  REQUIRE(run({"eval", "--pred", path("poses_gt.json"), "--gt", path("poses_gt.json"), "--report",
               path("report_identity.json")})
              .code == 0);
  const auto identity = json::parse(slurp(path("report_identity.json")));
  for (const char* k : {"mpjpe_mm", "nmpjpe_mm", "pmpjpe_mm"}) CHECK(identity.at("mean").at(k).get<double>() < 1e-9);

  REQUIRE(run({"eval", "--pred", path("poses_pred.json"), "--gt", path("poses_gt.json"), "--report",
               path("report.json"), "--loss-breakdown", "on", "--checkpoint", path("checkpoint.json"), "--keypoints",
               path("keypoints.json"), "--calibration", path("calibration.json"), "--pseudo-gt",
               path("pseudo_gt.json")})
              .code == 0);
  const auto report = json::parse(slurp(path("report.json")));
  CHECK(report.at("losses").at("triangulation").get<double>() > 0.0);
  CHECK(report.at("frame_count") == 60);

  CHECK(run({"eval", "--pred", path("poses_pred.json"), "--gt", path("poses_gt.json"), "--report",
             path("report_bad.json"), "--loss-breakdown", "on"})
            .code == 2);

  REQUIRE(run({"plot", "--report", path("report.json"), "--out", path("errors.csv")}).code == 0);
  CHECK(slurp(path("errors.csv")).starts_with("frame,mpjpe_mm,nmpjpe_mm,pmpjpe_mm\n"));
  REQUIRE(run({"plot", "--poses", path("poses_pred.json"), "--frame", "2", "--out", path("bones.csv")}).code == 0);
  CHECK(slurp(path("bones.csv")).starts_with("joint,parent,"));
}

TEST_CASE("adversarial mode needs a real-pose archive") {
  small_pipeline();
  std::vector<std::string> args{"train", "--mode", "adversarial", "--keypoints", path("keypoints.json"),
                                "--hidden", "6", "--width", "8", "--window", "3", "--critic-hidden", "6",
                                "--critic-sequence", "2", "--epochs", "1", "--batch", "16", "--checkpoint-out",
                                path("checkpoint_adv.json"), "--loss-csv", path("losses_adv.csv")};
  CHECK(run(args).code == 2);
  args.insert(args.end(), {"--real-poses", path("poses_gt.json")});
  REQUIRE(run(args).code == 0);
  CHECK(slurp(path("losses_adv.csv")).starts_with("epoch,L_R,L_advG,total,critic_gap\n"));
}

TEST_CASE("config file from the environment supplies defaults") {
  const std::string cfg = path("defaults.toml");
  tripose::io::write_file(cfg, "[synth]\nframes = 33\nviews = 3\n");
  ::setenv("TRIPOSE_CONFIG", cfg.c_str(), 1);
  const auto r = run({"synth", "--views", "2", "--scene-out", path("cfg_scene.json"), "--keypoints-out",
                      path("cfg_kp.json")});
  ::unsetenv("TRIPOSE_CONFIG");
  REQUIRE(r.code == 0);
  const auto kp = tripose::io::parse_keypoints(slurp(path("cfg_kp.json")));
  CHECK(kp.views.size() == 2);  // command line wins
  CHECK(kp.views.front().frame_count() == 33);
}

TEST_CASE("replay reproduces outputs and rejects changed inputs") {
  small_pipeline();
  REQUIRE(run(small_train("checkpoint_replay.json", "losses_replay.csv")).code == 0);
  const std::string before = slurp(path("checkpoint_replay.json"));
  fs::remove(path("checkpoint_replay.json"));
  const auto r = run({"replay", "--manifest", path("checkpoint_replay.json.manifest.json"), "--verify", "on"});
  CHECK(r.code == 0);
  CHECK(slurp(path("checkpoint_replay.json")) == before);

  const std::string tampered = path("tampered.manifest.json");
  auto doc = json::parse(slurp(path("checkpoint_replay.json.manifest.json")));
  doc["inputs"][0]["fnv1a64"] = "0000000000000000";
  tripose::io::write_file(tampered, doc.dump());
  CHECK(run({"replay", "--manifest", tampered}).code == 3);
}

#pragma once

#include "tripose/kinematics.hpp"
#include "tripose/metrics.hpp"
#include "tripose/pipeline.hpp"
#include "tripose/training.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tripose::io {

// Every document is JSON with an integer "schema_version". Parse failures
// and schema mismatches throw Error(Format). Doubles are written with
// round-trip precision, so equal inputs serialize to identical bytes.

inline constexpr int kSchemaVersion = 1;

std::string read_file(const std::string& path);
/// Writes atomically enough for our purposes: truncate, write, flush.
void write_file(const std::string& path, const std::string& contents);

std::string dump_scene(const SyntheticScene& scene);
SyntheticScene parse_scene(const std::string& text);

struct KeypointFile {
  std::string skeleton_id;
  std::vector<KeypointSequence2D> views;
};
std::string dump_keypoints(const KeypointFile& file);
KeypointFile parse_keypoints(const std::string& text);

/// `oracle_rotation_errors` (radians, one per pair) is written when non-empty.
std::string dump_calibration(const MultiViewCalibration& calibration,
                             const std::vector<double>& oracle_rotation_errors = {});
MultiViewCalibration parse_calibration(const std::string& text);

std::string dump_pseudo_gt(const PseudoGroundTruth& pseudo, const std::string& skeleton_id);
PseudoGroundTruth parse_pseudo_gt(const std::string& text);

/// {"schema_version", "poses": [[[x, y, z] x J] x T]}; also used for the
/// real-pose archive of adversarial training.
std::string dump_poses(const std::vector<Pose3D>& poses);
std::vector<Pose3D> parse_poses(const std::string& text);

struct Checkpoint {
  std::string kind;  ///< "lifting", "camera" or "critic"
  NetworkConfig network;
  int critic_hidden = 0;
  std::vector<const nn::Parameter*> parameters;
};
std::string dump_checkpoint(const Checkpoint& checkpoint);

struct LoadedCheckpoint {
  std::string kind;
  NetworkConfig network;
  int critic_hidden = 0;
  std::map<std::string, nn::Tensor> parameters;
};
LoadedCheckpoint parse_checkpoint(const std::string& text);
/// Copies values by name; throws Format on a missing name or shape change.
void assign_parameters(const LoadedCheckpoint& checkpoint, const std::vector<nn::Parameter*>& targets);

LiftingModel load_lifting(const LoadedCheckpoint& checkpoint);

std::string dump_eval_report(const EvalReport& report, const std::map<std::string, std::string>& config_echo,
                             const std::optional<LossRecord>& losses = std::nullopt);

/// epoch,L_T,L_R,total; columns of disabled terms are omitted.
std::string loss_csv(const std::vector<LossRecord>& history, bool with_triangulation, bool with_reprojection);

}  // namespace tripose::io

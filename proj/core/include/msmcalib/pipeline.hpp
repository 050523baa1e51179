#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "msmcalib/beams.hpp"
#include "msmcalib/dataset.hpp"
#include "msmcalib/hall.hpp"
#include "msmcalib/home_frame.hpp"
#include "msmcalib/pose_estimation.hpp"

namespace msm {

/// One estimated mirror plane as stored in poses.json.
struct PoseRecord {
  int pulse = 0;
  double t = 0.0;
  FrameTag tag = FrameTag::Full;
  PlaneH plane;
  Mat3 cov = Mat3::Zero();
  double theta_deg = 0.0;
  std::optional<HeldoutPrediction> heldout;
  std::optional<HeldoutPrediction> baseline_heldout;
};

struct PosesFile {
  std::vector<int> estimation_beams;
  std::optional<int> holdout_beam;
  std::map<int, PluckerLine> beams;
  RigidTransformMin T_C1W;
  RigidTransformMin T_C2W;
  int iterations = 0;
  double final_cost = 0.0;
  bool converged = false;
  double mean_theta_deg = 0.0;
  std::vector<int> skipped_pulses;
  std::vector<PoseRecord> poses;
};

PosesFile to_poses_file(const PoseEstimationResult& result);

struct HomePoseRecord {
  int pulse = 0;
  double t = 0.0;
  FrameTag tag = FrameTag::Full;
  HomePose pose;
};

struct FrameFile {
  HomeFrame frame;
  std::vector<HomePoseRecord> poses;
};

/// Home frame from the estimated planes: fast axis from the fast-tagged poses, home normal from the
/// home-tagged pose (temporal mean otherwise), origin from all non-home planes.
/// Throws InsufficientData without fast-scan poses.
FrameFile estimate_frame(const PosesFile& poses, PencilPolicy policy = PencilPolicy::Flag);

/// Full-scan poses as Hall regression targets.
std::vector<PoseSample> hall_targets(const FrameFile& frame);

struct HallCalibration {
  HallModel model;  ///< fitted on all poses
  HallEvaluation evaluation;
  Vec3 train_rmse = Vec3::Zero();  ///< of the model fitted on all poses
};

HallCalibration calibrate_hall(const FrameFile& frame, const HallSeries& actual, const HallSeries& background,
                               HallModelKind kind, const HallEvalOptions& options, const DriveConfig& drives);

}  // namespace msm

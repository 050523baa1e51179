#pragma once

#include <filesystem>
#include <string>

#include "msmcalib/beams.hpp"
#include "msmcalib/dataset.hpp"
#include "msmcalib/pipeline.hpp"
#include "msmcalib/simulator.hpp"

namespace msm::io {

namespace fs = std::filesystem;

// All readers throw CalibError(Validation) naming the file and the JSON path of the offending field.

/// scene.json, beams.json, scan.json and the two Hall CSV files.
void write_dataset(const Dataset& data, const fs::path& dir);
Dataset read_dataset(const fs::path& dir);

HallSeries read_hall_csv(const fs::path& path);
void write_hall_csv(const HallSeries& series, const fs::path& path);

/// Config fields absent from the file keep their defaults.
sim::SimConfig read_sim_config(const fs::path& path);
sim::SimConfig sim_config_from_string(const std::string& text, const std::string& name = "config");
std::string sim_config_to_string(const sim::SimConfig& cfg);

void write_ground_truth(const sim::GroundTruth& truth, const fs::path& path);
sim::GroundTruth read_ground_truth(const fs::path& path);

void write_beams(const BeamReconstruction& beams, const fs::path& path);
BeamReconstruction read_beams(const fs::path& path);

void write_poses(const PosesFile& poses, const fs::path& path);
PosesFile read_poses(const fs::path& path);

void write_frame(const FrameFile& frame, const fs::path& path);
FrameFile read_frame(const fs::path& path);

void write_hall_model(const HallCalibration& cal, const HallEvalOptions& options, const fs::path& path);
struct HallModelFile {
  HallModel model;
  Vec3 train_rmse = Vec3::Zero();
  Vec3 test_rmse = Vec3::Zero();
  Vec3 test_rmse_sd = Vec3::Zero();
  int repeats = 0;
  double split = 0.0;
  std::vector<Vec3> test_rmse_per_repeat;
};
HallModelFile read_hall_model(const fs::path& path);

}  // namespace msm::io

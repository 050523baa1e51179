// msmcalib: simulate, calibrate and report on a scanning-mirror rig.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "msmcalib/dataset_io.hpp"
#include "msmcalib/error.hpp"
#include "msmcalib/pipeline.hpp"
#include "msmcalib/report.hpp"

namespace fs = std::filesystem;
using namespace msm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("MSMCALIB_SEED");
  if (!s || !*s) return std::nullopt;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != std::string(s).size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw CalibError(ErrorCode::Validation, std::string("MSMCALIB_SEED is not an unsigned integer: ") + s);
  }
}

void say(const std::string& msg) { std::cout << msg << std::endl; }

struct SimulateArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void cmd_simulate(const SimulateArgs& a) {
  sim::SimConfig cfg = a.config.empty() ? sim::SimConfig{} : io::read_sim_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  else if (const auto s = env_seed()) cfg.seed = *s;
  const auto out = sim::simulate(cfg);
  io::write_dataset(out.data, a.out);
  io::write_ground_truth(out.truth, fs::path(a.out) / "ground_truth.json");
  std::ofstream(fs::path(a.out) / "config.json") << io::sim_config_to_string(cfg);
  say("simulated " + std::to_string(out.truth.pulses.size()) + " pulses in " + std::to_string(out.data.frames.size()) +
      " frames, " + std::to_string(out.truth.dropped_dots) + " dots off board -> " + a.out);
}

void cmd_estimate_beams(const std::string& data_dir, std::string out) {
  if (out.empty()) out = (fs::path(data_dir) / "beams_est.json").string();
  const Dataset data = io::read_dataset(data_dir);
  const auto beams = reconstruct_beams(data.captures, data.scene);
  io::write_beams(beams, out);
  say("estimated " + std::to_string(beams.beams.size()) + " beams -> " + out);
}

void cmd_estimate_poses(const std::string& data_dir, std::string beams_file, std::optional<int> holdout, std::string out) {
  if (beams_file.empty()) beams_file = (fs::path(data_dir) / "beams_est.json").string();
  if (out.empty()) out = (fs::path(data_dir) / "poses.json").string();
  const Dataset data = io::read_dataset(data_dir);
  const auto beams = io::read_beams(beams_file);
  PoseEstimationOptions opt;
  opt.holdout_beam = holdout;
  const auto result = estimate_poses(data, beams, opt);
  io::write_poses(to_poses_file(result), out);
  say("estimated " + std::to_string(result.pulses.size()) + " mirror planes, mean spanning angle " +
      std::to_string(result.mean_theta_deg) + " deg -> " + out);
}

void cmd_estimate_frame(const std::string& poses_file, std::string out, const std::string& pencil) {
  if (out.empty()) out = (fs::path(poses_file).parent_path() / "frame.json").string();
  const auto poses = io::read_poses(poses_file);
  const auto frame = estimate_frame(poses, pencil == "error" ? PencilPolicy::Error : PencilPolicy::Flag);
  io::write_frame(frame, out);
  say("home frame with " + std::to_string(frame.poses.size()) + " poses -> " + out);
}

struct HallArgs {
  std::string data;
  std::string frame;
  std::string model = "sine";
  int repeats = 50;
  double split = 0.8;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void cmd_calibrate_hall(const HallArgs& a) {
  const std::string frame_file = a.frame.empty() ? (fs::path(a.data) / "frame.json").string() : a.frame;
  const std::string out = a.out.empty() ? (fs::path(a.data) / ("hallmodel_" + a.model + ".json")).string() : a.out;
  const Dataset data = io::read_dataset(a.data);
  if (data.hall_actual.empty()) throw CalibError(ErrorCode::Validation, "dataset has no Hall recordings");
  const auto frame = io::read_frame(frame_file);
  HallEvalOptions opt;
  opt.repeats = a.repeats;
  opt.split = a.split;
  opt.seed = a.seed ? *a.seed : env_seed().value_or(1);
  const auto cal = calibrate_hall(frame, data.hall_actual, data.hall_background, hall_model_kind_from_string(a.model),
                                  opt, data.scene.drives);
  io::write_hall_model(cal, opt, out);
  const auto& m = cal.evaluation.mean;
  const auto& s = cal.evaluation.sd;
  std::cout << "model " << a.model << ", " << opt.repeats << " repeats, split " << opt.split << "\n"
            << "  test RMSE alpha " << m.x() << " +- " << s.x() << " deg\n"
            << "  test RMSE beta  " << m.y() << " +- " << s.y() << " deg\n"
            << "  test RMSE tau   " << m.z() << " +- " << s.z() << " mm\n"
            << "  time offset " << 1e3 * cal.model.dt << " ms -> " << out << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scanning-mirror pose and Hall sensor calibration"};
  app.require_subcommand(1);

  SimulateArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset with ground truth");
  simulate->add_option("--config", sim_args.config, "Simulator config JSON; missing fields keep their defaults")
      ->check(CLI::ExistingFile);
  simulate->add_option("--out", sim_args.out, "Output directory")->required();
  simulate->add_option("--seed", sim_args.seed, "RNG seed (falls back to MSMCALIB_SEED)");

  std::string data_dir, out, beams_file, poses_file, pencil = "flag";
  std::optional<int> holdout;
  auto* beams = app.add_subcommand("estimate-beams", "Reconstruct the incident beams from sliding-board captures");
  beams->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  beams->add_option("--out", out, "Output file (default <data>/beams_est.json)");

  auto* poses = app.add_subcommand("estimate-poses", "Estimate one mirror plane per pulse");
  poses->add_option("--data", data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  poses->add_option("--beams", beams_file, "Beam estimate (default <data>/beams_est.json)");
  poses->add_option("--holdout-beam", holdout, "Beam id kept out of the estimation for validation");
  poses->add_option("--out", out, "Output file (default <data>/poses.json)");

  auto* frame = app.add_subcommand("estimate-frame", "Estimate the home frame and express the poses in it");
  frame->add_option("--poses", poses_file, "poses.json")->required()->check(CLI::ExistingFile);
  frame->add_option("--pencil", pencil, "Pencil-of-planes handling")->check(CLI::IsMember({"flag", "error"}));
  frame->add_option("--out", out, "Output file (default frame.json next to the poses)");

  HallArgs hall_args;
  auto* hall = app.add_subcommand("calibrate-hall", "Fit and evaluate a Hall sensor model");
  hall->add_option("--data", hall_args.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  hall->add_option("--frame", hall_args.frame, "frame.json (default <data>/frame.json)");
  hall->add_option("--model", hall_args.model, "Model kind")->check(CLI::IsMember({"linear", "sine"}));
  hall->add_option("--repeats", hall_args.repeats, "Random train/test splits")->check(CLI::PositiveNumber);
  hall->add_option("--split", hall_args.split, "Training fraction")->check(CLI::Range(0.0, 1.0));
  hall->add_option("--seed", hall_args.seed, "Split seed (falls back to MSMCALIB_SEED)");
  hall->add_option("--out", hall_args.out, "Output file (default <data>/hallmodel_<model>.json)");

  std::string run_dir;
  auto* rep = app.add_subcommand("report", "Write report.md and SVG plots for a run directory");
  rep->add_option("--run", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*simulate) cmd_simulate(sim_args);
    else if (*beams) cmd_estimate_beams(data_dir, out);
    else if (*poses) cmd_estimate_poses(data_dir, beams_file, holdout, out);
    else if (*frame) cmd_estimate_frame(poses_file, out, pencil);
    else if (*hall) cmd_calibrate_hall(hall_args);
    else if (*rep) {
      report::write_report(run_dir);
      say("report -> " + (fs::path(run_dir) / "report.md").string());
    }
  } catch (const CalibError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return is_validation_error(e.code()) ? kExitValidation : kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitNumerical;
  }
  return kExitOk;
}

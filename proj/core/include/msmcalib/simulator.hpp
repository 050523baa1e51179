#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "msmcalib/dataset.hpp"
#include "msmcalib/geometry.hpp"
#include "msmcalib/hall.hpp"
#include "msmcalib/home_frame.hpp"

namespace msm::sim {

/// Incident beam striking the mirror at its home pose.
struct BeamDef {
  int id = 0;
  double incidence_deg = 25.0;  ///< angle to the home normal
  double azimuth_deg = 0.0;     ///< around the home normal, from the fast axis
  Vec2 aim_offset_mm = Vec2::Zero();  ///< hit point offset from the rotation center, in the home plane
};

struct SceneConfig {
  Intrinsics K1{3500.0, 3500.0, 1920.0, 1374.0, 3840, 2748};
  Intrinsics K2{3500.0, 3500.0, 1920.0, 1374.0, 3840, 2748};
  CheckerboardSpec world_board{15, 20, 10.0};
  CheckerboardSpec sliding_board{17, 17, 10.0};
  Point3 camera1_position{260.0, 60.0, -560.0};
  Point3 camera1_target{95.0, 70.0, -80.0};
  Point3 camera2_position{-40.0, 80.0, -600.0};
  Point3 camera2_target{95.0, 70.0, 0.0};
  Point3 rotation_center{95.0, 70.0, -200.0};
  Vec3 home_normal{0.02, -0.03, 1.0};  ///< facing the world board
  Vec3 fast_axis{1.0, 0.05, 0.0};
  std::vector<BeamDef> beams{{0, 25.0, 0.0}, {1, 25.0, 46.0}, {2, 25.0, 200.0}};
  std::vector<double> sliding_heights_mm{30.0, 60.0, 90.0, 120.0, 150.0};
  double sliding_tilt_deg = 2.0;
  /// Offset of the rotation center assumed by the pure-rotation baseline.
  Vec3 nominal_center_offset = Vec3::Zero();
};

struct ScanConfig {
  double fast_amplitude_deg = 4.37 / 2.0;
  double slow_amplitude_deg = 17.17 / 2.0;
  /// Out-of-plane translation at full slow deflection; tau = amplitude * (beta / slow_amplitude)^2.
  double translation_mm = 1.04;
  double fast_hz = 31.0;
  double slow_hz = 7.0;
  double fast_phase_rad = 0.0;
  double slow_phase_rad = 0.0;
  double duration_s = 20.0;
  std::vector<double> pulse_constants{-0.75, -0.25, 0.25, 0.75};
  int max_pulses = 195;
  bool home_capture = true;
  std::vector<double> fast_constants{-0.9, -0.6, -0.3, 0.0, 0.3, 0.6, 0.9};  ///< empty: no fast-only scan
  int fast_cycles = 31;
  int pulses_per_frame = 12;
  double min_dot_separation_px = 5.0;
};

enum class HallMode { Matched, Dipole };

struct HallConfig {
  bool enabled = true;
  HallMode mode = HallMode::Dipole;
  double rate_hz = 1000.0;
  double margin_s = 0.5;
  double dt_s = 0.0;  ///< injected offset: the reading at t reflects the pose at t - dt
  double noise = 0.5;  ///< white noise sigma per recording, device units
  Eigen::Matrix3d M = (Eigen::Matrix3d() << -40.0, 3.0, 0.0, 2.0, -12.0, 0.0, 0.0, 1.5, 80.0).finished();
  Vec3 offset{120.0, -80.0, 450.0};
  /// Coil interference per drive, device units.
  Vec3 coil_fast{6.0, -2.0, 1.0};
  Vec3 coil_slow{-3.0, 5.0, 2.0};
  double dipole_scale = 1000.0;
  double magnet_depth_mm = 1.5;  ///< behind the mirror surface
  Point3 sensor_position{0.2, -0.15, -10.0};  ///< in {0}
};

struct SimConfig {
  SceneConfig scene;
  ScanConfig scan;
  HallConfig hall;
  double sigma_px = 0.2;  ///< corner and dot noise, px
  std::uint64_t seed = 1;
};

struct PulseTruth {
  int id = 0;
  double t = 0.0;
  FrameTag tag = FrameTag::Full;
  PlaneH plane;
  HomePose pose;
};

struct GroundTruth {
  RigidTransform T_C1W;
  RigidTransform T_C2W;
  std::vector<RigidTransform> T_C1S;
  std::map<int, PluckerLine> beams;
  HomeFrame frame;
  std::vector<PulseTruth> pulses;
  double hall_dt = 0.0;
  int dropped_dots = 0;
  int retroreflections = 0;
};

struct SimOutput {
  Dataset data;
  GroundTruth truth;
};

RigidTransform look_at(const Point3& position, const Point3& target);

/// True mirror frame of the scene.
HomeFrame true_home_frame(const SceneConfig& scene);

/// Pose in {0} at time t during the 2-axis scan.
HomePose mirror_pose(const ScanConfig& scan, double t);
/// Mirror plane in {W} at time t.
PlaneH mirror_trajectory(const SceneConfig& scene, const ScanConfig& scan, double t);

/// Normalized drive signals s1 (fast), s2 (slow) and their derivatives.
struct Drives {
  double s1, s2, ds1, ds2;
};
Drives drives(const ScanConfig& scan, double t);

/// Times in [0, duration] where both drives rise and s1 - s2 equals one of the constants.
/// With fast_only the slow drive is held at zero. Throws NoPulses.
std::vector<double> schedule_pulses(const ScanConfig& scan, const std::vector<double>& constants, double duration,
                                    bool fast_only = false);

PluckerLine beam_line(const SceneConfig& scene, const BeamDef& beam);

/// Reflected dot on the world plane. Throws ParallelLinePlane, DotOffBoard (behind the mirror).
Point3 reflect_to_world(const PlaneH& mirror, const PluckerLine& beam);

/// Hall actual and background recordings for the scan.
std::pair<HallSeries, HallSeries> synth_hall(const SimConfig& cfg, double t_begin, double t_end, std::uint64_t seed);
/// Noise-free foreground at time t.
Vec3 hall_foreground(const SimConfig& cfg, double t);

SimOutput simulate(const SimConfig& cfg);

}  // namespace msm::sim

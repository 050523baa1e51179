#pragma once

#include <array>
#include <map>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "msmcalib/beams.hpp"
#include "msmcalib/dataset.hpp"
#include "msmcalib/geometry.hpp"
#include "msmcalib/lm.hpp"

namespace msm {

/// Smallest spanning angle accepted by the closed-form initialization.
inline constexpr double kMinSpanningAngleDeg = 1.0;
/// Largest gap between the incident beam and the mirror-normal line through a dot.
inline constexpr double kMaxSkewGapMm = 1.0;

/// Closed-form mirror plane from two beams and their reflected dots.
/// Throws DegenerateSpanningAngle, Retroreflection, SkewLines.
PlaneH init_mirror_plane(const std::array<PluckerLine, 2>& beams, const std::array<Point3, 2>& dots);

/// Angle between the two light-path plane normals, degrees in (0, 90]. Throws DegenerateSpanningAngle at 0.
double spanning_angle_deg(const PluckerLine& L1, const Point3& X1, const PluckerLine& L2, const Point3& X2);

/// Pure-rotation mirror plane: the mirror point is fixed where the beam passes closest to the assumed
/// rotation center and the normal bisects the incident and reflected directions.
PlaneH baseline_pure_rotation(const PluckerLine& beam, const Point3& dot, const Point3& rotation_center);

/// Pulse view of the scan frames: dots grouped by pulse, in pulse-id order.
struct Pulse {
  int id = 0;
  double t = 0.0;
  FrameTag tag = FrameTag::Full;
  std::map<int, ImagePoint> dots;  ///< by beam id
};
std::vector<Pulse> collect_pulses(const std::vector<ScanFrame>& frames);

/// Minimal-parameter state of the joint estimation.
struct CalibState {
  RigidTransformMin T_C1W;
  RigidTransformMin T_C2W;
  std::vector<RigidTransformMin> T_C1S;  ///< per sliding capture
  std::map<int, LineMin> beams;          ///< estimation beams
  std::vector<PlaneMin> planes;          ///< per estimated pulse
};

struct MleSolution {
  CalibState state;
  Eigen::MatrixXd covariance;  ///< over the packed state
  lm::Summary summary;
  // Offsets into the packed state.
  int off_T_C1W = 0;
  int off_T_C2W = 0;
  std::vector<int> off_T_C1S;
  std::map<int, int> off_beam;
  std::vector<int> off_plane;

  Mat3 plane_covariance(std::size_t j) const;
};

struct MleInput {
  const Dataset* data = nullptr;
  std::vector<int> estimation_beams;
  std::vector<Pulse> pulses;  ///< pulses to estimate, each with >= 2 estimation-beam dots
};

/// Joint maximum-likelihood refinement of planes, beams and extrinsics with Levenberg-Marquardt.
MleSolution solve_mle(const MleInput& input, const CalibState& init, const lm::Options& options = {},
                      bool with_covariance = true);

struct HeldoutPrediction {
  double delta_px = 0.0;
  double sigma_px = 0.0;
  double delta_mm = 0.0;   ///< on the world plane
  double delta_deg = 0.0;  ///< mirror-angle equivalent: 0.5 * atan(delta_mm / throw distance)
  Vec2 predicted = Vec2::Zero();
};

/// Held-out beam line rebuilt from its sliding dots with the given extrinsics.
PluckerLine heldout_line(const Dataset& data, int beam, const RigidTransformMin& T_C1W,
                         const std::vector<RigidTransformMin>& T_C1S);

/// Prediction error of the held-out dot of one pulse, with its first-order standard deviation.
/// Sigma propagates the state covariance of the extrinsics and the plane, the held-out sliding dots
/// and the observed dot.
HeldoutPrediction predict_heldout(const Dataset& data, int beam, const MleSolution& sol, std::size_t plane_index,
                                  const ImagePoint& observed);

/// Same without uncertainty, for an arbitrary plane (used for the baseline).
HeldoutPrediction heldout_error(const Dataset& data, const PluckerLine& line, const RigidTransformMin& T_C2W,
                                const PlaneH& plane, const ImagePoint& observed);

struct PoseEstimationOptions {
  std::optional<int> holdout_beam;
  lm::Options lm;
  bool covariance = true;
};

struct PulseEstimate {
  int pulse = 0;
  double t = 0.0;
  FrameTag tag = FrameTag::Full;
  PlaneH plane;  ///< in {W}, d >= 0
  Mat3 cov = Mat3::Zero();
  double theta_deg = 0.0;
  std::optional<HeldoutPrediction> heldout;
  std::optional<PlaneH> baseline_plane;
  std::optional<HeldoutPrediction> baseline_heldout;
};

struct PoseEstimationResult {
  MleSolution mle;
  std::vector<PulseEstimate> pulses;
  std::map<int, PluckerLine> beams;  ///< refined, in {W}
  std::vector<int> estimation_beams;
  std::optional<int> holdout_beam;
  std::vector<int> skipped_pulses;
  double mean_theta_deg = 0.0;
};

/// Closed-form initialization followed by the joint refinement and held-out validation.
/// Throws Validation when the held-out beam is unknown, InsufficientData when no pulse is usable.
PoseEstimationResult estimate_poses(const Dataset& data, const BeamReconstruction& beams,
                                    const PoseEstimationOptions& options = {});

}  // namespace msm

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "msmcalib/geometry.hpp"

namespace msm {

/// Triaxial Hall readings, device units, strictly increasing timestamps in seconds.
struct HallSeries {
  std::vector<double> t;
  std::vector<Vec3> B;

  std::size_t size() const { return t.size(); }
  bool empty() const { return t.empty(); }
  double t_begin() const { return t.front(); }
  double t_end() const { return t.back(); }
  /// Throws Validation on size mismatch, NaN or non-increasing time.
  void validate() const;
};

/// Piecewise-linear interpolation, exact at the samples. Throws OutOfRange outside [t_begin, t_end].
Vec3 interpolate(const HallSeries& series, double t);

/// actual - background sampled on the actual timestamps inside the common span. Throws NoOverlap.
HallSeries foreground(const HallSeries& actual, const HallSeries& background);

/// Mirror pose in {0} at time t: alpha and beta in degrees, tau in mm.
struct PoseSample {
  double t = 0.0;
  Vec3 pose = Vec3::Zero();
};

enum class HallModelKind { Linear, Sine };

std::string to_string(HallModelKind kind);
HallModelKind hall_model_kind_from_string(const std::string& s);

struct HallModel {
  HallModelKind kind = HallModelKind::Linear;
  Eigen::Matrix<double, 3, 4> A = Eigen::Matrix<double, 3, 4>::Zero();
  double dt = 0.0;  ///< s; the reading at t + dt belongs to the pose at t
  Vec3 f = Vec3::Zero();    ///< Hz, sine kind
  Vec3 phi = Vec3::Zero();  ///< rad, sine kind

  /// Regressor [z; 1] for the pose at time t. Linear kind reads the series at t + dt.
  Eigen::Vector4d regressor(double t, const HallSeries& readings) const;
  Vec3 predict(double t, const HallSeries& readings) const { return A * regressor(t, readings); }
};

struct HallFitOptions {
  double dt_bound = 1.0 / 7.0;  ///< s, grid covers [-dt_bound, dt_bound]
  double grid_step = 0.5e-3;    ///< s
  double golden_tol = 1e-7;     ///< s
  /// Sine kind: per-axis frequencies; estimated from the readings when absent.
  std::optional<Vec3> frequencies;
  /// Used when the FFT finds no dominant peak.
  std::optional<Vec3> fallback_frequencies;
};

struct SinusoidFit {
  double f = 0.0;       ///< Hz
  double phase = 0.0;   ///< rad, signal ~ amp sin(2 pi f t + phase) + offset
  double amplitude = 0.0;
  double offset = 0.0;
  double peak_db = 0.0;  ///< FFT peak power over the median, dB
};

/// Dominant sinusoid of one axis: FFT peak, then Gauss-Newton on (f, phase, amplitude, offset).
/// Throws FrequencyEstimationFailed when the peak is less than 6 dB above the median.
SinusoidFit fit_sinusoid(std::span<const double> t, std::span<const double> y);

/// Least-squares phase of a sinusoid with known frequency.
double fit_phase(std::span<const double> t, std::span<const double> y, double f);

/// Per-axis dominant frequencies of a series.
Vec3 estimate_frequencies(const HallSeries& series, const std::optional<Vec3>& fallback = std::nullopt);

/// Sum over poses of |f(A, B(t_j + dt)) - pose_j| with A the least-squares solution at dt.
double hall_objective(const HallModel& model, std::span<const PoseSample> poses, const HallSeries& readings);

/// Jointly estimates A and dt: grid over dt, closed-form A per candidate, golden-section refinement.
/// Throws InsufficientData (< 8 poses), RankDeficientRegressors, OutOfRange when no candidate fits the series.
HallModel fit_linear(std::span<const PoseSample> poses, const HallSeries& readings, const HallFitOptions& options = {});
HallModel fit_sine(std::span<const PoseSample> poses, const HallSeries& readings, const HallFitOptions& options = {});
HallModel fit_hall(HallModelKind kind, std::span<const PoseSample> poses, const HallSeries& readings,
                   const HallFitOptions& options = {});

/// Per-component RMSE of the model on the given poses.
Vec3 hall_rmse(const HallModel& model, std::span<const PoseSample> poses, const HallSeries& readings);

struct HallEvalOptions {
  int repeats = 50;
  double split = 0.8;
  std::uint64_t seed = 1;
  HallFitOptions fit;
  /// Constant added to the test readings only.
  Vec3 test_shift = Vec3::Zero();
};

struct HallEvaluation {
  std::vector<Vec3> train_rmse;
  std::vector<Vec3> test_rmse;
  std::vector<double> dt;
  Vec3 mean = Vec3::Zero();  ///< of test RMSE
  Vec3 sd = Vec3::Zero();
};

/// Repeated random train/test splits over pose indices. Readings go to the nearest pose in time and
/// each side is interpolated on its own readings. Throws InsufficientData.
HallEvaluation evaluate_hall(HallModelKind kind, std::span<const PoseSample> poses, const HallSeries& readings,
                             const HallEvalOptions& options = {});

}  // namespace msm

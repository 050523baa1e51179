#include "msmcalib/pipeline.hpp"

#include "msmcalib/error.hpp"

namespace msm {

PosesFile to_poses_file(const PoseEstimationResult& result) {
  PosesFile f;
  f.estimation_beams = result.estimation_beams;
  f.holdout_beam = result.holdout_beam;
  f.beams = result.beams;
  f.T_C1W = result.mle.state.T_C1W;
  f.T_C2W = result.mle.state.T_C2W;
  f.iterations = result.mle.summary.iterations;
  f.final_cost = result.mle.summary.final_cost;
  f.converged = result.mle.summary.converged;
  f.mean_theta_deg = result.mean_theta_deg;
  f.skipped_pulses = result.skipped_pulses;
  for (const auto& p : result.pulses) {
    PoseRecord r;
    r.pulse = p.pulse;
    r.t = p.t;
    r.tag = p.tag;
    r.plane = p.plane;
    r.cov = p.cov;
    r.theta_deg = p.theta_deg;
    r.heldout = p.heldout;
    r.baseline_heldout = p.baseline_heldout;
    f.poses.push_back(r);
  }
  return f;
}

FrameFile estimate_frame(const PosesFile& poses, PencilPolicy policy) {
  std::vector<Vec3> fast;
  std::vector<PlaneH> planes;
  std::optional<PlaneH> home;
  for (const auto& p : poses.poses) {
    switch (p.tag) {
      case FrameTag::Home: home = p.plane; break;
      case FrameTag::Fast:
        fast.push_back(p.plane.n);
        planes.push_back(p.plane);
        break;
      case FrameTag::Full: planes.push_back(p.plane); break;
    }
  }
  if (fast.size() < 2) throw CalibError(ErrorCode::InsufficientData, "home frame needs at least 2 fast-scan poses");
  if (home && home->n.z() < 0.0) home = home->flipped();
  FrameFile out;
  out.frame = estimate_home_frame(planes, fast, home ? &*home : nullptr, policy);
  for (const auto& p : poses.poses) out.poses.push_back({p.pulse, p.t, p.tag, to_home_frame(p.plane, out.frame)});
  return out;
}

std::vector<PoseSample> hall_targets(const FrameFile& frame) {
  std::vector<PoseSample> out;
  for (const auto& p : frame.poses) {
    if (p.tag == FrameTag::Full) out.push_back({p.t, p.pose.vector()});
  }
  return out;
}

HallCalibration calibrate_hall(const FrameFile& frame, const HallSeries& actual, const HallSeries& background,
                               HallModelKind kind, const HallEvalOptions& options, const DriveConfig& drives) {
  const HallSeries B = foreground(actual, background);
  const auto targets = hall_targets(frame);
  HallEvalOptions opt = options;
  if (!opt.fit.fallback_frequencies) opt.fit.fallback_frequencies = Vec3(drives.slow_hz, drives.fast_hz, 2.0 * drives.slow_hz);
  if (kind == HallModelKind::Sine && !opt.fit.frequencies) {
    opt.fit.frequencies = estimate_frequencies(B, opt.fit.fallback_frequencies);
  }
  HallCalibration out;
  out.evaluation = evaluate_hall(kind, targets, B, opt);
  out.model = fit_hall(kind, targets, B, opt.fit);
  out.train_rmse = hall_rmse(out.model, targets, B);
  return out;
}

}  // namespace msm

#include "msmcalib/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "msmcalib/error.hpp"

namespace msm::sim {

namespace {

constexpr double kTwoPi = 2.0 * kPi;

struct Noise {
  std::mt19937_64 rng;
  std::normal_distribution<double> n{0.0, 1.0};

  explicit Noise(std::uint64_t seed) : rng(seed) {}
  double operator()(double sigma) { return sigma > 0.0 ? sigma * n(rng) : 0.0; }
};

ImagePoint observe(const Vec2& uv, double sigma, Noise& noise) {
  ImagePoint p;
  p.uv = uv + Vec2(noise(sigma), noise(sigma));
  if (sigma > 0.0) p.cov = sigma * sigma * Mat2::Identity();
  return p;
}

std::vector<ImagePoint> observe_board(const CheckerboardSpec& board, const RigidTransform& T, const Intrinsics& K,
                                      double sigma, Noise& noise) {
  std::vector<ImagePoint> out;
  out.reserve(static_cast<std::size_t>(board.size()));
  for (const auto& X : board.corners()) out.push_back(observe(project(T, K, X), sigma, noise));
  return out;
}

double bisect(const auto& g, double a, double b) {
  double ga = g(a);
  for (int i = 0; i < 200 && b - a > 1e-12; ++i) {
    const double c = 0.5 * (a + b);
    const double gc = g(c);
    if ((gc < 0.0) == (ga < 0.0)) {
      a = c;
      ga = gc;
    } else {
      b = c;
    }
  }
  return 0.5 * (a + b);
}

std::vector<double> subsample(const std::vector<double>& t, int max_count) {
  if (max_count <= 0 || static_cast<int>(t.size()) <= max_count) return t;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(max_count));
  const double step = max_count > 1 ? static_cast<double>(t.size() - 1) / (max_count - 1) : 0.0;
  for (int i = 0; i < max_count; ++i) out.push_back(t[static_cast<std::size_t>(std::lround(i * step))]);
  return out;
}

struct RenderedPulse {
  PulseTruth truth;
  std::vector<std::pair<int, Vec2>> dots;
};

}  // namespace

RigidTransform look_at(const Point3& position, const Point3& target) {
  const Vec3 z = (target - position).normalized();
  Vec3 x = Vec3::UnitX() - Vec3::UnitX().dot(z) * z;
  if (x.norm() < 1e-6) x = z.unitOrthogonal();
  x.normalize();
  const Vec3 y = z.cross(x);
  RigidTransform T;
  T.R.row(0) = x.transpose();
  T.R.row(1) = y.transpose();
  T.R.row(2) = z.transpose();
  T.t = -T.R * position;
  return T;
}

HomeFrame true_home_frame(const SceneConfig& scene) {
  return make_home_frame(scene.home_normal, scene.fast_axis, scene.rotation_center);
}

Drives drives(const ScanConfig& scan, double t) {
  const double a1 = kTwoPi * scan.fast_hz * t + scan.fast_phase_rad;
  const double a2 = kTwoPi * scan.slow_hz * t + scan.slow_phase_rad;
  return {std::sin(a1), std::sin(a2), kTwoPi * scan.fast_hz * std::cos(a1), kTwoPi * scan.slow_hz * std::cos(a2)};
}

HomePose mirror_pose(const ScanConfig& scan, double t) {
  const Drives s = drives(scan, t);
  return {scan.fast_amplitude_deg * s.s1, scan.slow_amplitude_deg * s.s2, scan.translation_mm * s.s2 * s.s2};
}

PlaneH mirror_trajectory(const SceneConfig& scene, const ScanConfig& scan, double t) {
  return from_home_pose(mirror_pose(scan, t), true_home_frame(scene));
}

std::vector<double> schedule_pulses(const ScanConfig& scan, const std::vector<double>& constants, double duration,
                                    bool fast_only) {
  if (constants.empty()) throw CalibError(ErrorCode::NoPulses, "no pulse constants configured");
  for (double c : constants) {
    if (std::abs(c) >= (fast_only ? 1.0 : 2.0)) {
      throw CalibError(ErrorCode::NoPulses, "pulse constant " + std::to_string(c) + " is outside the signal range");
    }
  }
  const double fmax = std::max(scan.fast_hz, fast_only ? 0.0 : scan.slow_hz);
  const double h = 1.0 / (fmax * 64.0);
  const int steps = static_cast<int>(std::ceil(duration / h));
  std::vector<double> out;
  for (double c : constants) {
    auto g = [&](double t) {
      const Drives s = drives(scan, t);
      return s.s1 - (fast_only ? 0.0 : s.s2) - c;
    };
    double t0 = 0.0;
    double g0 = g(t0);
    for (int k = 1; k <= steps; ++k) {
      const double t1 = std::min(duration, k * h);
      const double g1 = g(t1);
      if (g0 == 0.0 || (g0 < 0.0) != (g1 < 0.0)) {
        const double t = g0 == 0.0 ? t0 : bisect(g, t0, t1);
        const Drives s = drives(scan, t);
        if (s.ds1 > 0.0 && (fast_only || s.ds2 > 0.0)) out.push_back(t);
      }
      t0 = t1;
      g0 = g1;
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end(), [](double a, double b) { return std::abs(a - b) < 1e-9; }), out.end());
  if (out.empty()) throw CalibError(ErrorCode::NoPulses, "drive signals never satisfy the pulse condition");
  return out;
}

PluckerLine beam_line(const SceneConfig& scene, const BeamDef& beam) {
  const HomeFrame f = true_home_frame(scene);
  const Vec3 e1 = f.R0.col(0);
  const Vec3 e2 = f.R0.col(1);
  const Vec3 n0 = f.R0.col(2);
  const double i = deg2rad(beam.incidence_deg);
  const double a = deg2rad(beam.azimuth_deg);
  const Vec3 v = -(std::cos(i) * n0 + std::sin(i) * (std::cos(a) * e1 + std::sin(a) * e2));
  const Point3 hit = f.X_O + beam.aim_offset_mm.x() * e1 + beam.aim_offset_mm.y() * e2;
  return PluckerLine::from_point_direction(hit, v);
}

Point3 reflect_to_world(const PlaneH& mirror, const PluckerLine& beam) {
  const Point3 hit = line_plane_intersect(beam, mirror);
  const Vec3 r = beam.v - 2.0 * beam.v.dot(mirror.n) * mirror.n;
  if (std::abs(r.z()) < kParallelTol) {
    throw CalibError(ErrorCode::ParallelLinePlane, "reflected beam runs parallel to the world plane");
  }
  const double s = -hit.z() / r.z();
  if (s <= 0.0) throw CalibError(ErrorCode::DotOffBoard, "reflected beam leaves away from the world plane");
  return hit + s * r;
}

Vec3 hall_foreground(const SimConfig& cfg, double t) {
  const HomePose p = mirror_pose(cfg.scan, t - cfg.hall.dt_s);
  if (cfg.hall.mode == HallMode::Matched) return cfg.hall.M * p.vector() + cfg.hall.offset;
  const double a = deg2rad(p.alpha_deg);
  const double b = deg2rad(p.beta_deg);
  const Vec3 n(std::sin(b), -std::sin(a) * std::cos(b), std::cos(a) * std::cos(b));
  const Point3 magnet = (p.tau_mm - cfg.hall.magnet_depth_mm) * n;
  const Vec3 r = cfg.hall.sensor_position - magnet;
  const double rn = r.norm();
  const Vec3 u = r / rn;
  const double ref = cfg.hall.sensor_position.norm();
  return cfg.hall.dipole_scale * std::pow(ref / rn, 3) * (3.0 * n.dot(u) * u - n) + cfg.hall.offset;
}

std::pair<HallSeries, HallSeries> synth_hall(const SimConfig& cfg, double t_begin, double t_end, std::uint64_t seed) {
  Noise noise(seed);
  const auto count = static_cast<std::size_t>(std::floor((t_end - t_begin) * cfg.hall.rate_hz)) + 1;
  HallSeries actual;
  HallSeries background;
  actual.t.reserve(count);
  actual.B.reserve(count);
  background.t.reserve(count);
  background.B.reserve(count);
  const Vec3 ambient(5.0, -3.0, 2.0);
  for (std::size_t k = 0; k < count; ++k) {
    const double t = t_begin + static_cast<double>(k) / cfg.hall.rate_hz;
    const Drives s = drives(cfg.scan, t);
    const Vec3 bg = ambient + cfg.hall.coil_fast * s.s1 + cfg.hall.coil_slow * s.s2;
    const Vec3 fg = hall_foreground(cfg, t);
    actual.t.push_back(t);
    background.t.push_back(t);
    actual.B.push_back(fg + bg + Vec3(noise(cfg.hall.noise), noise(cfg.hall.noise), noise(cfg.hall.noise)));
    background.B.push_back(bg + Vec3(noise(cfg.hall.noise), noise(cfg.hall.noise), noise(cfg.hall.noise)));
  }
  return {std::move(actual), std::move(background)};
}

SimOutput simulate(const SimConfig& cfg) {
  const SceneConfig& sc = cfg.scene;
  const ScanConfig& scan = cfg.scan;
  sc.world_board.validate();
  sc.sliding_board.validate();
  if (sc.beams.size() < 2) throw CalibError(ErrorCode::Validation, "scene needs at least 2 beams");

  Noise noise(cfg.seed);
  SimOutput out;
  GroundTruth& gt = out.truth;
  Dataset& data = out.data;

  gt.T_C1W = look_at(sc.camera1_position, sc.camera1_target);
  gt.T_C2W = look_at(sc.camera2_position, sc.camera2_target);
  gt.frame = true_home_frame(sc);
  for (const auto& b : sc.beams) gt.beams[b.id] = beam_line(sc, b);

  data.scene.K1 = sc.K1;
  data.scene.K2 = sc.K2;
  data.scene.world_board = sc.world_board;
  data.scene.sliding_board = sc.sliding_board;
  for (const auto& b : sc.beams) data.scene.beams.push_back(b.id);
  data.scene.nominal_center = sc.rotation_center + sc.nominal_center_offset;
  data.scene.drives = {scan.fast_hz, scan.slow_hz};

  // Sliding captures for the beam estimation step.
  const Vec3 n0 = gt.frame.R0.col(2);
  const auto& sb = sc.sliding_board;
  const Vec3 half((sb.cols - 1) * sb.cell / 2.0, (sb.rows - 1) * sb.cell / 2.0, 0.0);
  for (std::size_t l = 0; l < sc.sliding_heights_mm.size(); ++l) {
    const double phi = deg2rad(73.0 * static_cast<double>(l));
    const Vec3 tilt = deg2rad(sc.sliding_tilt_deg) * Vec3(std::cos(phi), std::sin(phi), 0.0);
    RigidTransform T_WS;
    T_WS.R = gt.frame.R0 * so3::exp(tilt);
    const Point3 center = gt.frame.X_O + sc.sliding_heights_mm[l] * n0;
    T_WS.t = center - T_WS.R * half;
    const RigidTransform T_C1S = gt.T_C1W * T_WS;
    gt.T_C1S.push_back(T_C1S);

    SlidingCapture cap;
    cap.index = static_cast<int>(l);
    cap.world_corners = observe_board(sc.world_board, gt.T_C1W, sc.K1, cfg.sigma_px, noise);
    cap.sliding_corners = observe_board(sb, T_C1S, sc.K1, cfg.sigma_px, noise);
    const PlaneH board = PlaneH::through_point(T_WS.R.col(2), T_WS.t);
    for (const auto& b : sc.beams) {
      const Point3 X = line_plane_intersect(gt.beams.at(b.id), board);
      const Point3 Xs = T_WS.inverse().apply(X);
      const bool on_board = Xs.x() >= -sb.cell && Xs.y() >= -sb.cell && Xs.x() <= sb.cols * sb.cell &&
                            Xs.y() <= sb.rows * sb.cell;
      const Vec2 uv = project(gt.T_C1W, sc.K1, X);
      if (!on_board || !sc.K1.contains(uv)) {
        ++gt.dropped_dots;
        continue;
      }
      cap.dots.push_back({b.id, observe(uv, cfg.sigma_px, noise)});
    }
    data.captures.push_back(std::move(cap));
  }

  // Pulses.
  std::vector<RenderedPulse> pulses;
  int next_id = 0;
  auto render = [&](double t, FrameTag tag, const HomePose& pose) {
    RenderedPulse rp;
    rp.truth = {next_id++, t, tag, from_home_pose(pose, gt.frame), pose};
    for (const auto& b : sc.beams) {
      const PluckerLine& L = gt.beams.at(b.id);
      const Vec3 r = L.v - 2.0 * L.v.dot(rp.truth.plane.n) * rp.truth.plane.n;
      if ((r + L.v).norm() < 1e-9) ++gt.retroreflections;
      try {
        const Point3 X = reflect_to_world(rp.truth.plane, L);
        const Vec2 uv = project(gt.T_C2W, sc.K2, X);
        if (!sc.K2.contains(uv)) throw CalibError(ErrorCode::DotOffBoard, "dot outside the image");
        rp.dots.emplace_back(b.id, uv);
      } catch (const CalibError& e) {
        if (e.code() != ErrorCode::DotOffBoard && e.code() != ErrorCode::ParallelLinePlane) throw;
        ++gt.dropped_dots;
      }
    }
    gt.pulses.push_back(rp.truth);
    pulses.push_back(std::move(rp));
  };

  if (scan.home_capture) render(0.0, FrameTag::Home, HomePose{});
  if (!scan.fast_constants.empty()) {
    const double fast_duration = scan.fast_cycles / scan.fast_hz;
    for (double t : schedule_pulses(scan, scan.fast_constants, fast_duration, true)) {
      const double s1 = drives(scan, t).s1;
      render(t, FrameTag::Fast, HomePose{scan.fast_amplitude_deg * s1, 0.0, 0.0});
    }
  }
  const auto times = subsample(schedule_pulses(scan, scan.pulse_constants, scan.duration_s), scan.max_pulses);
  for (double t : times) render(t, FrameTag::Full, mirror_pose(scan, t));

  // Greedy frame assignment keeping dots apart and frames below capacity.
  struct Slot {
    FrameTag tag;
    std::vector<std::size_t> members;
    std::vector<Vec2> uv;
  };
  std::vector<Slot> slots;
  const double sep2 = scan.min_dot_separation_px * scan.min_dot_separation_px;
  for (std::size_t i = 0; i < pulses.size(); ++i) {
    const auto& p = pulses[i];
    Slot* target = nullptr;
    for (auto& s : slots) {
      if (s.tag != p.truth.tag || static_cast<int>(s.members.size()) >= scan.pulses_per_frame) continue;
      bool clear = true;
      for (const auto& d : p.dots) {
        for (const auto& q : s.uv) clear = clear && (d.second - q).squaredNorm() >= sep2;
      }
      if (clear) {
        target = &s;
        break;
      }
    }
    if (!target) target = &slots.emplace_back(Slot{p.truth.tag, {}, {}});
    target->members.push_back(i);
    for (const auto& d : p.dots) target->uv.push_back(d.second);
  }
  for (std::size_t k = 0; k < slots.size(); ++k) {
    ScanFrame f;
    f.index = static_cast<int>(k);
    f.tag = slots[k].tag;
    f.corners = observe_board(sc.world_board, gt.T_C2W, sc.K2, cfg.sigma_px, noise);
    for (std::size_t i : slots[k].members) {
      const auto& p = pulses[i];
      for (const auto& d : p.dots) f.dots.push_back({d.first, p.truth.id, p.truth.t, observe(d.second, cfg.sigma_px, noise)});
    }
    data.frames.push_back(std::move(f));
  }

  if (cfg.hall.enabled) {
    const double t0 = -cfg.hall.margin_s;
    const double t1 = scan.duration_s + cfg.hall.margin_s;
    auto [actual, background] = synth_hall(cfg, t0, t1, cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    data.hall_actual = std::move(actual);
    data.hall_background = std::move(background);
    gt.hall_dt = cfg.hall.dt_s;
  }
  return out;
}

}  // namespace msm::sim

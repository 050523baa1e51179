#include <algorithm>
#include <cmath>

#include <benchmark/benchmark.h>

#include "msmcalib/beams.hpp"
#include "msmcalib/factors.hpp"
#include "msmcalib/hall.hpp"
#include "msmcalib/pose_estimation.hpp"
#include "msmcalib/simulator.hpp"

using namespace msm;

namespace {

sim::SimConfig scan_only(int pulses) {
  sim::SimConfig cfg;
  cfg.scan.max_pulses = pulses;
  cfg.scan.duration_s = std::max(1.0, pulses / 25.0);
  cfg.scan.home_capture = false;
  cfg.scan.fast_constants.clear();
  cfg.hall.enabled = false;
  return cfg;
}

void BM_ReflectedDot(benchmark::State& state) {
  const PlaneH mirror = PlaneH::through_point(Vec3(0.02, -0.03, 1.0).normalized(), Point3(95, 70, -200));
  const PluckerLine beam = PluckerLine::from_point_direction(Point3(95, 70, -200), Vec3(0.4, 0.1, -0.9).normalized());
  const auto T = to_min(sim::look_at(Point3(-40, 80, -600), Point3(95, 70, 0)));
  const Intrinsics K{3500.0, 3500.0, 1920.0, 1374.0, 3840, 2748};
  const auto pm = to_min(mirror);
  const auto lm = to_min(beam);
  for (auto _ : state) benchmark::DoNotOptimize(reflected_dot(pm, lm, T, K));
}
BENCHMARK(BM_ReflectedDot);

void BM_ReconstructBeams(benchmark::State& state) {
  const auto s = sim::simulate(scan_only(12));
  for (auto _ : state) benchmark::DoNotOptimize(reconstruct_beams(s.data.captures, s.data.scene));
}
BENCHMARK(BM_ReconstructBeams)->Unit(benchmark::kMillisecond);

void BM_EstimatePoses(benchmark::State& state) {
  const auto s = sim::simulate(scan_only(static_cast<int>(state.range(0))));
  const auto beams = reconstruct_beams(s.data.captures, s.data.scene);
  PoseEstimationOptions opt;
  opt.covariance = false;
  for (auto _ : state) benchmark::DoNotOptimize(estimate_poses(s.data, beams, opt));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_EstimatePoses)->Arg(24)->Arg(96)->Unit(benchmark::kMillisecond);

void BM_FitLinearHall(benchmark::State& state) {
  HallSeries h;
  for (int i = 0; i <= 4000; ++i) {
    const double t = 1e-3 * i;
    h.t.push_back(t);
    h.B.push_back(Vec3(std::sin(2 * kPi * 7 * t), std::sin(2 * kPi * 31 * t), std::cos(2 * kPi * 7 * t)));
  }
  std::vector<PoseSample> poses;
  for (double t = 0.3; t < 3.7; t += 0.02) {
    const Vec3 b = interpolate(h, t + 0.004);
    poses.push_back({t, Vec3(2 * b.y(), 8 * b.x(), b.x() * b.x())});
  }
  for (auto _ : state) benchmark::DoNotOptimize(fit_linear(poses, h));
}
BENCHMARK(BM_FitLinearHall)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

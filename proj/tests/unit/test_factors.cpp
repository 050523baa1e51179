#include <random>

#include <gtest/gtest.h>

#include "msmcalib/factors.hpp"
#include "test_support.hpp"

using namespace msm;
using namespace msm::testing;

namespace {

const Intrinsics kK{3500.0, 3500.0, 1920.0, 1374.0, 3840, 2748};

struct Rig {
  PlaneH mirror = PlaneH::through_point(Vec3(0.02, -0.03, 1.0).normalized(), Point3(95, 70, -200));
  PluckerLine beam;
  RigidTransformMin T_C2W;
  RigidTransformMin T_C1W;
  RigidTransformMin T_C1S;

  Rig() {
    const Vec3 v = -(std::cos(0.44) * mirror.n + std::sin(0.44) * mirror.n.unitOrthogonal());
    beam = PluckerLine::from_point_direction(Point3(95, 70, -200), v);
    T_C2W = to_min(sim::look_at(Point3(-40, 80, -600), Point3(95, 70, 0)));
    T_C1W = to_min(sim::look_at(Point3(260, 60, -560), Point3(95, 70, -80)));
    RigidTransform T_WS{Mat3::Identity(), Point3(15, -10, -150)};
    T_C1S = to_min(from_min(T_C1W) * T_WS);
  }
};

std::vector<std::vector<double>> pack(const Rig& s) {
  const auto pm = to_min(s.mirror).p;
  const auto lm = to_vector(to_min(s.beam));
  const auto c2 = to_vector(s.T_C2W);
  return {{pm.x(), pm.y(), pm.z()}, {lm(0), lm(1), lm(2), lm(3)}, {c2.data(), c2.data() + 6}};
}

}  // namespace

TEST(ReflectedPoint, MatchesRayTraceOracle) {
  const Rig s;
  const Point3 X = reflected_point(s.mirror, s.beam);
  const Point3 foot = s.beam.foot();
  const Point3 Y = raytrace_dot(foot, s.beam.v, s.mirror.n, s.mirror.d, Vec3::UnitZ(), 0.0);
  EXPECT_LT((X - Y).norm(), 1e-9);
  EXPECT_NEAR(X.z(), 0.0, 1e-9);
}

TEST(ReflectedDot, ProjectsTheReflectedPoint) {
  const Rig s;
  const ReflectedDot rd = reflected_dot(to_min(s.mirror), to_min(s.beam), s.T_C2W, kK);
  const Point3 X = reflected_point(s.mirror, s.beam);
  EXPECT_LT((rd.P - X).norm(), 1e-8);
  const RigidTransform T = from_min(s.T_C2W);
  EXPECT_LT((rd.uv - pinhole(T.R, T.t, kK.fx, kK.fy, kK.cx, kK.cy, X)).norm(), 1e-6);
}

TEST(ReflectionFactor, ZeroResidualAtTruthAndWhitening) {
  const Rig s;
  const auto params = pack(s);
  const ReflectedDot rd = reflected_dot(to_min(s.mirror), to_min(s.beam), s.T_C2W, kK);
  ImagePoint obs{rd.uv, 0.25 * Mat2::Identity()};
  ReflectionFactor f(obs, kK, 0, 1, 2);
  std::vector<const double*> ptr;
  for (const auto& p : params) ptr.push_back(p.data());
  Eigen::VectorXd r(2);
  EXPECT_TRUE(f.evaluate(ptr, r, nullptr));
  EXPECT_LT(r.norm(), 1e-8);

  obs.uv += Vec2(1.0, 0.0);
  ReflectionFactor g(obs, kK, 0, 1, 2);
  g.evaluate(ptr, r, nullptr);
  // 1 px offset at sigma 0.5 px whitens to 2
  EXPECT_NEAR(r.norm(), 2.0, 1e-7);
}

TEST(ReflectionFactor, JacobiansMatchCentralDifferences) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 0.02);
  for (int trial = 0; trial < 20; ++trial) {
    Rig s;
    s.mirror = PlaneH::through_point((s.mirror.n + Vec3(g(rng), g(rng), 0.0)).normalized(), Point3(95, 70, -200));
    const auto params = pack(s);
    ReflectionFactor f({Vec2(1900, 1400), Mat2::Identity()}, kK, 0, 1, 2);
    const auto J = analytic_jacobians(f, params);
    for (std::size_t b = 0; b < 3; ++b) {
      const Eigen::MatrixXd fd = numeric_jacobian(f, params, b);
      EXPECT_LT(relative_error(J[b], fd), 1e-5) << "block " << b;
    }
  }
}

TEST(SlidingDot, LiesOnTheBeamAndTheBoard) {
  const Rig s;
  const SlidingDot sd = sliding_dot(to_min(s.beam), s.T_C1W, s.T_C1S, kK);
  EXPECT_LT(s.beam.distance(sd.P), 1e-8);
  EXPECT_NEAR(sliding_plane_in_world(s.T_C1W, s.T_C1S).signed_distance(sd.P), 0.0, 1e-8);
  EXPECT_LT((sd.uv - project(s.T_C1W, kK, sd.P)).norm(), 1e-8);
}

TEST(SlidingDotFactor, JacobiansMatchCentralDifferences) {
  const Rig s;
  const auto lm = to_vector(to_min(s.beam));
  const auto c1 = to_vector(s.T_C1W);
  const auto bs = to_vector(s.T_C1S);
  const std::vector<std::vector<double>> params{
      {lm(0), lm(1), lm(2), lm(3)}, {c1.data(), c1.data() + 6}, {bs.data(), bs.data() + 6}};
  SlidingDotFactor f({Vec2(1800, 1300), Mat2::Identity()}, kK, 0, 1, 2);
  const auto J = analytic_jacobians(f, params);
  for (std::size_t b = 0; b < 3; ++b) EXPECT_LT(relative_error(J[b], numeric_jacobian(f, params, b)), 1e-5);
}

TEST(CornerFactor, JacobianMatchesCentralDifferences) {
  const Rig s;
  const auto c1 = to_vector(s.T_C1W);
  const std::vector<std::vector<double>> params{{c1.data(), c1.data() + 6}};
  CornerFactor f({Vec2(1000, 900), 0.25 * Mat2::Identity()}, Point3(40, 30, 0), kK, 0);
  const auto J = analytic_jacobians(f, params);
  EXPECT_LT(relative_error(J[0], numeric_jacobian(f, params, 0)), 1e-5);
}

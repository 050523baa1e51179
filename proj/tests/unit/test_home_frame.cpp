#include <random>

#include <gtest/gtest.h>

#include "msmcalib/error.hpp"
#include "msmcalib/home_frame.hpp"
#include "msmcalib/pipeline.hpp"
#include "test_support.hpp"

using namespace msm;

namespace {

Vec3 fan_normal(double alpha_deg) {
  const double a = deg2rad(alpha_deg);
  return {0.0, std::sin(a), std::cos(a)};
}

}  // namespace

TEST(FastAxis, PlanarFanGivesTheXAxis) {
  const std::vector<Vec3> n{fan_normal(-2), fan_normal(0), fan_normal(2)};
  double res = 1.0;
  const Vec3 e = estimate_fast_axis(n, &res);
  EXPECT_LT((e - Vec3::UnitX()).norm(), 1e-12);
  EXPECT_LT(res, 1e-12);
}

TEST(FastAxis, RepeatedNormalIsRankDeficient) {
  const std::vector<Vec3> n{fan_normal(1), fan_normal(1), fan_normal(1)};
  try {
    estimate_fast_axis(n);
    FAIL();
  } catch (const CalibError& e) {
    EXPECT_EQ(e.code(), ErrorCode::RankDeficient);
  }
}

TEST(FastAxis, NoisyFanStaysAccurate) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, deg2rad(0.01));
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vec3> n;
    for (int k = 0; k < 200; ++k) {
      const Vec3 x = fan_normal(-2.0 + 4.0 * k / 199.0);
      n.push_back(so3::exp(Vec3(g(rng), g(rng), g(rng))) * x);
    }
    const Vec3 e = estimate_fast_axis(n);
    // the in-plane component is what the home frame keeps
    const Vec3 p = (e - e.z() * Vec3::UnitZ()).normalized();
    worst = std::max(worst, rad2deg(angle_between(p, Vec3::UnitX())));
  }
  // expected spread: noise over the rms fan angle and the sample count
  const double predicted = rad2deg(0.01 / ((4.0 / std::sqrt(12.0)) * std::sqrt(200.0)));
  EXPECT_LT(worst, 4.0 * predicted);
}

TEST(Origin, ThreeAxisPlanesIntersectAtOnePoint) {
  const std::vector<PlaneH> p{PlaneH::from_coeffs(Vec4(1, 0, 0, -1)), PlaneH::from_coeffs(Vec4(0, 1, 0, -1)),
                              PlaneH::from_coeffs(Vec4(0, 0, 1, -1))};
  const OriginEstimate o = estimate_origin(p);
  EXPECT_LT((o.X - Point3(1, 1, 1)).norm(), 1e-12);
  EXPECT_FALSE(o.ambiguous_along_axis);
  EXPECT_LT(o.rms_mm, 1e-12);
}

TEST(Origin, PencilIsFlaggedOrRejected) {
  std::vector<PlaneH> p;
  for (double a : {0.0, 20.0, 45.0, 70.0}) {
    const double r = deg2rad(a);
    p.push_back(PlaneH::through_point(Vec3(0, std::sin(r), std::cos(r)), Point3(0, 2, 3)));
  }
  const OriginEstimate o = estimate_origin(p);
  EXPECT_TRUE(o.ambiguous_along_axis);
  // minimum-norm point on the axis x = t, y = 2, z = 3
  EXPECT_LT((o.X - Point3(0, 2, 3)).norm(), 1e-9);
  try {
    estimate_origin(p, nullptr, PencilPolicy::Error);
    FAIL();
  } catch (const CalibError& e) {
    EXPECT_EQ(e.code(), ErrorCode::PencilDegenerate);
  }
  EXPECT_THROW(estimate_origin(std::vector<PlaneH>(p.begin(), p.begin() + 2)), CalibError);
}

TEST(Origin, HomePlaneConstraintMatchesLagrangeSolution) {
  const HomeFrame truth = make_home_frame(Vec3(0.02, -0.03, 1), Vec3(1, 0.05, 0), Point3(95, 70, -200));
  const PlaneH home = from_home_pose({}, truth);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<PlaneH> rigid, lifted;
  for (int k = 0; k < 200; ++k) {
    const double a = 2.18 * u(rng), s2 = u(rng);
    rigid.push_back(from_home_pose({a, 8.58 * s2, 0.0}, truth));
    lifted.push_back(from_home_pose({a, 8.58 * s2, 1.04 * s2 * s2}, truth));
  }
  EXPECT_LT((estimate_origin(rigid, &home).X - truth.X_O).norm(), 1e-9);

  // minimize sum (n.X + d)^2 subject to the home plane, via the KKT system
  Eigen::Matrix4d K = Eigen::Matrix4d::Zero();
  Vec4 rhs = Vec4::Zero();
  for (const auto& p : lifted) {
    K.topLeftCorner<3, 3>() += p.n * p.n.transpose();
    rhs.head<3>() -= p.d * p.n;
  }
  K.block<3, 1>(0, 3) = home.n;
  K.block<1, 3>(3, 0) = home.n.transpose();
  rhs(3) = -home.d;
  const Vec4 sol = K.fullPivLu().solve(rhs);

  const OriginEstimate o = estimate_origin(lifted, &home);
  EXPECT_LT((o.X - sol.head<3>()).norm(), 1e-8);
  EXPECT_NEAR(home.signed_distance(o.X), 0.0, 1e-9);
  EXPECT_GT(o.spread_mm, 0.5);
}

TEST(HomePose, RoundTripsThroughTheFrame) {
  const HomeFrame f = make_home_frame(Vec3(0.02, -0.03, 1), Vec3(1, 0.05, 0), Point3(95, 70, -200));
  EXPECT_LT((f.R0.transpose() * f.R0 - Mat3::Identity()).norm(), 1e-12);
  EXPECT_NEAR(f.R0.determinant(), 1.0, 1e-12);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const HomePose p{3.0 * u(rng), 9.0 * u(rng), 1.2 * u(rng)};
    const HomePose q = to_home_frame(from_home_pose(p, f), f);
    EXPECT_LT((q.vector() - p.vector()).norm(), 1e-9);
  }
  EXPECT_LT(to_home_frame(from_home_pose({}, f), f).vector().norm(), 1e-12);
}

TEST(HomePose, PureRotationsAndTranslation) {
  const HomeFrame f = make_home_frame(Vec3::UnitZ(), Vec3::UnitX(), Point3::Zero());
  // fast rotation about X tilts the normal toward -Y
  const double a = deg2rad(5.0);
  const PlaneH fast = PlaneH::through_point(Vec3(0, -std::sin(a), std::cos(a)), Point3::Zero());
  EXPECT_LT((to_home_frame(fast, f).vector() - Vec3(5, 0, 0)).norm(), 1e-9);
  const PlaneH lifted = PlaneH::through_point(Vec3::UnitZ(), Point3(0, 0, 0.5));
  EXPECT_LT((to_home_frame(lifted, f).vector() - Vec3(0, 0, 0.5)).norm(), 1e-12);
  const PlaneH flipped = lifted.flipped();
  EXPECT_LT((to_home_frame(flipped, f).vector() - Vec3(0, 0, 0.5)).norm(), 1e-12);
}

TEST(EstimateFrame, RequiresFastScanPoses) {
  PosesFile pf;
  for (int k = 0; k < 5; ++k) pf.poses.push_back({k, 0.1 * k, FrameTag::Full, PlaneH{fan_normal(k), 1.0}});
  try {
    estimate_frame(pf);
    FAIL();
  } catch (const CalibError& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientData);
  }
}

TEST(EstimateFrame, TruthPlanesGiveTheTrueFrame) {
  sim::SimConfig cfg;
  cfg.hall.enabled = false;
  cfg.scan.max_pulses = 40;
  cfg.scan.duration_s = 4.0;
  cfg.scan.fast_cycles = 2;
  const auto s = sim::simulate(cfg);
  PosesFile pf;
  for (const auto& p : s.truth.pulses) pf.poses.push_back({p.id, p.t, p.tag, p.plane});
  const FrameFile f = estimate_frame(pf);
  EXPECT_LT(rad2deg(axis_angle_between(f.frame.R0.col(0), s.truth.frame.R0.col(0))), 1e-9);
  EXPECT_LT(rad2deg(axis_angle_between(f.frame.R0.col(2), s.truth.frame.R0.col(2))), 1e-9);
  EXPECT_LT((f.frame.X_O - s.truth.frame.X_O).norm(), 0.2);
  ASSERT_EQ(f.poses.size(), s.truth.pulses.size());
  for (std::size_t k = 0; k < f.poses.size(); ++k) {
    if (f.poses[k].tag != FrameTag::Full) continue;
    EXPECT_LT(std::abs(f.poses[k].pose.alpha_deg - s.truth.pulses[k].pose.alpha_deg), 0.01);
    EXPECT_LT(std::abs(f.poses[k].pose.beta_deg - s.truth.pulses[k].pose.beta_deg), 0.01);
  }
}

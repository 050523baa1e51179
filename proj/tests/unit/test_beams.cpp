#include <random>

#include <gtest/gtest.h>

#include "msmcalib/beams.hpp"
#include "msmcalib/error.hpp"
#include "test_support.hpp"

using namespace msm;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const CalibError& e) {
    return e.code();
  }
  ADD_FAILURE() << "no CalibError thrown";
  return ErrorCode::Validation;
}

}  // namespace

TEST(LineFit, CollinearPointsGiveTheExactLine) {
  const Point3 a(1, 2, 3);
  const Vec3 v = Vec3(1, -2, 2).normalized();
  std::vector<Point3> pts;
  for (int i = 0; i < 6; ++i) pts.push_back(a + 10.0 * i * v);
  const LineFit fit = fit_line_pca(pts);
  EXPECT_LT((fit.line.v - v).norm(), 1e-12);
  EXPECT_LT(fit.line.distance(a), 1e-10);
  EXPECT_LT(fit.rms, 1e-10);
}

TEST(LineFit, DirectionFollowsOrderOrHint) {
  std::vector<Point3> pts{Point3(0, 0, 0), Point3(0, 0, 1), Point3(0, 0, 2)};
  EXPECT_GT(fit_line_pca(pts).line.v.z(), 0.0);
  std::reverse(pts.begin(), pts.end());
  EXPECT_LT(fit_line_pca(pts).line.v.z(), 0.0);
  const Vec3 up = Vec3::UnitZ();
  EXPECT_GT(fit_line_pca(pts, &up).line.v.z(), 0.0);
}

TEST(LineFit, NoisyFitMatchesCentroidAndPrincipalAxis) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 0.05);
  std::vector<Point3> pts;
  for (int i = 0; i < 50; ++i) pts.emplace_back(3.0 * i + g(rng), 1.0 * i + g(rng), -2.0 * i + g(rng));
  Point3 c = Point3::Zero();
  for (const auto& p : pts) c += p;
  c /= 50.0;
  const LineFit fit = fit_line_pca(pts);
  EXPECT_LT(fit.line.distance(c), 1e-9);
  EXPECT_LT(rad2deg(axis_angle_between(fit.line.v, Vec3(3, 1, -2).normalized())), 0.05);
  EXPECT_GT(fit.rms, 0.0);
  EXPECT_LT(fit.rms, 0.1);
}

TEST(LineFit, Degeneracies) {
  const std::vector<Point3> one{Point3(1, 1, 1)};
  EXPECT_EQ(code_of([&] { fit_line_pca(one); }), ErrorCode::TooFewPoints);
  const std::vector<Point3> same{Point3(1, 1, 1), Point3(1, 1, 1)};
  EXPECT_EQ(code_of([&] { fit_line_pca(same); }), ErrorCode::TooFewPoints);
  const std::vector<Point3> blob{Point3(0, 0, 0), Point3(1, 0, 0), Point3(0, 1, 0), Point3(1, 1, 0)};
  EXPECT_EQ(code_of([&] { fit_line_pca(blob); }), ErrorCode::DegenerateLine);
}

TEST(LightPath, NormalIsPerpendicularToBeamAndDot) {
  const PluckerLine L = PluckerLine::from_point_direction(Point3(0, 0, 10), Vec3(0, 0, -1));
  const Point3 X(5, 0, 0);
  const Vec3 n = lightpath_normal(L, X);
  EXPECT_NEAR(n.norm(), 1.0, 1e-15);
  EXPECT_NEAR(n.dot(L.v), 0.0, 1e-15);
  EXPECT_NEAR(n.dot(X - L.foot()), 0.0, 1e-12);
  EXPECT_LT((n - Vec3::UnitY()).norm(), 1e-12);
  EXPECT_EQ(code_of([&] { lightpath_normal(L, Point3(0, 0, 3)); }), ErrorCode::PointOnLine);
}

TEST(ReconstructBeams, RecoversSimulatedBeams) {
  auto cfg = msm::testing::scan_config(3, 24, 0.2, 5);
  const auto s = sim::simulate(cfg);
  const BeamReconstruction rec = reconstruct_beams(s.data.captures, s.data.scene);
  ASSERT_EQ(rec.beams.size(), 3u);
  ASSERT_EQ(rec.T_C1S.size(), s.data.captures.size());
  for (const auto& [id, L] : rec.beams) {
    const PluckerLine& T = s.truth.beams.at(id);
    EXPECT_LT(L.v.z(), 0.0);
    EXPECT_LT(rad2deg(angle_between(L.v, T.v)), 0.05) << "beam " << id;
    EXPECT_LT(L.distance(s.truth.frame.X_O), 0.1) << "beam " << id;
    EXPECT_LT(rec.rms_mm.at(id), 0.1);
  }
}

TEST(ReconstructBeams, NoiseFreeIsExact) {
  const auto s = sim::simulate(msm::testing::scan_config(2, 8, 0.0, 5));
  const BeamReconstruction rec = reconstruct_beams(s.data.captures, s.data.scene);
  for (const auto& [id, L] : rec.beams) {
    EXPECT_LT(angle_between(L.v, s.truth.beams.at(id).v), 1e-9);
    EXPECT_LT((L.m - s.truth.beams.at(id).m).norm(), 1e-6);
  }
}

TEST(ReconstructBeams, MissingDotsAreReported) {
  auto s = sim::simulate(msm::testing::scan_config(2, 8, 0.0, 5));
  for (std::size_t k = 1; k < s.data.captures.size(); ++k) {
    auto& dots = s.data.captures[k].dots;
    dots.erase(std::remove_if(dots.begin(), dots.end(), [](const Dot& d) { return d.beam == 1; }), dots.end());
  }
  EXPECT_EQ(code_of([&] { reconstruct_beams(s.data.captures, s.data.scene); }), ErrorCode::InsufficientCaptures);
  std::vector<SlidingCapture> one(s.data.captures.begin(), s.data.captures.begin() + 1);
  EXPECT_EQ(code_of([&] { reconstruct_beams(one, s.data.scene); }), ErrorCode::InsufficientCaptures);
}

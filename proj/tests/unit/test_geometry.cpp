#include <cmath>
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "msmcalib/error.hpp"
#include "msmcalib/geometry.hpp"
#include "test_support.hpp"

using namespace msm;
using msm::testing::parametric_intersect;
using msm::testing::random_unit;

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

TEST(So3, ExpMatchesRodriguesFormula) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 200; ++i) {
    const Vec3 w(u(rng), u(rng), u(rng));
    const double th = w.norm();
    const Vec3 k = w / th;
    const Mat3 K = so3::hat(k);
    const Mat3 expected = Mat3::Identity() + std::sin(th) * K + (1.0 - std::cos(th)) * K * K;
    EXPECT_LT((so3::exp(w) - expected).norm(), 1e-12);
    EXPECT_LT((so3::exp(w) - Eigen::AngleAxisd(th, k).toRotationMatrix()).norm(), 1e-12);
  }
}

TEST(So3, LogInvertsExp) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    const Vec3 w = random_unit(rng) * (3.0 * (i + 1) / 201.0);
    EXPECT_LT((so3::log(so3::exp(w)) - w).norm(), 1e-9);
  }
  EXPECT_LT(so3::log(Mat3::Identity()).norm(), 1e-15);
}

TEST(So3, LogNearPiThrows) {
  const Mat3 R = Eigen::AngleAxisd(kPi - 1e-8, Vec3::UnitY()).toRotationMatrix();
  EXPECT_EQ(code_of([&] { so3::log(R); }), ErrorCode::NearBranchCut);
}

TEST(So3, LeftJacobianMatchesFiniteDifference) {
  const Vec3 w(0.3, -0.7, 0.4);
  const Mat3 J = so3::left_jacobian(w);
  const double h = 1e-7;
  for (int k = 0; k < 3; ++k) {
    Vec3 dw = Vec3::Zero();
    dw(k) = h;
    // exp(w + dw) exp(w)^T = exp(J dw)
    const Vec3 phi = so3::log(so3::exp(w + dw) * so3::exp(w).transpose());
    EXPECT_LT((phi / h - J.col(k)).norm(), 1e-6);
  }
}

TEST(Plane, SignedDistanceAndFlip) {
  const PlaneH p = PlaneH::through_point(Vec3(0, 0, 2), Point3(1, 2, 3));
  EXPECT_NEAR(p.d, -3.0, 1e-15);
  EXPECT_NEAR(p.signed_distance(Point3(5, 5, 4)), 1.0, 1e-15);
  EXPECT_NEAR(p.flipped().signed_distance(Point3(5, 5, 4)), -1.0, 1e-15);
  const PlaneH q = PlaneH::from_coeffs(Vec4(0, 0, 4, -8));
  EXPECT_NEAR(q.n.norm(), 1.0, 1e-15);
  EXPECT_NEAR(q.d, -2.0, 1e-15);
}

TEST(Plane, MinimalRoundTrip) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-500.0, 500.0);
  for (int i = 0; i < 500; ++i) {
    const PlaneH p{random_unit(rng), u(rng)};
    const PlaneMin m = to_min(p);
    EXPECT_LE(m.p.norm(), kPi + 1e-12);
    const PlaneH q = from_min(m);
    const double s = q.d * p.d >= 0.0 ? 1.0 : -1.0;
    EXPECT_LT((s * q.coeffs() - p.coeffs()).norm(), 1e-9 * (1.0 + std::abs(p.d)));
  }
}

TEST(Plane, MinimalJacobianMatchesFiniteDifference) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 50; ++i) {
    const PlaneMin m = to_min(PlaneH{random_unit(rng), 10.0 * (i - 25)});
    const auto J = plane_from_min_jacobian(m);
    for (int k = 0; k < 3; ++k) {
      PlaneMin a = m, b = m;
      a.p(k) += 1e-6;
      b.p(k) -= 1e-6;
      const Vec4 fd = (from_min(a).coeffs() - from_min(b).coeffs()) / 2e-6;
      EXPECT_LT((fd - J.col(k)).norm(), 1e-5 * std::max(1.0, fd.norm()));
    }
  }
}

TEST(Line, PluckerInvariants) {
  const PluckerLine L = PluckerLine::through(Point3(1, 0, 0), Point3(1, 2, 0));
  EXPECT_NEAR(L.v.dot(L.m), 0.0, 1e-15);
  EXPECT_LT((L.v - Vec3::UnitY()).norm(), 1e-15);
  EXPECT_LT((L.foot() - Point3(1, 0, 0)).norm(), 1e-15);
  EXPECT_NEAR(L.distance(Point3(4, 7, 4)), 5.0, 1e-12);
}

TEST(Line, MinimalRoundTripAndJacobian) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const Point3 p = 100.0 * random_unit(rng) + Vec3(0, 0, 1);
    const PluckerLine L = PluckerLine::from_point_direction(p, random_unit(rng));
    if (L.m.norm() < 1e-3) continue;
    const LineMin m = to_min(L);
    const PluckerLine R = from_min(m);
    EXPECT_LT((R.v - L.v).norm(), 1e-12);
    EXPECT_LT((R.m - L.m).norm(), 1e-9);

    const auto J = line_from_min_jacobian(m);
    for (int k = 0; k < 4; ++k) {
      Eigen::Vector4d x = to_vector(m), a = x, b = x;
      a(k) += 1e-6;
      b(k) -= 1e-6;
      const PluckerLine La = from_min(line_min_from(a.data()));
      const PluckerLine Lb = from_min(line_min_from(b.data()));
      Eigen::Matrix<double, 6, 1> fd;
      fd << (La.v - Lb.v) / 2e-6, (La.m - Lb.m) / 2e-6;
      EXPECT_LT((fd - J.col(k)).norm(), 1e-5 * std::max(1.0, fd.norm()));
    }
  }
}

TEST(Line, ThroughOriginHasNoMinimalForm) {
  const PluckerLine L = PluckerLine::from_point_direction(Point3::Zero(), Vec3(1, 1, 0));
  EXPECT_EQ(code_of([&] { to_min(L); }), ErrorCode::DegenerateLine);
}

TEST(Reflection, IsAnInvolutionAndFixesThePlane) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int i = 0; i < 300; ++i) {
    const PlaneH p{random_unit(rng), u(rng)};
    const ReflectionH H = reflection_matrix(p);
    EXPECT_LT((H.H * H.H - Mat4::Identity()).norm(), 1e-10);
    EXPECT_NEAR(H.linear().determinant(), -1.0, 1e-12);
    const Point3 on = -p.d * p.n + 7.0 * p.n.unitOrthogonal();
    EXPECT_LT((H.apply(on) - on).norm(), 1e-10);
    const Point3 x(u(rng), u(rng), u(rng));
    EXPECT_NEAR(p.signed_distance(reflect_point(p, x)), -p.signed_distance(x), 1e-10);
    EXPECT_LT((reflect_point(p, x) - H.apply(x)).norm(), 1e-10);
  }
}

TEST(Intersect, MatchesParametricOracle) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  int checked = 0;
  for (int i = 0; i < 1000; ++i) {
    const Point3 P0(u(rng), u(rng), u(rng));
    const Vec3 v = random_unit(rng);
    const PlaneH pl{random_unit(rng), u(rng)};
    if (std::abs(v.dot(pl.n)) < 0.05) continue;
    const Point3 X = line_plane_intersect(PluckerLine::from_point_direction(P0, v), pl);
    EXPECT_LT((X - parametric_intersect(P0, v, pl.n, pl.d)).norm(), 1e-9);
    ++checked;
  }
  EXPECT_GT(checked, 900);
}

TEST(Intersect, ParallelLineThrows) {
  const PluckerLine L = PluckerLine::from_point_direction(Point3(0, 0, 5), Vec3(1, 0, 0));
  EXPECT_EQ(code_of([&] { line_plane_intersect(L, PlaneH{Vec3::UnitZ(), 0.0}); }), ErrorCode::ParallelLinePlane);
}

TEST(Reflection, ReflectedLineFollowsTheMirroredRay) {
  const PlaneH mirror = PlaneH::through_point(Vec3(0, 0, 1), Point3(0, 0, 0));
  const PluckerLine L = PluckerLine::from_point_direction(Point3(-1, 0, 1), Vec3(1, 0, -1));
  const PluckerLine R = reflect_line(L, reflection_matrix(mirror));
  EXPECT_LT((R.v - Vec3(1, 0, 1).normalized()).norm(), 1e-12);
  EXPECT_LT(R.distance(Point3(0, 0, 0)), 1e-12);
  EXPECT_LT(R.distance(Point3(2, 0, 2)), 1e-12);
}

TEST(RigidTransform, PlaneAndLineTransformsAgreeWithPoints) {
  std::mt19937_64 rng(8);
  const RigidTransform T{so3::exp(Vec3(0.2, -0.4, 0.9)), Vec3(10, -3, 40)};
  const PlaneH p = PlaneH::through_point(random_unit(rng), Point3(1, 2, 3));
  const PlaneH q = T.transform_plane(p);
  const Point3 x = Point3(1, 2, 3) + 5.0 * p.n.unitOrthogonal();
  EXPECT_NEAR(q.signed_distance(T.apply(x)), 0.0, 1e-10);
  EXPECT_NEAR(q.signed_distance(T.apply(x + 2.0 * p.n)), 2.0, 1e-10);

  const PluckerLine L = PluckerLine::through(Point3(1, 0, 3), Point3(4, 5, 6));
  const PluckerLine M = T.transform_line(L);
  EXPECT_LT(M.distance(T.apply(Point3(1, 0, 3))), 1e-10);
  EXPECT_LT(M.distance(T.apply(Point3(4, 5, 6))), 1e-10);

  const RigidTransform I = T * T.inverse();
  EXPECT_LT((I.matrix() - Mat4::Identity()).norm(), 1e-12);
  const RigidTransform back = from_min(to_min(T));
  EXPECT_LT((back.matrix() - T.matrix()).norm(), 1e-12);
}

TEST(Angles, BetweenVectorsAndAxes) {
  EXPECT_NEAR(angle_between(Vec3::UnitX(), -Vec3::UnitX()), kPi, 1e-12);
  EXPECT_NEAR(axis_angle_between(Vec3::UnitX(), -Vec3::UnitX()), 0.0, 1e-12);
  EXPECT_NEAR(rad2deg(angle_between(Vec3(1, 0, 0), Vec3(1, 1, 0))), 45.0, 1e-12);
  // small angles stay accurate where acos would lose digits
  EXPECT_NEAR(angle_between(Vec3(1, 0, 0), Vec3(1, 1e-9, 0)), 1e-9, 1e-18);
}

#include "msmcalib/geometry.hpp"

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "msmcalib/error.hpp"

namespace msm {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ParallelLinePlane: return "ParallelLinePlane";
    case ErrorCode::NearBranchCut: return "NearBranchCut";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::DegenerateConfig: return "DegenerateConfig";
    case ErrorCode::RayParallelToPlane: return "RayParallelToPlane";
    case ErrorCode::EmptyBlob: return "EmptyBlob";
    case ErrorCode::DegenerateLine: return "DegenerateLine";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::InsufficientCaptures: return "InsufficientCaptures";
    case ErrorCode::PointOnLine: return "PointOnLine";
    case ErrorCode::DegenerateSpanningAngle: return "DegenerateSpanningAngle";
    case ErrorCode::Retroreflection: return "Retroreflection";
    case ErrorCode::SkewLines: return "SkewLines";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::SingularNormalEquations: return "SingularNormalEquations";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::PencilDegenerate: return "PencilDegenerate";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::RankDeficientRegressors: return "RankDeficientRegressors";
    case ErrorCode::FrequencyEstimationFailed: return "FrequencyEstimationFailed";
    case ErrorCode::NoPulses: return "NoPulses";
    case ErrorCode::DotOffBoard: return "DotOffBoard";
    case ErrorCode::Validation: return "Validation";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Validation:
    case ErrorCode::InsufficientCaptures:
    case ErrorCode::InsufficientData:
    case ErrorCode::TooFewPoints:
    case ErrorCode::OutOfRange:
    case ErrorCode::NoOverlap:
    case ErrorCode::NoPulses:
      return true;
    default:
      return false;
  }
}

namespace so3 {

Mat3 hat(const Vec3& w) {
  Mat3 W;
  W << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return W;
}

Mat3 exp(const Vec3& w) {
  const double theta2 = w.squaredNorm();
  const Mat3 W = hat(w);
  double a, b;
  if (theta2 < 1e-10) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    const double theta = std::sqrt(theta2);
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return Mat3::Identity() + a * W + b * W * W;
}

Vec3 log(const Mat3& R) {
  const Vec3 vee(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  const double s = 0.5 * vee.norm();
  const double c = 0.5 * (R.trace() - 1.0);
  const double theta = std::atan2(s, c);
  if (kPi - theta < kBranchCutTol) {
    throw CalibError(ErrorCode::NearBranchCut,
                     "rotation angle " + std::to_string(theta) + " rad is at the log-map branch cut");
  }
  if (theta < 1e-5) return 0.5 * (1.0 + theta * theta / 6.0) * vee;
  return theta / (2.0 * std::sin(theta)) * vee;
}

Mat3 left_jacobian(const Vec3& w) {
  const double theta2 = w.squaredNorm();
  const Mat3 W = hat(w);
  double a, b;
  if (theta2 < 1e-10) {
    a = 0.5 - theta2 / 24.0;
    b = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    const double theta = std::sqrt(theta2);
    a = (1.0 - std::cos(theta)) / theta2;
    b = (theta - std::sin(theta)) / (theta2 * theta);
  }
  return Mat3::Identity() + a * W + b * W * W;
}

}  // namespace so3

PlaneH PlaneH::from_coeffs(const Vec4& pi) {
  const double s = pi.head<3>().norm();
  return {pi.head<3>() / s, pi(3) / s};
}

PlaneH PlaneH::through_point(const Vec3& normal, const Point3& p) {
  const Vec3 n = normal.normalized();
  return {n, -n.dot(p)};
}

PlaneH PlaneH::canonical() const {
  for (int k = 0; k < 3; ++k) {
    if (std::abs(n(k)) > 1e-15) return n(k) > 0.0 ? *this : flipped();
  }
  return *this;
}

PluckerLine PluckerLine::from_point_direction(const Point3& p, const Vec3& direction) {
  const Vec3 v = direction.normalized();
  return {v, p.cross(v)};
}

Mat4 RigidTransform::matrix() const {
  Mat4 M = Mat4::Identity();
  M.topLeftCorner<3, 3>() = R;
  M.topRightCorner<3, 1>() = t;
  return M;
}

PlaneH RigidTransform::transform_plane(const PlaneH& plane) const {
  const Vec3 n = R * plane.n;
  return {n, plane.d - n.dot(t)};
}

PluckerLine RigidTransform::transform_line(const PluckerLine& line) const {
  return PluckerLine::from_point_direction(apply(line.foot()), R * line.v);
}

Point3 reflect_point(const PlaneH& plane, const Point3& p) {
  return p - 2.0 * plane.signed_distance(p) * plane.n;
}

ReflectionH reflection_matrix(const PlaneH& plane) {
  ReflectionH out;
  out.H.topLeftCorner<3, 3>() = Mat3::Identity() - 2.0 * plane.n * plane.n.transpose();
  out.H.topRightCorner<3, 1>() = -2.0 * plane.d * plane.n;
  return out;
}

Point3 line_plane_intersect(const PluckerLine& line, const PlaneH& plane) {
  if (std::abs(line.v.dot(plane.n)) < kParallelTol) {
    throw CalibError(ErrorCode::ParallelLinePlane, "line is parallel to the plane");
  }
  Eigen::Matrix<double, 4, 3> A;
  A.topRows<3>() = so3::hat(line.v);
  A.row(3) = plane.n.transpose();
  Vec4 b;
  b.head<3>() = -line.m;
  b(3) = -plane.d;
  return A.colPivHouseholderQr().solve(b);
}

PluckerLine reflect_line(const PluckerLine& line, const ReflectionH& H) {
  const Vec3 v = H.linear() * line.v;
  return PluckerLine::from_point_direction(H.apply(line.foot()), v);
}

RigidTransformMin to_min(const RigidTransform& T) { return {so3::log(T.R), T.t}; }

RigidTransform from_min(const RigidTransformMin& T) { return {so3::exp(T.w), T.t}; }

PlaneMin to_min(const PlaneH& plane) {
  const PlaneH p = plane.d < 0.0 ? plane.flipped() : plane;
  const double theta = 2.0 * std::atan2(1.0, p.d);
  return {theta * p.n};
}

PlaneH from_min(const PlaneMin& plane) {
  const double theta = plane.p.norm();
  if (theta < 1e-300) {
    throw CalibError(ErrorCode::NearBranchCut, "zero plane parameter encodes the plane at infinity");
  }
  return {plane.p / theta, 1.0 / std::tan(0.5 * theta)};
}

LineMin to_min(const PluckerLine& line) {
  const double mag = line.m.norm();
  if (mag < 1e-12) {
    throw CalibError(ErrorCode::DegenerateLine, "line through the origin has no moment direction");
  }
  const Vec3 v = line.v.normalized();
  const Vec3 mhat = (line.m - v.dot(line.m) * v).normalized();
  Mat3 R;
  R.col(0) = v;
  R.col(1) = mhat;
  R.col(2) = v.cross(mhat);
  return {so3::log(R), mag};
}

PluckerLine from_min(const LineMin& line) {
  const Mat3 R = so3::exp(line.w);
  return {R.col(0), line.m * R.col(1)};
}

Eigen::Matrix<double, 4, 3> plane_from_min_jacobian(const PlaneMin& plane) {
  const double theta = plane.p.norm();
  const Vec3 n = plane.p / theta;
  const double s = std::sin(0.5 * theta);
  Eigen::Matrix<double, 4, 3> J;
  J.topRows<3>() = (Mat3::Identity() - n * n.transpose()) / theta;
  J.row(3) = -0.5 / (s * s) * n.transpose();
  return J;
}

Eigen::Matrix<double, 6, 4> line_from_min_jacobian(const LineMin& line) {
  const Mat3 R = so3::exp(line.w);
  const Mat3 Jl = so3::left_jacobian(line.w);
  Eigen::Matrix<double, 6, 4> J = Eigen::Matrix<double, 6, 4>::Zero();
  J.block<3, 3>(0, 0) = -so3::hat(R.col(0)) * Jl;
  J.block<3, 3>(3, 0) = -line.m * so3::hat(R.col(1)) * Jl;
  J.block<3, 1>(3, 3) = R.col(1);
  return J;
}

Eigen::Matrix<double, 6, 1> to_vector(const RigidTransformMin& T) {
  Eigen::Matrix<double, 6, 1> x;
  x << T.w, T.t;
  return x;
}

Eigen::Matrix<double, 4, 1> to_vector(const LineMin& L) {
  Eigen::Matrix<double, 4, 1> x;
  x << L.w, L.m;
  return x;
}

RigidTransformMin transform_min_from(const double* x) {
  return {Vec3(x[0], x[1], x[2]), Vec3(x[3], x[4], x[5])};
}

LineMin line_min_from(const double* x) { return {Vec3(x[0], x[1], x[2]), x[3]}; }

PlaneMin plane_min_from(const double* x) { return {Vec3(x[0], x[1], x[2])}; }

double angle_between(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

double axis_angle_between(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), std::abs(a.dot(b)));
}

}  // namespace msm

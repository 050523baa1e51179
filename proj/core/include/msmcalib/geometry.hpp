#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace msm {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Point3 = Eigen::Vector3d;

/// Tolerance below which |v.n| counts as a line parallel to a plane.
inline constexpr double kParallelTol = 1e-9;
/// Rotation angles within this distance of pi are rejected by the log maps.
inline constexpr double kBranchCutTol = 1e-6;

namespace so3 {

Mat3 hat(const Vec3& w);
Mat3 exp(const Vec3& w);
/// Principal-branch logarithm. Throws NearBranchCut when the angle is within kBranchCutTol of pi.
Vec3 log(const Mat3& R);
/// d exp(w + dw) = exp(J_l(w) dw) exp(w) to first order.
Mat3 left_jacobian(const Vec3& w);

}  // namespace so3

/// Plane n.X + d = 0 with unit normal n.
struct PlaneH {
  Vec3 n = Vec3::UnitZ();
  double d = 0.0;

  /// Builds a plane from homogeneous coefficients [a b c e]; the normal is normalized.
  static PlaneH from_coeffs(const Vec4& pi);
  static PlaneH through_point(const Vec3& normal, const Point3& p);

  Vec4 coeffs() const { return {n.x(), n.y(), n.z(), d}; }
  double signed_distance(const Point3& p) const { return n.dot(p) + d; }
  PlaneH flipped() const { return {-n, -d}; }
  /// First nonzero component of n made positive.
  PlaneH canonical() const;
};

/// Plucker line: unit direction v and moment m, with v x X + m = 0 for every point X on the line.
struct PluckerLine {
  Vec3 v = Vec3::UnitZ();
  Vec3 m = Vec3::Zero();

  static PluckerLine from_point_direction(const Point3& p, const Vec3& direction);
  static PluckerLine through(const Point3& a, const Point3& b) { return from_point_direction(a, b - a); }

  /// Point of the line closest to the origin.
  Point3 foot() const { return v.cross(m); }
  Vec3 residual(const Point3& p) const { return v.cross(p) + m; }
  double distance(const Point3& p) const { return residual(p).norm(); }
  Point3 point_at(double s) const { return foot() + s * v; }
};

/// Rotation + translation mapping points X -> R X + t.
struct RigidTransform {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Point3 apply(const Point3& p) const { return R * p + t; }
  RigidTransform inverse() const { return {R.transpose(), -R.transpose() * t}; }
  RigidTransform operator*(const RigidTransform& o) const { return {R * o.R, R * o.t + t}; }
  Mat4 matrix() const;
  /// Plane expressed in the target frame of this transform.
  PlaneH transform_plane(const PlaneH& plane) const;
  PluckerLine transform_line(const PluckerLine& line) const;
};

/// Axis-angle rotation + translation, 6 parameters.
struct RigidTransformMin {
  Vec3 w = Vec3::Zero();
  Vec3 t = Vec3::Zero();
};

/// Quaternion logarithm of the normalized homogeneous plane, 3 parameters.
struct PlaneMin {
  Vec3 p = Vec3::Zero();
};

/// Axis-angle of R_L = [v, m/|m|, v x m/|m|] plus moment magnitude, 4 parameters.
struct LineMin {
  Vec3 w = Vec3::Zero();
  double m = 0.0;
};

struct ReflectionH {
  Mat4 H = Mat4::Identity();

  Mat3 linear() const { return H.topLeftCorner<3, 3>(); }
  Vec3 offset() const { return H.topRightCorner<3, 1>(); }
  Point3 apply(const Point3& p) const { return linear() * p + offset(); }
};

Point3 reflect_point(const PlaneH& plane, const Point3& p);
ReflectionH reflection_matrix(const PlaneH& plane);

/// Solves the stacked system [[v]x; n^T] X = -[m; d] in the least-squares sense.
/// Throws ParallelLinePlane when |v.n| < kParallelTol.
Point3 line_plane_intersect(const PluckerLine& line, const PlaneH& plane);

/// Mirror image of a line under H; the direction stays the propagation direction.
PluckerLine reflect_line(const PluckerLine& line, const ReflectionH& H);

RigidTransformMin to_min(const RigidTransform& T);
RigidTransform from_min(const RigidTransformMin& T);
/// Chooses the sign with d >= 0 so that |p| <= pi.
PlaneMin to_min(const PlaneH& plane);
PlaneH from_min(const PlaneMin& plane);
/// Throws DegenerateLine for lines through the origin (zero moment).
LineMin to_min(const PluckerLine& line);
PluckerLine from_min(const LineMin& line);

/// d[n; d] / dp, 4x3.
Eigen::Matrix<double, 4, 3> plane_from_min_jacobian(const PlaneMin& plane);
/// d[v; m] / d[w; m], 6x4.
Eigen::Matrix<double, 6, 4> line_from_min_jacobian(const LineMin& line);

Eigen::Matrix<double, 6, 1> to_vector(const RigidTransformMin& T);
Eigen::Matrix<double, 4, 1> to_vector(const LineMin& L);
RigidTransformMin transform_min_from(const double* x);
LineMin line_min_from(const double* x);
PlaneMin plane_min_from(const double* x);

/// Angle between two unit vectors in radians, in [0, pi].
double angle_between(const Vec3& a, const Vec3& b);
/// Angle between two undirected axes in radians, in [0, pi/2].
double axis_angle_between(const Vec3& a, const Vec3& b);

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

}  // namespace msm

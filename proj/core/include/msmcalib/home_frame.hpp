#pragma once

#include <span>

#include "msmcalib/geometry.hpp"

namespace msm {

/// Direction perpendicular to every normal of a 1-axis scan, largest component positive.
/// Throws RankDeficient when the normals do not span a plane.
Vec3 estimate_fast_axis(std::span<const Vec3> normals, double* max_residual = nullptr);

enum class PencilPolicy {
  Flag,   ///< return the minimum-norm point on the axis and set ambiguous_along_axis
  Error,  ///< throw PencilDegenerate
};

struct OriginEstimate {
  Point3 X = Point3::Zero();
  Vec4 singular_values = Vec4::Zero();  ///< of the conditioned homogeneous system, descending
  bool ambiguous_along_axis = false;
  double rms_mm = 0.0;     ///< RMS point-to-plane distance
  double spread_mm = 0.0;  ///< max - min signed distance, a translation range estimate
};

/// Least-squares common point of a set of planes. With a home plane the point is constrained to lie
/// on it exactly. Throws TooFewPoints (< 3 planes), PencilDegenerate under PencilPolicy::Error.
OriginEstimate estimate_origin(std::span<const PlaneH> planes, const PlaneH* home = nullptr,
                               PencilPolicy policy = PencilPolicy::Flag);

/// Mirror frame {0}: X along the fast axis, Z along the home normal, origin at the rotation center.
struct HomeFrame {
  Mat3 R0 = Mat3::Identity();  ///< {0} -> {W}
  Point3 X_O = Point3::Zero();
  OriginEstimate origin;
  double fast_axis_residual = 0.0;

  RigidTransform T_W0() const { return {R0, X_O}; }
};

/// R0 = [e, n0 x e, n0] with e the fast axis made orthogonal to n0.
HomeFrame make_home_frame(const Vec3& home_normal, const Vec3& fast_axis, const Point3& origin);

HomeFrame estimate_home_frame(std::span<const PlaneH> planes, std::span<const Vec3> fast_normals,
                              const PlaneH* home_plane, PencilPolicy policy = PencilPolicy::Flag);

/// Fast rotation about X, then slow rotation about the rotated Y, then offset along Z.
struct HomePose {
  double alpha_deg = 0.0;
  double beta_deg = 0.0;
  double tau_mm = 0.0;

  Vec3 vector() const { return {alpha_deg, beta_deg, tau_mm}; }
};

/// Plane expressed in {0}, normal with positive Z component.
PlaneH plane_in_home(const PlaneH& plane_w, const HomeFrame& frame);
HomePose to_home_frame(const PlaneH& plane_w, const HomeFrame& frame);
/// Exact inverse of to_home_frame.
PlaneH from_home_pose(const HomePose& pose, const HomeFrame& frame);

}  // namespace msm

#pragma once

#include <span>
#include <vector>

#include "msmcalib/geometry.hpp"

namespace msm {

/// Pinhole intrinsics without skew; distortion is assumed already removed.
struct Intrinsics {
  double fx = 1000.0;
  double fy = 1000.0;
  double cx = 500.0;
  double cy = 400.0;
  int width = 0;   ///< px, 0 = unbounded
  int height = 0;  ///< px, 0 = unbounded

  Mat3 matrix() const;
  bool contains(const Vec2& uv) const;
};

/// Pixel measurement with its 2x2 covariance (px^2).
struct ImagePoint {
  Vec2 uv = Vec2::Zero();
  Mat2 cov = 0.25 * Mat2::Identity();
};

/// Default isotropic corner uncertainty, sigma = 0.5 px.
inline constexpr double kDefaultCornerSigmaPx = 0.5;

/// Planar checkerboard of rows x cols inner corners with square cells.
struct CheckerboardSpec {
  int rows = 8;
  int cols = 11;
  double cell = 10.0;  ///< mm

  void validate() const;
  int size() const { return rows * cols; }
  /// Corner (r, c) lies at (c * cell, r * cell, 0) in the board frame.
  Point3 corner(int r, int c) const { return {c * cell, r * cell, 0.0}; }
  std::vector<Point3> corners() const;
};

/// Projects a point through camera pose T (board/world -> camera).
/// Throws BehindCamera when the depth is <= 1e-9.
Vec2 project(const RigidTransform& T, const Intrinsics& K, const Point3& X);
Vec2 project(const RigidTransformMin& T, const Intrinsics& K, const Point3& X);

struct ProjectionJacobian {
  Vec2 uv;
  Eigen::Matrix<double, 2, 6> d_pose;   ///< w.r.t. [w; t]
  Eigen::Matrix<double, 2, 3> d_point;  ///< w.r.t. X
};

ProjectionJacobian project_jacobian(const RigidTransformMin& T, const Intrinsics& K, const Point3& X);

/// Inverse square root of a covariance: the whitening matrix W with W^T W = cov^-1.
Mat2 whitening(const Mat2& cov);

struct PnPResult {
  RigidTransformMin pose;
  double rms_px = 0.0;
  int iterations = 0;
};

/// Camera pose from planar board corners: normalized DLT homography, then LM on reprojection.
/// Corners are in board row-major order. Throws DegenerateConfig, NoConvergence.
PnPResult solve_pnp(std::span<const ImagePoint> corners, const CheckerboardSpec& board, const Intrinsics& K);

/// Same, for arbitrary planar (z = 0) object points.
PnPResult solve_pnp_planar(std::span<const ImagePoint> image, std::span<const Point3> object, const Intrinsics& K);

/// Intersects the viewing ray of x with a plane given in the frame T maps from.
/// Throws RayParallelToPlane, BehindCamera.
Point3 backproject_to_plane(const Vec2& x, const RigidTransformMin& T, const Intrinsics& K, const PlaneH& plane);

/// Covariance of a blob centroid from the per-pixel spread: cov / n. Throws EmptyBlob for n < 1.
Mat2 centroid_covariance(const Mat2& pixel_cov, int n_pixels);

}  // namespace msm

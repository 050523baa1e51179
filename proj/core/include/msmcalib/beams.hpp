#pragma once

#include <map>
#include <span>
#include <vector>

#include "msmcalib/camera.hpp"
#include "msmcalib/dataset.hpp"
#include "msmcalib/geometry.hpp"

namespace msm {

struct LineFit {
  PluckerLine line;
  double rms = 0.0;  ///< mm, RMS distance of the points to the line
  Vec3 singular_values = Vec3::Zero();
};

/// Principal-component line fit. The direction follows the input order (first -> last point)
/// unless a hint is given, in which case v.hint >= 0.
/// Throws TooFewPoints (< 2 distinct points), DegenerateLine (s2/s1 > 0.5).
LineFit fit_line_pca(std::span<const Point3> points, const Vec3* direction_hint = nullptr);

/// Unit normal of the plane through L and X, first nonzero component positive. Throws PointOnLine.
Vec3 lightpath_normal(const PluckerLine& L, const Point3& X);

struct BeamReconstruction {
  std::map<int, PluckerLine> beams;  ///< in {W}
  std::map<int, double> rms_mm;
  RigidTransformMin T_C1W;
  std::vector<RigidTransformMin> T_C1S;  ///< one per capture, capture order
};

/// Dot on the sliding board of capture l, lifted to {W}.
Point3 sliding_dot_in_world(const Vec2& x, const RigidTransformMin& T_C1W, const RigidTransformMin& T_C1S,
                            const Intrinsics& K);

/// PnP on all captures, then one PCA line per beam. Beam directions are oriented away from the world
/// board (v.z < 0 in {W}). Throws InsufficientCaptures when a beam has fewer than 2 dots.
BeamReconstruction reconstruct_beams(std::span<const SlidingCapture> captures, const Scene& scene);

}  // namespace msm

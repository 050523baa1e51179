#include "msmcalib/beams.hpp"

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "msmcalib/error.hpp"

namespace msm {

LineFit fit_line_pca(std::span<const Point3> points, const Vec3* direction_hint) {
  if (points.size() < 2) throw CalibError(ErrorCode::TooFewPoints, "line fit needs at least 2 points");
  Point3 mean = Point3::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(points.size());
  Eigen::MatrixXd C(static_cast<Eigen::Index>(points.size()), 3);
  for (std::size_t i = 0; i < points.size(); ++i) C.row(static_cast<Eigen::Index>(i)) = (points[i] - mean).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(C, Eigen::ComputeFullV);
  const Vec3 s = svd.singularValues().head<3>().eval();
  if (s(0) <= 1e-12 * (1.0 + mean.norm())) {
    throw CalibError(ErrorCode::TooFewPoints, "line fit needs at least 2 distinct points");
  }
  if (s(1) / s(0) > 0.5) {
    throw CalibError(ErrorCode::DegenerateLine, "points are not line-like, singular value ratio " +
                                                    std::to_string(s(1) / s(0)));
  }
  Vec3 v = svd.matrixV().col(0);
  const Vec3 ref = direction_hint ? *direction_hint : Vec3(points.back() - points.front());
  if (v.dot(ref) < 0.0) v = -v;
  LineFit out;
  out.line = PluckerLine::from_point_direction(mean, v);
  out.singular_values = s;
  out.rms = std::sqrt((s(1) * s(1) + s(2) * s(2)) / static_cast<double>(points.size()));
  return out;
}

Vec3 lightpath_normal(const PluckerLine& L, const Point3& X) {
  const Vec3 n = L.residual(X);
  const double len = n.norm();
  if (len <= 1e-9) throw CalibError(ErrorCode::PointOnLine, "point lies on the line");
  return PlaneH{n / len, 0.0}.canonical().n;
}

Point3 sliding_dot_in_world(const Vec2& x, const RigidTransformMin& T_C1W, const RigidTransformMin& T_C1S,
                            const Intrinsics& K) {
  const Point3 Xs = backproject_to_plane(x, T_C1S, K, PlaneH{Vec3::UnitZ(), 0.0});
  const RigidTransform Ts = from_min(T_C1S);
  const RigidTransform Tw = from_min(T_C1W);
  return Tw.inverse().apply(Ts.apply(Xs));
}

BeamReconstruction reconstruct_beams(std::span<const SlidingCapture> captures, const Scene& scene) {
  if (captures.size() < 2) {
    throw CalibError(ErrorCode::InsufficientCaptures, "beam estimation needs at least 2 sliding captures");
  }
  BeamReconstruction out;

  std::vector<ImagePoint> world_img;
  std::vector<Point3> world_obj;
  const std::vector<Point3> board = scene.world_board.corners();
  for (const auto& c : captures) {
    if (c.world_corners.size() != board.size()) {
      throw CalibError(ErrorCode::Validation,
                       "capture " + std::to_string(c.index) + ": world board corner count mismatch");
    }
    world_img.insert(world_img.end(), c.world_corners.begin(), c.world_corners.end());
    world_obj.insert(world_obj.end(), board.begin(), board.end());
  }
  out.T_C1W = solve_pnp_planar(world_img, world_obj, scene.K1).pose;

  std::map<int, std::vector<Point3>> pts;
  for (const auto& c : captures) {
    const RigidTransformMin Ts = solve_pnp(c.sliding_corners, scene.sliding_board, scene.K1).pose;
    out.T_C1S.push_back(Ts);
    for (const auto& d : c.dots) pts[d.beam].push_back(sliding_dot_in_world(d.x.uv, out.T_C1W, Ts, scene.K1));
  }
  for (int id : scene.beams) {
    if (pts[id].size() < 2) {
      throw CalibError(ErrorCode::InsufficientCaptures,
                       "beam " + std::to_string(id) + " has " + std::to_string(pts[id].size()) + " dots");
    }
  }
  const Vec3 away = -Vec3::UnitZ();
  for (const auto& [id, p] : pts) {
    if (p.size() < 2) continue;
    const LineFit fit = fit_line_pca(p, &away);
    out.beams[id] = fit.line;
    out.rms_mm[id] = fit.rms;
  }
  return out;
}

}  // namespace msm

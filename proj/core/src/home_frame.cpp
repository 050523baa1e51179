#include "msmcalib/home_frame.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "msmcalib/error.hpp"

namespace msm {

Vec3 estimate_fast_axis(std::span<const Vec3> normals, double* max_residual) {
  if (normals.size() < 2) throw CalibError(ErrorCode::RankDeficient, "fast axis needs at least 2 normals");
  Eigen::MatrixXd N(static_cast<Eigen::Index>(normals.size()), 3);
  for (std::size_t i = 0; i < normals.size(); ++i) N.row(static_cast<Eigen::Index>(i)) = normals[i].normalized();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(N, Eigen::ComputeFullV);
  const auto s = svd.singularValues();
  if (s(1) <= 1e-12 * s(0)) throw CalibError(ErrorCode::RankDeficient, "scan normals are all parallel");
  Vec3 e = svd.matrixV().col(2);
  Eigen::Index k;
  e.cwiseAbs().maxCoeff(&k);
  if (e(k) < 0.0) e = -e;
  if (max_residual) *max_residual = (N * e).cwiseAbs().maxCoeff();
  return e;
}

namespace {

void finish(OriginEstimate& out, std::span<const PlaneH> planes) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double sq = 0.0;
  for (const auto& p : planes) {
    const double r = p.signed_distance(out.X);
    sq += r * r;
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  out.rms_mm = std::sqrt(sq / static_cast<double>(planes.size()));
  out.spread_mm = hi - lo;
}

Point3 min_norm_point(std::span<const PlaneH> planes) {
  Eigen::MatrixXd N(static_cast<Eigen::Index>(planes.size()), 3);
  Eigen::VectorXd d(static_cast<Eigen::Index>(planes.size()));
  for (std::size_t i = 0; i < planes.size(); ++i) {
    N.row(static_cast<Eigen::Index>(i)) = planes[i].n.transpose();
    d(static_cast<Eigen::Index>(i)) = planes[i].d;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(N, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-6);
  return svd.solve(-d);
}

}  // namespace

OriginEstimate estimate_origin(std::span<const PlaneH> planes, const PlaneH* home, PencilPolicy policy) {
  if (planes.size() < 3) throw CalibError(ErrorCode::TooFewPoints, "origin estimate needs at least 3 planes");
  OriginEstimate out;

  Point3 c = Point3::Zero();
  for (const auto& p : planes) c -= p.d * p.n;
  c /= static_cast<double>(planes.size());
  double s = 0.0;
  for (const auto& p : planes) s += std::abs(p.signed_distance(c));
  s /= static_cast<double>(planes.size());
  if (s < 1e-9) s = 1.0;
  Eigen::MatrixXd M(static_cast<Eigen::Index>(planes.size()), 4);
  for (std::size_t i = 0; i < planes.size(); ++i) {
    Vec4 row;
    row << s * planes[i].n, planes[i].signed_distance(c);
    M.row(static_cast<Eigen::Index>(i)) = row.normalized().transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
  const auto& sv4 = svd.singularValues();
  out.singular_values.head(sv4.size()) = sv4;
  bool pencil = out.singular_values(2) < 1e-6 * out.singular_values(0);

  if (home) {
    const Vec3 n0 = home->n.normalized();
    const Point3 Xh = -home->d * n0;
    Eigen::Matrix<double, 3, 2> B;
    B.col(0) = n0.unitOrthogonal();
    B.col(1) = n0.cross(B.col(0));
    Eigen::MatrixXd A(static_cast<Eigen::Index>(planes.size()), 2);
    Eigen::VectorXd b(static_cast<Eigen::Index>(planes.size()));
    for (std::size_t i = 0; i < planes.size(); ++i) {
      A.row(static_cast<Eigen::Index>(i)) = planes[i].n.transpose() * B;
      b(static_cast<Eigen::Index>(i)) = -planes[i].signed_distance(Xh);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> hs(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto sv = hs.singularValues();
    pencil = sv(1) < 1e-6 * std::max(sv(0), 1e-300);
    if (!pencil) {
      out.X = Xh + B * hs.solve(b);
      finish(out, planes);
      return out;
    }
  } else if (!pencil) {
    const Vec4 v = svd.matrixV().col(3);
    if (std::abs(v(3)) > 1e-12 * v.head<3>().norm()) {
      out.X = c + s * v.head<3>() / v(3);
      finish(out, planes);
      return out;
    }
    pencil = true;
  }

  if (policy == PencilPolicy::Error) {
    throw CalibError(ErrorCode::PencilDegenerate, "planes form a pencil; the rotation center is ambiguous along its axis");
  }
  out.ambiguous_along_axis = true;
  out.X = min_norm_point(planes);
  finish(out, planes);
  return out;
}

HomeFrame make_home_frame(const Vec3& home_normal, const Vec3& fast_axis, const Point3& origin) {
  const Vec3 n0 = home_normal.normalized();
  const Vec3 e = (fast_axis - fast_axis.dot(n0) * n0).normalized();
  HomeFrame f;
  f.R0.col(0) = e;
  f.R0.col(1) = n0.cross(e);
  f.R0.col(2) = n0;
  f.X_O = origin;
  f.origin.X = origin;
  return f;
}

HomeFrame estimate_home_frame(std::span<const PlaneH> planes, std::span<const Vec3> fast_normals,
                              const PlaneH* home_plane, PencilPolicy policy) {
  Vec3 n0;
  if (home_plane) {
    n0 = home_plane->n;
  } else {
    n0 = Vec3::Zero();
    for (const auto& p : planes) n0 += p.n;
    if (n0.norm() < 1e-12) throw CalibError(ErrorCode::RankDeficient, "mean mirror normal vanishes");
  }
  double residual = 0.0;
  const Vec3 e = estimate_fast_axis(fast_normals, &residual);
  const OriginEstimate o = estimate_origin(planes, home_plane, policy);
  HomeFrame f = make_home_frame(n0, e, o.X);
  f.origin = o;
  f.fast_axis_residual = residual;
  return f;
}

PlaneH plane_in_home(const PlaneH& plane_w, const HomeFrame& frame) {
  PlaneH p{frame.R0.transpose() * plane_w.n, plane_w.d + plane_w.n.dot(frame.X_O)};
  if (p.n.z() < 0.0) p = p.flipped();
  return p;
}

HomePose to_home_frame(const PlaneH& plane_w, const HomeFrame& frame) {
  const PlaneH p = plane_in_home(plane_w, frame);
  HomePose out;
  out.beta_deg = rad2deg(std::asin(std::clamp(p.n.x(), -1.0, 1.0)));
  out.alpha_deg = rad2deg(std::atan2(-p.n.y(), p.n.z()));
  out.tau_mm = -p.d;
  return out;
}

PlaneH from_home_pose(const HomePose& pose, const HomeFrame& frame) {
  const double a = deg2rad(pose.alpha_deg);
  const double b = deg2rad(pose.beta_deg);
  const Vec3 n(std::sin(b), -std::sin(a) * std::cos(b), std::cos(a) * std::cos(b));
  const Vec3 nw = frame.R0 * n;
  return {nw, -pose.tau_mm - nw.dot(frame.X_O)};
}

}  // namespace msm

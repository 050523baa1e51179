#include "msmcalib/factors.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "msmcalib/error.hpp"

namespace msm {

namespace {

using Mat34 = Eigen::Matrix<double, 3, 4>;
using Mat43 = Eigen::Matrix<double, 4, 3>;

Mat34 left_pinv(const Mat43& A) {
  const Mat3 AtA = A.transpose() * A;
  return AtA.ldlt().solve(A.transpose());
}

}  // namespace

PlaneH sliding_plane_in_world(const RigidTransformMin& T_C1W, const RigidTransformMin& T_C1S) {
  const RigidTransform Tw = from_min(T_C1W);
  const Vec3 nc = so3::exp(T_C1S.w).col(2);
  return {Tw.R.transpose() * nc, nc.dot(Tw.t - T_C1S.t)};
}

Point3 reflected_point(const PlaneH& mirror, const PluckerLine& beam, const PlaneH& target) {
  const PluckerLine r = reflect_line(beam, reflection_matrix(mirror));
  return line_plane_intersect(r, target);
}

ReflectedDot reflected_dot(const PlaneMin& mirror, const LineMin& beam, const RigidTransformMin& T_C2W,
                           const Intrinsics& K) {
  const PlaneH pl = from_min(mirror);
  const PluckerLine L = from_min(beam);
  const Vec3& n = pl.n;
  const double d = pl.d;
  const Mat3 Mh = Mat3::Identity() - 2.0 * n * n.transpose();
  const Vec3 vr = Mh * L.v;
  if (std::abs(vr.z()) < kParallelTol) {
    throw CalibError(ErrorCode::ParallelLinePlane, "reflected beam is parallel to the world plane");
  }
  const Mat3 V = so3::hat(L.v);
  Mat43 A;
  A.topRows<3>() = V * Mh;
  A.row(3) = Vec3::UnitZ().transpose();
  Vec4 b;
  b.head<3>() = 2.0 * d * V * n - L.m;
  b(3) = 0.0;
  const Mat34 Ainv = left_pinv(A);
  const Point3 P = Ainv * b;

  const Vec3 u = Mh * P - 2.0 * d * n;
  const Mat3 dr_dn = V * (-2.0 * (n * P.transpose() + n.dot(P) * Mat3::Identity()) - 2.0 * d * Mat3::Identity());
  const Vec3 dr_dd = -2.0 * V * n;
  const Mat3 Ainv3 = Ainv.leftCols<3>();

  const Eigen::Matrix<double, 4, 3> Jp = plane_from_min_jacobian(mirror);
  const Mat3 dP_dp = -Ainv3 * (dr_dn * Jp.topRows<3>() + dr_dd * Jp.row(3));
  const Eigen::Matrix<double, 6, 4> Jl = line_from_min_jacobian(beam);
  const Eigen::Matrix<double, 3, 4> dP_dl = -Ainv3 * (-so3::hat(u) * Jl.topRows<3>() + Jl.bottomRows<3>());

  const ProjectionJacobian pj = project_jacobian(T_C2W, K, P);
  ReflectedDot out;
  out.uv = pj.uv;
  out.P = P;
  out.d_plane = pj.d_point * dP_dp;
  out.d_line = pj.d_point * dP_dl;
  out.d_camera = pj.d_pose;
  return out;
}

SlidingDot sliding_dot(const LineMin& beam, const RigidTransformMin& T_C1W, const RigidTransformMin& T_C1S,
                       const Intrinsics& K) {
  const PluckerLine L = from_min(beam);
  const Mat3 Rw = so3::exp(T_C1W.w);
  const Vec3 nc = so3::exp(T_C1S.w).col(2);
  const Vec3 nw = Rw.transpose() * nc;
  if (std::abs(L.v.dot(nw)) < kParallelTol) {
    throw CalibError(ErrorCode::ParallelLinePlane, "beam is parallel to the sliding board");
  }
  Mat43 A;
  A.topRows<3>() = so3::hat(L.v);
  A.row(3) = nw.transpose();
  Vec4 b;
  b.head<3>() = -L.m;
  b(3) = -nc.dot(T_C1W.t - T_C1S.t);
  const Mat34 Ainv = left_pinv(A);
  const Point3 P = Ainv * b;
  const Vec3 RP = Rw * P;
  const Vec3 Xc = RP + T_C1W.t;

  const Eigen::Matrix<double, 6, 4> Jl = line_from_min_jacobian(beam);
  Eigen::Matrix<double, 4, 4> dr_dl = Eigen::Matrix<double, 4, 4>::Zero();
  dr_dl.topRows<3>() = -so3::hat(P) * Jl.topRows<3>() + Jl.bottomRows<3>();

  Eigen::Matrix<double, 4, 6> dr_dcam = Eigen::Matrix<double, 4, 6>::Zero();
  dr_dcam.block<1, 3>(3, 0) = -nc.transpose() * so3::hat(RP) * so3::left_jacobian(T_C1W.w);
  dr_dcam.block<1, 3>(3, 3) = nc.transpose();

  Eigen::Matrix<double, 4, 6> dr_dboard = Eigen::Matrix<double, 4, 6>::Zero();
  dr_dboard.block<1, 3>(3, 0) = -(Xc - T_C1S.t).transpose() * so3::hat(nc) * so3::left_jacobian(T_C1S.w);
  dr_dboard.block<1, 3>(3, 3) = -nc.transpose();

  const ProjectionJacobian pj = project_jacobian(T_C1W, K, P);
  SlidingDot out;
  out.uv = pj.uv;
  out.P = P;
  out.d_line = -pj.d_point * Ainv * dr_dl;
  out.d_camera = pj.d_pose - pj.d_point * Ainv * dr_dcam;
  out.d_board = -pj.d_point * Ainv * dr_dboard;
  return out;
}

CornerFactor::CornerFactor(const ImagePoint& obs, const Point3& X, const Intrinsics& K, int pose_block)
    : uv_(obs.uv), W_(whitening(obs.cov)), X_(X), K_(K), blocks_{pose_block} {}

bool CornerFactor::evaluate(const std::vector<const double*>& p, Eigen::Ref<Eigen::VectorXd> r,
                            std::vector<Eigen::MatrixXd>* J) const {
  try {
    const ProjectionJacobian pj = project_jacobian(transform_min_from(p[0]), K_, X_);
    r = W_ * (pj.uv - uv_);
    if (J) (*J)[0] = W_ * pj.d_pose;
    return true;
  } catch (const CalibError&) {
    r.setZero();
    return false;
  }
}

SlidingDotFactor::SlidingDotFactor(const ImagePoint& obs, const Intrinsics& K, int line_block, int cam_block,
                                   int board_block)
    : uv_(obs.uv), W_(whitening(obs.cov)), K_(K), blocks_{line_block, cam_block, board_block} {}

bool SlidingDotFactor::evaluate(const std::vector<const double*>& p, Eigen::Ref<Eigen::VectorXd> r,
                                std::vector<Eigen::MatrixXd>* J) const {
  try {
    const SlidingDot s = sliding_dot(line_min_from(p[0]), transform_min_from(p[1]), transform_min_from(p[2]), K_);
    r = W_ * (s.uv - uv_);
    if (J) {
      (*J)[0] = W_ * s.d_line;
      (*J)[1] = W_ * s.d_camera;
      (*J)[2] = W_ * s.d_board;
    }
    return true;
  } catch (const CalibError&) {
    r.setZero();
    return false;
  }
}

ReflectionFactor::ReflectionFactor(const ImagePoint& obs, const Intrinsics& K, int plane_block, int line_block,
                                   int cam_block)
    : uv_(obs.uv), W_(whitening(obs.cov)), K_(K), blocks_{plane_block, line_block, cam_block} {}

bool ReflectionFactor::evaluate(const std::vector<const double*>& p, Eigen::Ref<Eigen::VectorXd> r,
                                std::vector<Eigen::MatrixXd>* J) const {
  try {
    const ReflectedDot s = reflected_dot(plane_min_from(p[0]), line_min_from(p[1]), transform_min_from(p[2]), K_);
    r = W_ * (s.uv - uv_);
    if (J) {
      (*J)[0] = W_ * s.d_plane;
      (*J)[1] = W_ * s.d_line;
      (*J)[2] = W_ * s.d_camera;
    }
    return true;
  } catch (const CalibError&) {
    r.setZero();
    return false;
  }
}

}  // namespace msm

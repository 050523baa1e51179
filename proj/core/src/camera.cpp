#include "msmcalib/camera.hpp"

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "msmcalib/error.hpp"
#include "msmcalib/factors.hpp"
#include "msmcalib/lm.hpp"

namespace msm {

Mat3 Intrinsics::matrix() const {
  Mat3 K;
  K << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return K;
}

bool Intrinsics::contains(const Vec2& uv) const {
  if (width <= 0 || height <= 0) return true;
  return uv.x() >= 0.0 && uv.y() >= 0.0 && uv.x() <= width - 1.0 && uv.y() <= height - 1.0;
}

void CheckerboardSpec::validate() const {
  if (rows < 2 || cols < 2 || !(cell > 0.0)) {
    throw CalibError(ErrorCode::Validation, "checkerboard needs at least 2x2 corners and a positive cell size");
  }
}

std::vector<Point3> CheckerboardSpec::corners() const {
  std::vector<Point3> out;
  out.reserve(static_cast<std::size_t>(size()));
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out.push_back(corner(r, c));
  return out;
}

namespace {

Vec2 pinhole(const Intrinsics& K, const Point3& Xc) {
  if (Xc.z() <= 1e-9) {
    throw CalibError(ErrorCode::BehindCamera, "point depth " + std::to_string(Xc.z()) + " mm");
  }
  return {K.fx * Xc.x() / Xc.z() + K.cx, K.fy * Xc.y() / Xc.z() + K.cy};
}

}  // namespace

Vec2 project(const RigidTransform& T, const Intrinsics& K, const Point3& X) { return pinhole(K, T.apply(X)); }

Vec2 project(const RigidTransformMin& T, const Intrinsics& K, const Point3& X) {
  return project(from_min(T), K, X);
}

ProjectionJacobian project_jacobian(const RigidTransformMin& T, const Intrinsics& K, const Point3& X) {
  const Mat3 R = so3::exp(T.w);
  const Vec3 RX = R * X;
  const Point3 Xc = RX + T.t;
  ProjectionJacobian out;
  out.uv = pinhole(K, Xc);
  const double iz = 1.0 / Xc.z();
  Eigen::Matrix<double, 2, 3> dpi;
  dpi << K.fx * iz, 0.0, -K.fx * Xc.x() * iz * iz,
         0.0, K.fy * iz, -K.fy * Xc.y() * iz * iz;
  out.d_pose.leftCols<3>() = -dpi * so3::hat(RX) * so3::left_jacobian(T.w);
  out.d_pose.rightCols<3>() = dpi;
  out.d_point = dpi * R;
  return out;
}

Mat2 whitening(const Mat2& cov) {
  Eigen::SelfAdjointEigenSolver<Mat2> es(cov);
  const Vec2 ev = es.eigenvalues().cwiseMax(1e-300);
  return es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

namespace {

Mat3 hartley(const std::vector<Vec2>& pts) {
  Vec2 c = Vec2::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double mean = 0.0;
  for (const auto& p : pts) mean += (p - c).norm();
  mean /= static_cast<double>(pts.size());
  const double s = mean > 0.0 ? std::sqrt(2.0) / mean : 1.0;
  Mat3 T;
  T << s, 0.0, -s * c.x(), 0.0, s, -s * c.y(), 0.0, 0.0, 1.0;
  return T;
}

bool collinear(const std::vector<Vec2>& pts) {
  Vec2 c = Vec2::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  Mat2 S = Mat2::Zero();
  for (const auto& p : pts) S += (p - c) * (p - c).transpose();
  Eigen::SelfAdjointEigenSolver<Mat2> es(S);
  return es.eigenvalues()(0) <= 1e-12 * std::max(es.eigenvalues()(1), 1e-300);
}

}  // namespace

PnPResult solve_pnp(std::span<const ImagePoint> corners, const CheckerboardSpec& board, const Intrinsics& K) {
  board.validate();
  if (static_cast<int>(corners.size()) != board.size()) {
    throw CalibError(ErrorCode::Validation, "expected " + std::to_string(board.size()) + " corners, got " +
                                                std::to_string(corners.size()));
  }
  const std::vector<Point3> object = board.corners();
  return solve_pnp_planar(corners, object, K);
}

PnPResult solve_pnp_planar(std::span<const ImagePoint> image, std::span<const Point3> object, const Intrinsics& K) {
  if (image.size() != object.size()) {
    throw CalibError(ErrorCode::Validation, "image and object point counts differ");
  }
  if (image.size() < 4) {
    throw CalibError(ErrorCode::TooFewPoints, "PnP needs at least 4 points");
  }
  const std::size_t n = image.size();
  std::vector<Vec2> obj2(n), img(n), imgn(n);
  const Mat3 Kinv = K.matrix().inverse();
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(object[i].z()) > 1e-9) {
      throw CalibError(ErrorCode::Validation, "planar PnP needs object points on z = 0");
    }
    obj2[i] = object[i].head<2>();
    img[i] = image[i].uv;
    imgn[i] = (Kinv * image[i].uv.homogeneous()).hnormalized();
  }
  if (collinear(obj2) || collinear(img)) {
    throw CalibError(ErrorCode::DegenerateConfig, "PnP points are collinear");
  }

  const Mat3 To = hartley(obj2);
  const Mat3 Ti = hartley(imgn);
  Eigen::MatrixXd A(2 * n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 p = To * obj2[i].homogeneous();
    const Vec3 q = Ti * imgn[i].homogeneous();
    const auto r = static_cast<Eigen::Index>(2 * i);
    A.row(r) << 0, 0, 0, -p.transpose(), q.y() * p.transpose();
    A.row(r + 1) << p.transpose(), 0, 0, 0, -q.x() * p.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Mat3 Hn;
  Hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  const Mat3 H = Ti.inverse() * Hn * To;

  double lambda = 2.0 / (H.col(0).norm() + H.col(1).norm());
  if ((lambda * H.col(2)).z() < 0.0) lambda = -lambda;
  Mat3 R0;
  R0.col(0) = lambda * H.col(0);
  R0.col(1) = lambda * H.col(1);
  R0.col(2) = R0.col(0).cross(R0.col(1));
  Eigen::JacobiSVD<Mat3> rs(R0, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 R = rs.matrixU() * rs.matrixV().transpose();
  if (R.determinant() < 0.0) {
    Mat3 U = rs.matrixU();
    U.col(2) *= -1.0;
    R = U * rs.matrixV().transpose();
  }
  const Vec3 t = lambda * H.col(2);

  lm::Problem problem;
  problem.add_parameter_block(6);
  for (std::size_t i = 0; i < n; ++i) problem.add_factor(std::make_unique<CornerFactor>(image[i], object[i], K, 0));
  Eigen::VectorXd x = to_vector(to_min(RigidTransform{R, t}));
  const lm::Summary summary = problem.solve(x);

  PnPResult out;
  out.pose = transform_min_from(x.data());
  out.iterations = summary.iterations;
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) sq += (project(out.pose, K, object[i]) - image[i].uv).squaredNorm();
  out.rms_px = std::sqrt(sq / static_cast<double>(n));
  return out;
}

Point3 backproject_to_plane(const Vec2& x, const RigidTransformMin& T, const Intrinsics& K, const PlaneH& plane) {
  const Mat3 R = so3::exp(T.w);
  const Vec3 c = -R.transpose() * T.t;
  const Vec3 dir = R.transpose() * Vec3((x.x() - K.cx) / K.fx, (x.y() - K.cy) / K.fy, 1.0);
  const double denom = plane.n.dot(dir);
  if (std::abs(denom) < 1e-12 * dir.norm()) {
    throw CalibError(ErrorCode::RayParallelToPlane, "viewing ray is parallel to the plane");
  }
  const double s = -plane.signed_distance(c) / denom;
  if (s <= 0.0) {
    throw CalibError(ErrorCode::BehindCamera, "plane intersection lies behind the camera");
  }
  return c + s * dir;
}

Mat2 centroid_covariance(const Mat2& pixel_cov, int n_pixels) {
  if (n_pixels < 1) throw CalibError(ErrorCode::EmptyBlob, "blob has no pixels");
  return pixel_cov / static_cast<double>(n_pixels);
}

}  // namespace msm

#pragma once

#include <vector>

#include "msmcalib/camera.hpp"
#include "msmcalib/geometry.hpp"
#include "msmcalib/lm.hpp"

namespace msm {

/// World board plane z = 0 in {W}.
inline PlaneH world_plane() { return {Vec3::UnitZ(), 0.0}; }

/// Sliding board plane (z = 0 in {S}) expressed in {W}.
PlaneH sliding_plane_in_world(const RigidTransformMin& T_C1W, const RigidTransformMin& T_C1S);

/// Where the beam, reflected by the mirror, meets the target plane.
/// Throws ParallelLinePlane when the reflected beam is parallel to the target.
Point3 reflected_point(const PlaneH& mirror, const PluckerLine& beam, const PlaneH& target = world_plane());

struct ReflectedDot {
  Vec2 uv;
  Point3 P;  ///< on the world plane
  Eigen::Matrix<double, 2, 3> d_plane;
  Eigen::Matrix<double, 2, 4> d_line;
  Eigen::Matrix<double, 2, 6> d_camera;  ///< T_C2W
};

/// Image of the reflected dot in camera C2, with Jacobians over the minimal parameters.
ReflectedDot reflected_dot(const PlaneMin& mirror, const LineMin& beam, const RigidTransformMin& T_C2W,
                           const Intrinsics& K);

struct SlidingDot {
  Vec2 uv;
  Point3 P;  ///< in {W}
  Eigen::Matrix<double, 2, 4> d_line;
  Eigen::Matrix<double, 2, 6> d_camera;  ///< T_C1W
  Eigen::Matrix<double, 2, 6> d_board;   ///< T_C1S
};

/// Image in camera C1 of the beam crossing the sliding board.
SlidingDot sliding_dot(const LineMin& beam, const RigidTransformMin& T_C1W, const RigidTransformMin& T_C1S,
                       const Intrinsics& K);

/// Board corner reprojection; block: the camera-from-board transform.
class CornerFactor final : public lm::Factor {
 public:
  CornerFactor(const ImagePoint& obs, const Point3& X, const Intrinsics& K, int pose_block);
  int residual_dim() const override { return 2; }
  const std::vector<int>& blocks() const override { return blocks_; }
  bool evaluate(const std::vector<const double*>& p, Eigen::Ref<Eigen::VectorXd> r,
                std::vector<Eigen::MatrixXd>* J) const override;

 private:
  Vec2 uv_;
  Mat2 W_;
  Point3 X_;
  Intrinsics K_;
  std::vector<int> blocks_;
};

/// Beam dot on a sliding board; blocks: line, T_C1W, T_C1S.
class SlidingDotFactor final : public lm::Factor {
 public:
  SlidingDotFactor(const ImagePoint& obs, const Intrinsics& K, int line_block, int cam_block, int board_block);
  int residual_dim() const override { return 2; }
  const std::vector<int>& blocks() const override { return blocks_; }
  bool evaluate(const std::vector<const double*>& p, Eigen::Ref<Eigen::VectorXd> r,
                std::vector<Eigen::MatrixXd>* J) const override;

 private:
  Vec2 uv_;
  Mat2 W_;
  Intrinsics K_;
  std::vector<int> blocks_;
};

/// Reflected dot on the world board; blocks: plane, line, T_C2W.
class ReflectionFactor final : public lm::Factor {
 public:
  ReflectionFactor(const ImagePoint& obs, const Intrinsics& K, int plane_block, int line_block, int cam_block);
  int residual_dim() const override { return 2; }
  const std::vector<int>& blocks() const override { return blocks_; }
  bool evaluate(const std::vector<const double*>& p, Eigen::Ref<Eigen::VectorXd> r,
                std::vector<Eigen::MatrixXd>* J) const override;

 private:
  Vec2 uv_;
  Mat2 W_;
  Intrinsics K_;
  std::vector<int> blocks_;
};

}  // namespace msm

#pragma once

#include <string>
#include <vector>

#include "msmcalib/camera.hpp"
#include "msmcalib/hall.hpp"

namespace msm {

/// Laser dot seen on the sliding board during beam estimation.
struct Dot {
  int beam = 0;
  ImagePoint x;
};

/// One sliding-board pose seen by camera C1, together with the static world board.
struct SlidingCapture {
  int index = 0;
  std::vector<ImagePoint> world_corners;    ///< world board, row-major
  std::vector<ImagePoint> sliding_corners;  ///< sliding board, row-major
  std::vector<Dot> dots;
};

/// Reflected laser dot on the world plane, fired at pulse time t.
struct PulseDot {
  int beam = 0;
  int pulse = 0;
  double t = 0.0;  ///< s
  ImagePoint x;
};

enum class FrameTag { Home, Fast, Full };

/// One camera C2 exposure during mirror scanning.
struct ScanFrame {
  int index = 0;
  FrameTag tag = FrameTag::Full;
  std::vector<ImagePoint> corners;  ///< world board, row-major
  std::vector<PulseDot> dots;
};

std::string to_string(FrameTag tag);
FrameTag frame_tag_from_string(const std::string& s);

struct DriveConfig {
  double fast_hz = 31.0;
  double slow_hz = 7.0;
};

struct Scene {
  Intrinsics K1;  ///< beam-estimation camera
  Intrinsics K2;  ///< scan camera
  CheckerboardSpec world_board{15, 20, 10.0};
  CheckerboardSpec sliding_board{17, 17, 10.0};
  std::vector<int> beams;  ///< beam ids present in the data
  Point3 nominal_center = Point3::Zero();  ///< assumed rotation center in {W}, used by the pure-rotation baseline
  DriveConfig drives;
};

struct Dataset {
  Scene scene;
  std::vector<SlidingCapture> captures;
  std::vector<ScanFrame> frames;
  HallSeries hall_actual;
  HallSeries hall_background;

  /// Checks internal consistency; throws Validation naming the offending item.
  void validate() const;
};

}  // namespace msm

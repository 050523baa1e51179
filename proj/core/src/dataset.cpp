#include "msmcalib/dataset.hpp"

#include <cmath>
#include <set>

#include "msmcalib/error.hpp"

namespace msm {

std::string to_string(FrameTag tag) {
  switch (tag) {
    case FrameTag::Home: return "home";
    case FrameTag::Fast: return "fast";
    case FrameTag::Full: return "full";
  }
  return "full";
}

FrameTag frame_tag_from_string(const std::string& s) {
  if (s == "home") return FrameTag::Home;
  if (s == "fast") return FrameTag::Fast;
  if (s == "full") return FrameTag::Full;
  throw CalibError(ErrorCode::Validation, "unknown frame tag '" + s + "'");
}

namespace {

void check_point(const ImagePoint& p, const std::string& where) {
  if (!p.uv.allFinite() || !p.cov.allFinite()) throw CalibError(ErrorCode::Validation, where + ": non-finite value");
  if (p.cov(0, 0) <= 0.0 || p.cov(1, 1) <= 0.0 || p.cov.determinant() <= 0.0) {
    throw CalibError(ErrorCode::Validation, where + ": covariance is not positive definite");
  }
}

}  // namespace

void Dataset::validate() const {
  scene.world_board.validate();
  scene.sliding_board.validate();
  const std::set<int> ids(scene.beams.begin(), scene.beams.end());
  if (ids.size() != scene.beams.size()) throw CalibError(ErrorCode::Validation, "scene.beams: duplicate beam id");
  for (std::size_t l = 0; l < captures.size(); ++l) {
    const auto& c = captures[l];
    const std::string where = "captures[" + std::to_string(l) + "]";
    if (static_cast<int>(c.world_corners.size()) != scene.world_board.size()) {
      throw CalibError(ErrorCode::Validation, where + ".world_corners: expected " +
                                                  std::to_string(scene.world_board.size()) + " corners");
    }
    if (static_cast<int>(c.sliding_corners.size()) != scene.sliding_board.size()) {
      throw CalibError(ErrorCode::Validation, where + ".sliding_corners: expected " +
                                                  std::to_string(scene.sliding_board.size()) + " corners");
    }
    for (std::size_t i = 0; i < c.world_corners.size(); ++i) check_point(c.world_corners[i], where + ".world_corners");
    for (std::size_t i = 0; i < c.sliding_corners.size(); ++i) {
      check_point(c.sliding_corners[i], where + ".sliding_corners");
    }
    for (std::size_t i = 0; i < c.dots.size(); ++i) {
      const std::string w = where + ".dots[" + std::to_string(i) + "]";
      if (!ids.count(c.dots[i].beam)) throw CalibError(ErrorCode::Validation, w + ".beam: unknown beam id");
      check_point(c.dots[i].x, w);
    }
  }
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const auto& f = frames[k];
    const std::string where = "frames[" + std::to_string(k) + "]";
    if (static_cast<int>(f.corners.size()) != scene.world_board.size()) {
      throw CalibError(ErrorCode::Validation, where + ".corners: expected " +
                                                  std::to_string(scene.world_board.size()) + " corners");
    }
    for (const auto& p : f.corners) check_point(p, where + ".corners");
    for (std::size_t i = 0; i < f.dots.size(); ++i) {
      const std::string w = where + ".dots[" + std::to_string(i) + "]";
      if (!ids.count(f.dots[i].beam)) throw CalibError(ErrorCode::Validation, w + ".beam: unknown beam id");
      if (!std::isfinite(f.dots[i].t)) throw CalibError(ErrorCode::Validation, w + ".t: non-finite");
      check_point(f.dots[i].x, w);
    }
  }
  if (!hall_actual.empty()) hall_actual.validate();
  if (!hall_background.empty()) hall_background.validate();
}

}  // namespace msm

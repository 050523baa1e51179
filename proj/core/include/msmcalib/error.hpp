#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace msm {

enum class ErrorCode {
  // geometry
  ParallelLinePlane,
  NearBranchCut,
  // camera
  BehindCamera,
  DegenerateConfig,
  RayParallelToPlane,
  EmptyBlob,
  // beams
  DegenerateLine,
  TooFewPoints,
  InsufficientCaptures,
  PointOnLine,
  // mirror pose
  DegenerateSpanningAngle,
  Retroreflection,
  SkewLines,
  NoConvergence,
  SingularNormalEquations,
  // home frame
  RankDeficient,
  PencilDegenerate,
  // hall
  OutOfRange,
  NoOverlap,
  InsufficientData,
  RankDeficientRegressors,
  FrequencyEstimationFailed,
  // simulator
  NoPulses,
  DotOffBoard,
  // io / cli
  Validation,
};

std::string_view to_string(ErrorCode code) noexcept;

/// True for errors that indicate bad input data rather than a numerical failure.
bool is_validation_error(ErrorCode code) noexcept;

class CalibError : public std::runtime_error {
 public:
  CalibError(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace msm

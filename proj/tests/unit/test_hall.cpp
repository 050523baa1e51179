#include <cmath>
#include <functional>

#include <gtest/gtest.h>

#include "msmcalib/error.hpp"
#include "msmcalib/hall.hpp"

using namespace msm;

namespace {

constexpr double kDt = 3.7e-3;
const Vec3 kFreq(3.0, 5.0, 7.0);
const Vec3 kPhase(0.0, 1.2, -0.4);

Vec3 field(double t) {
  Vec3 b;
  for (int k = 0; k < 3; ++k) b(k) = (1.0 + k) * std::sin(2.0 * kPi * kFreq(k) * t + kPhase(k)) + 0.1 * k;
  return b;
}

HallSeries sample(double t0, double t1, double rate) {
  HallSeries s;
  const int n = static_cast<int>(std::round((t1 - t0) * rate));
  for (int i = 0; i <= n; ++i) {
    const double t = t0 + i / rate;
    s.t.push_back(t);
    s.B.push_back(field(t));
  }
  return s;
}

Eigen::Matrix<double, 3, 4> truth_A() {
  Eigen::Matrix<double, 3, 4> A;
  A << 0.8, -0.1, 0.05, 0.3,
       0.2, 1.5, -0.3, -0.7,
       0.01, 0.02, 0.4, 0.1;
  return A;
}

std::vector<PoseSample> poses_from(const std::function<Vec3(double)>& z, double t0, double t1, double rate) {
  std::vector<PoseSample> out;
  const Eigen::Matrix<double, 3, 4> A = truth_A();
  for (double t = t0; t <= t1 + 1e-12; t += 1.0 / rate) {
    Eigen::Vector4d r;
    r << z(t + kDt), 1.0;
    out.push_back({t, A * r});
  }
  return out;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const CalibError& e) {
    return e.code();
  }
  ADD_FAILURE() << "no CalibError thrown";
  return ErrorCode::Validation;
}

}  // namespace

TEST(Interpolate, ExactAtSamplesAndLinearBetween) {
  const HallSeries s = sample(0.0, 1.0, 100.0);
  for (std::size_t i = 0; i < s.size(); i += 7) EXPECT_LT((interpolate(s, s.t[i]) - s.B[i]).norm(), 1e-15);
  const double mid = 0.5 * (s.t[10] + s.t[11]);
  EXPECT_LT((interpolate(s, mid) - 0.5 * (s.B[10] + s.B[11])).norm(), 1e-14);
  // second-order bound for a sampled sinusoid: (2 pi f h)^2 / 8 times the amplitude
  for (double t = 0.0; t < 1.0; t += 0.00317) {
    const Vec3 e = interpolate(s, t) - field(t);
    for (int k = 0; k < 3; ++k) {
      const double w = 2.0 * kPi * kFreq(k) * 0.01;
      EXPECT_LE(std::abs(e(k)), (1.0 + k) * w * w / 8.0 + 1e-12);
    }
  }
  EXPECT_EQ(code_of([&] { interpolate(s, -1e-6); }), ErrorCode::OutOfRange);
  EXPECT_EQ(code_of([&] { interpolate(s, 1.0 + 1e-6); }), ErrorCode::OutOfRange);
  EXPECT_EQ(code_of([&] { interpolate(HallSeries{}, 0.0); }), ErrorCode::OutOfRange);
}

TEST(Series, ValidateRejectsBadTime) {
  HallSeries s = sample(0.0, 0.1, 100.0);
  EXPECT_NO_THROW(s.validate());
  s.t[3] = s.t[2];
  EXPECT_EQ(code_of([&] { s.validate(); }), ErrorCode::Validation);
  s = sample(0.0, 0.1, 100.0);
  s.B.pop_back();
  EXPECT_EQ(code_of([&] { s.validate(); }), ErrorCode::Validation);
}

TEST(Foreground, SubtractsTheBackground) {
  const HallSeries a = sample(0.0, 1.0, 200.0);
  const HallSeries zero = foreground(a, a);
  ASSERT_EQ(zero.size(), a.size());
  for (const auto& b : zero.B) EXPECT_LT(b.norm(), 1e-15);

  HallSeries bg;
  for (double t : {-0.5, 0.5}) {
    bg.t.push_back(t);
    bg.B.push_back(Vec3(1.0, 2.0, 3.0));
  }
  const HallSeries fg = foreground(a, bg);
  ASSERT_EQ(fg.size(), 101u);
  for (std::size_t i = 0; i < fg.size(); ++i) EXPECT_LT((fg.B[i] - (a.B[i] - Vec3(1, 2, 3))).norm(), 1e-14);

  const HallSeries late = sample(2.0, 3.0, 200.0);
  EXPECT_EQ(code_of([&] { foreground(a, late); }), ErrorCode::NoOverlap);
  EXPECT_EQ(code_of([&] { foreground(a, HallSeries{}); }), ErrorCode::NoOverlap);
}

TEST(ModelKind, StringRoundTrip) {
  EXPECT_EQ(hall_model_kind_from_string(to_string(HallModelKind::Linear)), HallModelKind::Linear);
  EXPECT_EQ(hall_model_kind_from_string(to_string(HallModelKind::Sine)), HallModelKind::Sine);
  EXPECT_EQ(code_of([] { hall_model_kind_from_string("cubic"); }), ErrorCode::Validation);
}

TEST(FitLinear, RecoversMatrixAndTimeOffset) {
  const HallSeries s = sample(0.0, 2.0, 1000.0);
  const auto poses = poses_from(field, 0.2, 1.8, 37.0);
  const HallModel m = fit_linear(poses, s);
  EXPECT_NEAR(m.dt, kDt, 2e-5);
  EXPECT_LT((m.A - truth_A()).norm(), 1e-2 * truth_A().norm());
  EXPECT_LT(hall_rmse(m, poses, s).maxCoeff(), 1e-3);

  HallModel shifted = m;
  for (double d : {-1e-3, 1e-3}) {
    shifted.dt = m.dt + d;
    EXPECT_LT(hall_objective(m, poses, s), hall_objective(shifted, poses, s));
  }
}

TEST(FitLinear, Failures) {
  const HallSeries s = sample(0.0, 2.0, 1000.0);
  const auto poses = poses_from(field, 0.2, 1.8, 37.0);
  EXPECT_EQ(code_of([&] { fit_linear(std::span(poses).first(7), s); }), ErrorCode::InsufficientData);

  HallSeries flat = s;
  for (auto& b : flat.B) b = Vec3(1, 2, 3);
  EXPECT_EQ(code_of([&] { fit_linear(poses, flat); }), ErrorCode::RankDeficientRegressors);

  const HallSeries short_series = sample(5.0, 6.0, 1000.0);
  EXPECT_EQ(code_of([&] { fit_linear(poses, short_series); }), ErrorCode::OutOfRange);
}

TEST(Sinusoid, FitRecoversParameters) {
  std::vector<double> t, y;
  for (int i = 0; i < 2000; ++i) {
    t.push_back(0.3 + i * 1e-3);
    y.push_back(2.5 * std::sin(2.0 * kPi * 13.7 * t.back() + 0.9) - 0.4);
  }
  const SinusoidFit f = fit_sinusoid(t, y);
  EXPECT_NEAR(f.f, 13.7, 1e-6);
  EXPECT_NEAR(f.amplitude, 2.5, 1e-6);
  EXPECT_NEAR(f.offset, -0.4, 1e-6);
  EXPECT_NEAR(std::remainder(f.phase - 0.9, 2.0 * kPi), 0.0, 1e-5);
  EXPECT_GT(f.peak_db, 20.0);
  EXPECT_NEAR(std::remainder(fit_phase(t, y, 13.7) - 0.9, 2.0 * kPi), 0.0, 1e-9);

  const std::vector<double> flat(t.size(), 1.0);
  EXPECT_EQ(code_of([&] { fit_sinusoid(t, flat); }), ErrorCode::FrequencyEstimationFailed);
  EXPECT_EQ(code_of([&] { fit_sinusoid(std::span(t).first(10), std::span(y).first(10)); }),
            ErrorCode::InsufficientData);
}

TEST(FitSine, RecoversTimeOffset) {
  const HallSeries s = sample(0.0, 2.0, 1000.0);
  auto z = [](double t) {
    Vec3 v;
    for (int k = 0; k < 3; ++k) v(k) = std::sin(2.0 * kPi * kFreq(k) * t + kPhase(k));
    return v;
  };
  const auto poses = poses_from(z, 0.2, 1.8, 37.0);
  const Vec3 f = estimate_frequencies(s);
  EXPECT_LT((f - kFreq).norm(), 1e-6);
  const HallModel m = fit_sine(poses, s);
  EXPECT_EQ(m.kind, HallModelKind::Sine);
  EXPECT_NEAR(m.dt, kDt, 1e-5);
  EXPECT_LT(hall_rmse(m, poses, s).maxCoeff(), 1e-4);
}

TEST(EvaluateHall, SplitValidationAndPerfectModel) {
  const HallSeries s = sample(0.0, 4.2, 1000.0);
  const auto poses = poses_from(field, 0.1, 4.0, 25.0);
  HallEvalOptions opt;
  opt.repeats = 3;
  opt.split = 1.0;
  EXPECT_EQ(code_of([&] { evaluate_hall(HallModelKind::Linear, poses, s, opt); }), ErrorCode::InsufficientData);
  opt.split = 0.0;
  EXPECT_EQ(code_of([&] { evaluate_hall(HallModelKind::Linear, poses, s, opt); }), ErrorCode::Validation);

  opt.split = 0.8;
  const HallEvaluation ev = evaluate_hall(HallModelKind::Linear, poses, s, opt);
  ASSERT_EQ(ev.test_rmse.size(), 3u);
  EXPECT_LT(ev.mean.maxCoeff(), 2e-3);
  for (double dt : ev.dt) EXPECT_NEAR(dt, kDt, 1e-4);

  opt.test_shift = Vec3(0.5, 0.0, 0.0);
  const HallEvaluation shifted = evaluate_hall(HallModelKind::Linear, poses, s, opt);
  EXPECT_GT(shifted.mean.maxCoeff(), 0.1);
}

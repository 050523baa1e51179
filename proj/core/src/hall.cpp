#include "msmcalib/hall.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include <Eigen/Dense>
#include <fftw3.h>

#include "msmcalib/error.hpp"

namespace msm {

void HallSeries::validate() const {
  if (t.size() != B.size()) throw CalibError(ErrorCode::Validation, "hall series: time and reading counts differ");
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i]) || !B[i].allFinite()) {
      throw CalibError(ErrorCode::Validation, "hall series: non-finite value at row " + std::to_string(i));
    }
    if (i > 0 && !(t[i] > t[i - 1])) {
      throw CalibError(ErrorCode::Validation, "hall series: time not increasing at row " + std::to_string(i));
    }
  }
}

Vec3 interpolate(const HallSeries& series, double t) {
  if (series.empty() || t < series.t_begin() || t > series.t_end() || !std::isfinite(t)) {
    throw CalibError(ErrorCode::OutOfRange, "time " + std::to_string(t) + " s outside the hall series");
  }
  const auto it = std::upper_bound(series.t.begin(), series.t.end(), t);
  if (it == series.t.end()) return series.B.back();
  const auto i = static_cast<std::size_t>(it - series.t.begin());
  if (i == 0) return series.B.front();
  const double t0 = series.t[i - 1];
  const double t1 = series.t[i];
  const double w = (t - t0) / (t1 - t0);
  return (1.0 - w) * series.B[i - 1] + w * series.B[i];
}

HallSeries foreground(const HallSeries& actual, const HallSeries& background) {
  if (actual.empty() || background.empty()) throw CalibError(ErrorCode::NoOverlap, "empty hall series");
  const double lo = std::max(actual.t_begin(), background.t_begin());
  const double hi = std::min(actual.t_end(), background.t_end());
  HallSeries out;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double t = actual.t[i];
    if (t < lo || t > hi) continue;
    out.t.push_back(t);
    out.B.push_back(actual.B[i] - interpolate(background, t));
  }
  if (out.size() < 2) throw CalibError(ErrorCode::NoOverlap, "actual and background readings do not overlap");
  return out;
}

std::string to_string(HallModelKind kind) { return kind == HallModelKind::Linear ? "linear" : "sine"; }

HallModelKind hall_model_kind_from_string(const std::string& s) {
  if (s == "linear") return HallModelKind::Linear;
  if (s == "sine") return HallModelKind::Sine;
  throw CalibError(ErrorCode::Validation, "unknown hall model '" + s + "'");
}

Eigen::Vector4d HallModel::regressor(double t, const HallSeries& readings) const {
  Eigen::Vector4d z;
  if (kind == HallModelKind::Linear) {
    z.head<3>() = interpolate(readings, t + dt);
  } else {
    for (int k = 0; k < 3; ++k) z(k) = std::sin(2.0 * kPi * f(k) * (t + dt) + phi(k));
  }
  z(3) = 1.0;
  return z;
}

namespace {

double wrap_angle(double a) { return std::remainder(a, 2.0 * kPi); }

struct Design {
  Eigen::MatrixXd Z;
  Eigen::MatrixXd Y;
};

bool build(const HallModel& m, std::span<const PoseSample> poses, const HallSeries& readings, Design& d) {
  const auto n = static_cast<Eigen::Index>(poses.size());
  d.Z.resize(n, 4);
  d.Y.resize(n, 3);
  try {
    for (Eigen::Index j = 0; j < n; ++j) {
      d.Z.row(j) = m.regressor(poses[static_cast<std::size_t>(j)].t, readings).transpose();
      d.Y.row(j) = poses[static_cast<std::size_t>(j)].pose.transpose();
    }
  } catch (const CalibError& e) {
    if (e.code() == ErrorCode::OutOfRange) return false;
    throw;
  }
  return true;
}

bool well_conditioned(const Eigen::MatrixXd& Z) {
  Eigen::MatrixXd Zs = Z;
  for (Eigen::Index c = 0; c < Zs.cols(); ++c) {
    const double s = Zs.col(c).norm();
    if (s <= 0.0) return false;
    Zs.col(c) /= s;
  }
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(Zs).singularValues();
  return sv(sv.size() - 1) > 1e-10 * sv(0);
}

// Returns the objective, or +inf when dt is infeasible; fills A.
double solve_at(HallModel& m, std::span<const PoseSample> poses, const HallSeries& readings, bool& rank_ok) {
  Design d;
  rank_ok = true;
  if (!build(m, poses, readings, d)) return std::numeric_limits<double>::infinity();
  if (!well_conditioned(d.Z)) {
    rank_ok = false;
    return std::numeric_limits<double>::infinity();
  }
  const Eigen::MatrixXd X = d.Z.colPivHouseholderQr().solve(d.Y);
  m.A = X.transpose();
  return (d.Z * X - d.Y).rowwise().norm().sum();
}

HallModel fit_dt(HallModel m, std::span<const PoseSample> poses, const HallSeries& readings,
                 const HallFitOptions& options) {
  if (poses.size() < 8) throw CalibError(ErrorCode::InsufficientData, "hall fit needs at least 8 poses");
  if (!(options.dt_bound >= 0.0) || !(options.grid_step > 0.0)) {
    throw CalibError(ErrorCode::Validation, "invalid time-offset search range");
  }
  const int half = static_cast<int>(std::ceil(options.dt_bound / options.grid_step - 1e-9));
  const double step = half > 0 ? options.dt_bound / half : options.grid_step;

  double best = std::numeric_limits<double>::infinity();
  double best_dt = 0.0;
  bool any_rank_ok = false;
  bool any_feasible = false;
  for (int i = -half; i <= half; ++i) {
    m.dt = i * step;
    bool rank_ok = true;
    const double obj = solve_at(m, poses, readings, rank_ok);
    if (rank_ok) any_rank_ok = true;
    if (std::isfinite(obj)) any_feasible = true;
    if (obj < best) {
      best = obj;
      best_dt = m.dt;
    }
  }
  if (!any_feasible) {
    if (!any_rank_ok) throw CalibError(ErrorCode::RankDeficientRegressors, "hall regressors are rank deficient");
    throw CalibError(ErrorCode::OutOfRange, "no time offset keeps every pose inside the hall series");
  }

  auto eval = [&](double dt) {
    HallModel tmp = m;
    tmp.dt = dt;
    bool rank_ok = true;
    return solve_at(tmp, poses, readings, rank_ok);
  };
  if (half > 0) {
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = std::max(best_dt - step, -options.dt_bound);
    double b = std::min(best_dt + step, options.dt_bound);
    double c = b - g * (b - a);
    double d = a + g * (b - a);
    double fc = eval(c);
    double fd = eval(d);
    while (b - a > options.golden_tol) {
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - g * (b - a);
        fc = eval(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + g * (b - a);
        fd = eval(d);
      }
    }
    const double mid = 0.5 * (a + b);
    const double fm = eval(mid);
    if (fm < best) {
      best = fm;
      best_dt = mid;
    }
  }
  m.dt = best_dt;
  bool rank_ok = true;
  solve_at(m, poses, readings, rank_ok);
  return m;
}

}  // namespace

SinusoidFit fit_sinusoid(std::span<const double> t, std::span<const double> y) {
  const std::size_t n = t.size();
  if (n < 16 || y.size() != n) throw CalibError(ErrorCode::InsufficientData, "sinusoid fit needs at least 16 samples");
  const double span = t[n - 1] - t[0];
  const double ts = span / static_cast<double>(n - 1);
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);

  std::vector<double> in(n);
  for (std::size_t i = 0; i < n; ++i) in[i] = y[i] - mean;
  const std::size_t nc = n / 2 + 1;
  fftw_complex* out = fftw_alloc_complex(nc);
  fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), out, FFTW_ESTIMATE);
  fftw_execute(plan);
  std::vector<double> power(nc);
  for (std::size_t k = 0; k < nc; ++k) power[k] = out[k][0] * out[k][0] + out[k][1] * out[k][1];
  fftw_destroy_plan(plan);
  fftw_free(out);

  std::size_t kmax = 1;
  for (std::size_t k = 1; k < nc; ++k)
    if (power[k] > power[kmax]) kmax = k;
  std::vector<double> rest(power.begin() + 1, power.end());
  std::nth_element(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(rest.size() / 2), rest.end());
  const double median = std::max(rest[rest.size() / 2], 1e-300);
  SinusoidFit fit;
  fit.peak_db = 10.0 * std::log10(std::max(power[kmax], 1e-300) / median);
  if (!(fit.peak_db >= 6.0)) {
    throw CalibError(ErrorCode::FrequencyEstimationFailed,
                     "no dominant spectral peak (" + std::to_string(fit.peak_db) + " dB above median)");
  }
  double delta = 0.0;
  if (kmax + 1 < nc) {
    const double a = std::log(std::max(power[kmax - 1], 1e-300));
    const double b = std::log(power[kmax]);
    const double c = std::log(std::max(power[kmax + 1], 1e-300));
    const double den = a - 2.0 * b + c;
    if (den < 0.0) delta = std::clamp(0.5 * (a - c) / den, -0.5, 0.5);
  }
  double f = (static_cast<double>(kmax) + delta) / (static_cast<double>(n) * ts);

  const double tm = 0.5 * (t[0] + t[n - 1]);
  Eigen::Vector4d p;  // a (sin), b (cos), c, f
  auto linear_fit = [&](double freq) {
    Eigen::MatrixXd Z(static_cast<Eigen::Index>(n), 3);
    Eigen::VectorXd Y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const double w = 2.0 * kPi * freq * (t[i] - tm);
      Z.row(static_cast<Eigen::Index>(i)) << std::sin(w), std::cos(w), 1.0;
      Y(static_cast<Eigen::Index>(i)) = y[i];
    }
    return Eigen::Vector3d(Z.colPivHouseholderQr().solve(Y));
  };
  p.head<3>() = linear_fit(f);
  p(3) = f;
  auto sse = [&](const Eigen::Vector4d& q) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = 2.0 * kPi * q(3) * (t[i] - tm);
      const double r = q(0) * std::sin(w) + q(1) * std::cos(w) + q(2) - y[i];
      s += r * r;
    }
    return s;
  };
  double cost = sse(p);
  for (int it = 0; it < 50; ++it) {
    Eigen::Matrix4d H = Eigen::Matrix4d::Zero();
    Eigen::Vector4d g = Eigen::Vector4d::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      const double dti = t[i] - tm;
      const double w = 2.0 * kPi * p(3) * dti;
      const double s = std::sin(w);
      const double c = std::cos(w);
      const double r = p(0) * s + p(1) * c + p(2) - y[i];
      Eigen::Vector4d J(s, c, 1.0, 2.0 * kPi * dti * (p(0) * c - p(1) * s));
      H += J * J.transpose();
      g += J * r;
    }
    const Eigen::Vector4d step = H.ldlt().solve(-g);
    double scale = 1.0;
    bool improved = false;
    for (int k = 0; k < 20; ++k) {
      const Eigen::Vector4d q = p + scale * step;
      const double cq = sse(q);
      if (cq < cost) {
        p = q;
        cost = cq;
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved || std::abs(scale * step(3)) < 1e-12 * std::max(1.0, std::abs(p(3)))) break;
  }
  f = p(3);
  if (!(f > 0.0)) throw CalibError(ErrorCode::FrequencyEstimationFailed, "refined frequency is not positive");
  fit.f = f;
  fit.amplitude = std::hypot(p(0), p(1));
  fit.offset = p(2);
  fit.phase = wrap_angle(std::atan2(p(1), p(0)) - 2.0 * kPi * f * tm);
  return fit;
}

double fit_phase(std::span<const double> t, std::span<const double> y, double f) {
  const auto n = static_cast<Eigen::Index>(t.size());
  if (n < 3 || y.size() != t.size()) throw CalibError(ErrorCode::InsufficientData, "phase fit needs at least 3 samples");
  const double tm = 0.5 * (t.front() + t.back());
  Eigen::MatrixXd Z(n, 3);
  Eigen::VectorXd Y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = 2.0 * kPi * f * (t[static_cast<std::size_t>(i)] - tm);
    Z.row(i) << std::sin(w), std::cos(w), 1.0;
    Y(i) = y[static_cast<std::size_t>(i)];
  }
  const Eigen::Vector3d p = Z.colPivHouseholderQr().solve(Y);
  return wrap_angle(std::atan2(p(1), p(0)) - 2.0 * kPi * f * tm);
}

Vec3 estimate_frequencies(const HallSeries& series, const std::optional<Vec3>& fallback) {
  Vec3 f;
  std::vector<double> y(series.size());
  for (int k = 0; k < 3; ++k) {
    for (std::size_t i = 0; i < series.size(); ++i) y[i] = series.B[i](k);
    try {
      f(k) = fit_sinusoid(series.t, y).f;
    } catch (const CalibError& e) {
      if (e.code() != ErrorCode::FrequencyEstimationFailed || !fallback) throw;
      f(k) = (*fallback)(k);
    }
  }
  return f;
}

double hall_objective(const HallModel& model, std::span<const PoseSample> poses, const HallSeries& readings) {
  double s = 0.0;
  for (const auto& p : poses) s += (model.predict(p.t, readings) - p.pose).norm();
  return s;
}

HallModel fit_linear(std::span<const PoseSample> poses, const HallSeries& readings, const HallFitOptions& options) {
  HallModel m;
  m.kind = HallModelKind::Linear;
  return fit_dt(m, poses, readings, options);
}

HallModel fit_sine(std::span<const PoseSample> poses, const HallSeries& readings, const HallFitOptions& options) {
  if (poses.size() < 8) throw CalibError(ErrorCode::InsufficientData, "hall fit needs at least 8 poses");
  HallModel m;
  m.kind = HallModelKind::Sine;
  m.f = options.frequencies ? *options.frequencies : estimate_frequencies(readings, options.fallback_frequencies);
  std::vector<double> y(readings.size());
  for (int k = 0; k < 3; ++k) {
    for (std::size_t i = 0; i < readings.size(); ++i) y[i] = readings.B[i](k);
    m.phi(k) = fit_phase(readings.t, y, m.f(k));
  }
  return fit_dt(m, poses, readings, options);
}

HallModel fit_hall(HallModelKind kind, std::span<const PoseSample> poses, const HallSeries& readings,
                   const HallFitOptions& options) {
  return kind == HallModelKind::Linear ? fit_linear(poses, readings, options) : fit_sine(poses, readings, options);
}

Vec3 hall_rmse(const HallModel& model, std::span<const PoseSample> poses, const HallSeries& readings) {
  if (poses.empty()) throw CalibError(ErrorCode::InsufficientData, "no poses to evaluate");
  Vec3 s = Vec3::Zero();
  for (const auto& p : poses) s += (model.predict(p.t, readings) - p.pose).cwiseAbs2();
  return (s / static_cast<double>(poses.size())).cwiseSqrt();
}

HallEvaluation evaluate_hall(HallModelKind kind, std::span<const PoseSample> poses, const HallSeries& readings,
                             const HallEvalOptions& options) {
  const std::size_t n = poses.size();
  if (!(options.split > 0.0) || options.split > 1.0 || options.repeats < 1) {
    throw CalibError(ErrorCode::Validation, "split must be in (0, 1] and repeats >= 1");
  }
  const auto n_train = static_cast<std::size_t>(std::floor(options.split * static_cast<double>(n) + 1e-9));
  if (n_train < 8 || n_train >= n) {
    throw CalibError(ErrorCode::InsufficientData, "split leaves " + std::to_string(n_train) + " training and " +
                                                      std::to_string(n - std::min(n, n_train)) + " test poses");
  }
  std::vector<PoseSample> sorted(poses.begin(), poses.end());
  std::sort(sorted.begin(), sorted.end(), [](const PoseSample& a, const PoseSample& b) { return a.t < b.t; });

  std::vector<std::size_t> owner(readings.size());
  for (std::size_t i = 0; i < readings.size(); ++i) {
    const double t = readings.t[i];
    auto it = std::lower_bound(sorted.begin(), sorted.end(), t, [](const PoseSample& p, double v) { return p.t < v; });
    std::size_t j = static_cast<std::size_t>(it - sorted.begin());
    if (j == n) j = n - 1;
    else if (j > 0 && (t - sorted[j - 1].t) <= (sorted[j].t - t)) j = j - 1;
    owner[i] = j;
  }

  HallFitOptions fit = options.fit;
  if (kind == HallModelKind::Sine && !fit.frequencies) {
    fit.frequencies = estimate_frequencies(readings, fit.fallback_frequencies);
  }

  HallEvaluation out;
  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> perm(n);
  for (int r = 0; r < options.repeats; ++r) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n - 1; i > 0; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i);
      std::swap(perm[i], perm[pick(rng)]);
    }
    std::vector<bool> is_train(n, false);
    for (std::size_t i = 0; i < n_train; ++i) is_train[perm[i]] = true;
    std::vector<PoseSample> train, test;
    for (std::size_t j = 0; j < n; ++j) (is_train[j] ? train : test).push_back(sorted[j]);
    HallSeries rtrain, rtest;
    for (std::size_t i = 0; i < readings.size(); ++i) {
      HallSeries& dst = is_train[owner[i]] ? rtrain : rtest;
      dst.t.push_back(readings.t[i]);
      dst.B.push_back(is_train[owner[i]] ? readings.B[i] : Vec3(readings.B[i] + options.test_shift));
    }
    if (rtrain.size() < 2 || rtest.size() < 2) {
      throw CalibError(ErrorCode::InsufficientData, "too few hall readings on one side of the split");
    }
    const HallModel model = fit_hall(kind, train, rtrain, fit);
    out.train_rmse.push_back(hall_rmse(model, train, rtrain));
    out.test_rmse.push_back(hall_rmse(model, test, rtest));
    out.dt.push_back(model.dt);
  }
  for (const auto& v : out.test_rmse) out.mean += v;
  out.mean /= static_cast<double>(out.test_rmse.size());
  for (const auto& v : out.test_rmse) out.sd += (v - out.mean).cwiseAbs2();
  if (out.test_rmse.size() > 1) out.sd = (out.sd / static_cast<double>(out.test_rmse.size() - 1)).cwiseSqrt();
  else out.sd.setZero();
  return out;
}

}  // namespace msm

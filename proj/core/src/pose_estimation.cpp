#include "msmcalib/pose_estimation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "msmcalib/error.hpp"
#include "msmcalib/factors.hpp"

namespace msm {

namespace {

// Closest points between lines p + s u and q + t w (unit directions).
std::pair<Point3, Point3> closest_points(const Point3& p, const Vec3& u, const Point3& q, const Vec3& w) {
  const Vec3 r = p - q;
  const double b = u.dot(w);
  const double den = 1.0 - b * b;
  const double d = u.dot(r);
  const double e = w.dot(r);
  const double s = (b * e - d) / den;
  const double t = (e - b * d) / den;
  return {p + s * u, q + t * w};
}

}  // namespace

PlaneH init_mirror_plane(const std::array<PluckerLine, 2>& beams, const std::array<Point3, 2>& dots) {
  std::array<Vec3, 2> nl;
  for (int i = 0; i < 2; ++i) {
    try {
      nl[i] = lightpath_normal(beams[i], dots[i]);
    } catch (const CalibError&) {
      throw CalibError(ErrorCode::Retroreflection, "dot " + std::to_string(i) + " is collinear with its beam");
    }
  }
  Vec3 n = nl[0].cross(nl[1]);
  if (n.norm() <= std::sin(deg2rad(kMinSpanningAngleDeg))) {
    throw CalibError(ErrorCode::DegenerateSpanningAngle,
                     "spanning angle " + std::to_string(rad2deg(std::asin(std::min(1.0, n.norm())))) + " deg");
  }
  n.normalize();
  const Vec3& v = beams[0].v;
  if (n.dot(v) > 0.0) n = -n;
  if (std::abs(n.dot(v)) > 1.0 - 1e-12) {
    throw CalibError(ErrorCode::Retroreflection, "beam is parallel to the mirror normal");
  }
  const auto [on_beam, on_normal] = closest_points(beams[0].foot(), v, dots[0], n);
  const double gap = (on_beam - on_normal).norm();
  if (gap > kMaxSkewGapMm) {
    throw CalibError(ErrorCode::SkewLines, "beam and mirror-normal line miss by " + std::to_string(gap) + " mm");
  }
  const Point3 virtual_dot = 0.5 * (on_beam + on_normal);
  const Point3 mid = 0.5 * (dots[0] + virtual_dot);
  return PlaneH::through_point(n, mid);
}

double spanning_angle_deg(const PluckerLine& L1, const Point3& X1, const PluckerLine& L2, const Point3& X2) {
  const Vec3 n1 = lightpath_normal(L1, X1);
  const Vec3 n2 = lightpath_normal(L2, X2);
  const double theta = axis_angle_between(n1, n2);
  if (theta < 1e-9) throw CalibError(ErrorCode::DegenerateSpanningAngle, "light-path normals coincide");
  return rad2deg(theta);
}

PlaneH baseline_pure_rotation(const PluckerLine& beam, const Point3& dot, const Point3& rotation_center) {
  const Point3 foot = beam.foot();
  const Point3 C = foot + (rotation_center - foot).dot(beam.v) * beam.v;
  const Vec3 r = dot - C;
  if (r.norm() < 1e-12) throw CalibError(ErrorCode::Retroreflection, "dot coincides with the mirror point");
  const Vec3 bis = r.normalized() - beam.v;
  if (bis.norm() < 1e-12) throw CalibError(ErrorCode::Retroreflection, "beam passes the mirror undeflected");
  return PlaneH::through_point(bis.normalized(), C);
}

std::vector<Pulse> collect_pulses(const std::vector<ScanFrame>& frames) {
  std::map<int, Pulse> by_id;
  for (const auto& f : frames) {
    for (const auto& d : f.dots) {
      Pulse& p = by_id[d.pulse];
      p.id = d.pulse;
      p.t = d.t;
      p.tag = f.tag;
      if (p.dots.count(d.beam)) {
        throw CalibError(ErrorCode::Validation,
                         "pulse " + std::to_string(d.pulse) + " has two dots for beam " + std::to_string(d.beam));
      }
      p.dots[d.beam] = d.x;
    }
  }
  std::vector<Pulse> out;
  out.reserve(by_id.size());
  for (auto& [id, p] : by_id) out.push_back(std::move(p));
  return out;
}

Mat3 MleSolution::plane_covariance(std::size_t j) const {
  if (covariance.size() == 0) return Mat3::Zero();
  return covariance.block<3, 3>(off_plane[j], off_plane[j]);
}

MleSolution solve_mle(const MleInput& input, const CalibState& init, const lm::Options& options,
                      bool with_covariance) {
  const Dataset& data = *input.data;
  const Scene& sc = data.scene;
  lm::Problem problem;
  MleSolution sol;
  const int b_c1w = problem.add_parameter_block(6);
  const int b_c2w = problem.add_parameter_block(6);
  std::vector<int> b_c1s;
  for (std::size_t l = 0; l < data.captures.size(); ++l) b_c1s.push_back(problem.add_parameter_block(6));
  std::map<int, int> b_beam;
  for (int id : input.estimation_beams) b_beam[id] = problem.add_parameter_block(4);
  std::vector<int> b_plane;
  for (std::size_t j = 0; j < input.pulses.size(); ++j) b_plane.push_back(problem.add_parameter_block(3));

  const std::vector<Point3> world = sc.world_board.corners();
  const std::vector<Point3> sliding = sc.sliding_board.corners();
  for (std::size_t l = 0; l < data.captures.size(); ++l) {
    const SlidingCapture& c = data.captures[l];
    for (std::size_t k = 0; k < c.world_corners.size(); ++k)
      problem.add_factor(std::make_unique<CornerFactor>(c.world_corners[k], world[k], sc.K1, b_c1w));
    for (std::size_t k = 0; k < c.sliding_corners.size(); ++k)
      problem.add_factor(std::make_unique<CornerFactor>(c.sliding_corners[k], sliding[k], sc.K1, b_c1s[l]));
    for (const auto& d : c.dots) {
      const auto it = b_beam.find(d.beam);
      if (it == b_beam.end()) continue;
      problem.add_factor(std::make_unique<SlidingDotFactor>(d.x, sc.K1, it->second, b_c1w, b_c1s[l]));
    }
  }
  for (const auto& f : data.frames) {
    for (std::size_t k = 0; k < f.corners.size(); ++k)
      problem.add_factor(std::make_unique<CornerFactor>(f.corners[k], world[k], sc.K2, b_c2w));
  }
  for (std::size_t j = 0; j < input.pulses.size(); ++j) {
    for (const auto& [beam, x] : input.pulses[j].dots) {
      const auto it = b_beam.find(beam);
      if (it == b_beam.end()) continue;
      problem.add_factor(std::make_unique<ReflectionFactor>(x, sc.K2, b_plane[j], it->second, b_c2w));
    }
  }

  Eigen::VectorXd x(problem.num_parameters());
  x.segment<6>(problem.block_offset(b_c1w)) = to_vector(init.T_C1W);
  x.segment<6>(problem.block_offset(b_c2w)) = to_vector(init.T_C2W);
  for (std::size_t l = 0; l < b_c1s.size(); ++l) x.segment<6>(problem.block_offset(b_c1s[l])) = to_vector(init.T_C1S[l]);
  for (const auto& [id, b] : b_beam) x.segment<4>(problem.block_offset(b)) = to_vector(init.beams.at(id));
  for (std::size_t j = 0; j < b_plane.size(); ++j) x.segment<3>(problem.block_offset(b_plane[j])) = init.planes[j].p;

  sol.summary = problem.solve(x, options);

  sol.off_T_C1W = problem.block_offset(b_c1w);
  sol.off_T_C2W = problem.block_offset(b_c2w);
  sol.state.T_C1W = transform_min_from(x.data() + sol.off_T_C1W);
  sol.state.T_C2W = transform_min_from(x.data() + sol.off_T_C2W);
  for (int b : b_c1s) {
    sol.off_T_C1S.push_back(problem.block_offset(b));
    sol.state.T_C1S.push_back(transform_min_from(x.data() + problem.block_offset(b)));
  }
  for (const auto& [id, b] : b_beam) {
    sol.off_beam[id] = problem.block_offset(b);
    sol.state.beams[id] = line_min_from(x.data() + problem.block_offset(b));
  }
  for (int b : b_plane) {
    sol.off_plane.push_back(problem.block_offset(b));
    sol.state.planes.push_back(plane_min_from(x.data() + problem.block_offset(b)));
  }
  if (with_covariance) sol.covariance = problem.covariance(x, options);
  return sol;
}

PluckerLine heldout_line(const Dataset& data, int beam, const RigidTransformMin& T_C1W,
                         const std::vector<RigidTransformMin>& T_C1S) {
  std::vector<Point3> pts;
  for (std::size_t l = 0; l < data.captures.size(); ++l)
    for (const auto& d : data.captures[l].dots)
      if (d.beam == beam) pts.push_back(sliding_dot_in_world(d.x.uv, T_C1W, T_C1S[l], data.scene.K1));
  const Vec3 away = -Vec3::UnitZ();
  return fit_line_pca(pts, &away).line;
}

HeldoutPrediction heldout_error(const Dataset& data, const PluckerLine& line, const RigidTransformMin& T_C2W,
                                const PlaneH& plane, const ImagePoint& observed) {
  const Point3 P = reflected_point(plane, line);
  HeldoutPrediction out;
  out.predicted = project(T_C2W, data.scene.K2, P);
  out.delta_px = (observed.uv - out.predicted).norm();
  const Point3 Pobs = backproject_to_plane(observed.uv, T_C2W, data.scene.K2, world_plane());
  out.delta_mm = (Pobs - P).norm();
  const double throw_mm = (P - line_plane_intersect(line, plane)).norm();
  out.delta_deg = rad2deg(0.5 * std::atan(out.delta_mm / throw_mm));
  return out;
}

HeldoutPrediction predict_heldout(const Dataset& data, int beam, const MleSolution& sol, std::size_t plane_index,
                                  const ImagePoint& observed) {
  const Intrinsics& K2 = data.scene.K2;
  struct Obs {
    std::size_t capture;
    ImagePoint x;
  };
  std::vector<Obs> obs;
  for (std::size_t l = 0; l < data.captures.size(); ++l)
    for (const auto& d : data.captures[l].dots)
      if (d.beam == beam) obs.push_back({l, d.x});

  const std::size_t nl = sol.state.T_C1S.size();
  const int n_t = 6 + 6 * static_cast<int>(nl);
  const int n_x = 2 * static_cast<int>(obs.size());
  // Line parameters: T_C1W, T_C1S..., held-out sliding pixels.
  Eigen::VectorXd q(n_t + n_x);
  q.head<6>() = to_vector(sol.state.T_C1W);
  for (std::size_t l = 0; l < nl; ++l) q.segment<6>(6 + 6 * static_cast<Eigen::Index>(l)) = to_vector(sol.state.T_C1S[l]);
  for (std::size_t i = 0; i < obs.size(); ++i) q.segment<2>(n_t + 2 * static_cast<Eigen::Index>(i)) = obs[i].x.uv;

  auto line_of = [&](const Eigen::VectorXd& v) {
    std::vector<Point3> pts;
    const RigidTransformMin Tw = transform_min_from(v.data());
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const RigidTransformMin Ts = transform_min_from(v.data() + 6 + 6 * obs[i].capture);
      pts.push_back(sliding_dot_in_world(v.segment<2>(n_t + 2 * static_cast<Eigen::Index>(i)), Tw, Ts, data.scene.K1));
    }
    const Vec3 away = -Vec3::UnitZ();
    return fit_line_pca(pts, &away).line;
  };
  const PluckerLine L = line_of(q);
  const LineMin Lmin = to_min(L);
  Eigen::MatrixXd dL(4, q.size());
  for (Eigen::Index k = 0; k < q.size(); ++k) {
    const double h = k < n_t ? 1e-6 : 1e-4;
    Eigen::VectorXd qp = q, qm = q;
    qp(k) += h;
    qm(k) -= h;
    const LineMin lp = to_min(line_of(qp));
    const LineMin lm_ = to_min(line_of(qm));
    dL.col(k) = (to_vector(lp) - to_vector(lm_)) / (2.0 * h);
  }

  const PlaneMin pmin = sol.state.planes[plane_index];
  const ReflectedDot rd = reflected_dot(pmin, Lmin, sol.state.T_C2W, K2);

  // p = [T_C1W, T_C2W, T_C1S..., plane, held-out sliding pixels]
  const int np = 12 + 6 * static_cast<int>(nl) + 3 + n_x;
  Eigen::MatrixXd Jf = Eigen::MatrixXd::Zero(2, np);
  const Eigen::MatrixXd dLl = rd.d_line * dL;
  Jf.block(0, 0, 2, 6) = dLl.leftCols(6);
  Jf.block(0, 6, 2, 6) = rd.d_camera;
  Jf.block(0, 12, 2, 6 * static_cast<Eigen::Index>(nl)) = dLl.block(0, 6, 2, 6 * static_cast<Eigen::Index>(nl));
  const int o_plane = 12 + 6 * static_cast<int>(nl);
  Jf.block(0, o_plane, 2, 3) = rd.d_plane;
  Jf.block(0, o_plane + 3, 2, n_x) = dLl.rightCols(n_x);

  Eigen::MatrixXd Sp = Eigen::MatrixXd::Zero(np, np);
  if (sol.covariance.size() > 0) {
    std::vector<std::pair<int, int>> idx;  // (offset in p, offset in state) for 6-blocks
    idx.emplace_back(0, sol.off_T_C1W);
    idx.emplace_back(6, sol.off_T_C2W);
    for (std::size_t l = 0; l < nl; ++l) idx.emplace_back(12 + 6 * static_cast<int>(l), sol.off_T_C1S[l]);
    std::vector<std::pair<int, int>> sizes;
    for (const auto& [a, b] : idx) sizes.emplace_back(a, 6);
    idx.emplace_back(o_plane, sol.off_plane[plane_index]);
    sizes.emplace_back(o_plane, 3);
    for (std::size_t a = 0; a < idx.size(); ++a)
      for (std::size_t b = 0; b < idx.size(); ++b)
        Sp.block(idx[a].first, idx[b].first, sizes[a].second, sizes[b].second) =
            sol.covariance.block(idx[a].second, idx[b].second, sizes[a].second, sizes[b].second);
  }
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const int o = o_plane + 3 + 2 * static_cast<int>(i);
    Sp.block<2, 2>(o, o) = obs[i].x.cov;
  }

  HeldoutPrediction out = heldout_error(data, L, sol.state.T_C2W, from_min(pmin), observed);
  const Mat2 S = observed.cov + Jf * Sp * Jf.transpose();
  if (out.delta_px > 1e-12) {
    const Vec2 u = (observed.uv - out.predicted) / out.delta_px;
    out.sigma_px = std::sqrt(std::max(0.0, u.dot(S * u)));
  } else {
    out.sigma_px = std::sqrt(Eigen::SelfAdjointEigenSolver<Mat2>(S).eigenvalues().maxCoeff());
  }
  return out;
}

PoseEstimationResult estimate_poses(const Dataset& data, const BeamReconstruction& beams,
                                    const PoseEstimationOptions& options) {
  const Scene& sc = data.scene;
  PoseEstimationResult res;
  res.holdout_beam = options.holdout_beam;
  if (options.holdout_beam &&
      std::find(sc.beams.begin(), sc.beams.end(), *options.holdout_beam) == sc.beams.end()) {
    throw CalibError(ErrorCode::Validation, "held-out beam " + std::to_string(*options.holdout_beam) +
                                                " is not in the dataset");
  }
  for (int id : sc.beams)
    if (!options.holdout_beam || id != *options.holdout_beam) res.estimation_beams.push_back(id);
  if (res.estimation_beams.size() < 2) {
    throw CalibError(ErrorCode::Validation, "pose estimation needs at least 2 estimation beams");
  }
  for (int id : sc.beams)
    if (!beams.beams.count(id)) throw CalibError(ErrorCode::Validation, "beam " + std::to_string(id) + " has no line");

  std::vector<ImagePoint> img;
  std::vector<Point3> obj;
  const std::vector<Point3> world = sc.world_board.corners();
  for (const auto& f : data.frames) {
    if (f.corners.size() != world.size()) {
      throw CalibError(ErrorCode::Validation, "frame " + std::to_string(f.index) + ": world board corner count mismatch");
    }
    img.insert(img.end(), f.corners.begin(), f.corners.end());
    obj.insert(obj.end(), world.begin(), world.end());
  }
  if (img.empty()) throw CalibError(ErrorCode::InsufficientData, "no scan frames");
  const RigidTransformMin T_C2W = solve_pnp_planar(img, obj, sc.K2).pose;

  MleInput input;
  input.data = &data;
  input.estimation_beams = res.estimation_beams;
  CalibState init;
  init.T_C1W = beams.T_C1W;
  init.T_C2W = T_C2W;
  init.T_C1S = beams.T_C1S;
  for (int id : res.estimation_beams) init.beams[id] = to_min(beams.beams.at(id));

  for (const Pulse& p : collect_pulses(data.frames)) {
    std::vector<int> ids;
    std::vector<Point3> X;
    for (int id : res.estimation_beams) {
      const auto it = p.dots.find(id);
      if (it == p.dots.end()) continue;
      ids.push_back(id);
      X.push_back(backproject_to_plane(it->second.uv, T_C2W, sc.K2, world_plane()));
    }
    if (ids.size() < 2) {
      res.skipped_pulses.push_back(p.id);
      continue;
    }
    std::size_t a = 0, b = 1;
    if (ids.size() > 2) {
      double best = -1.0;
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t k = i + 1; k < ids.size(); ++k) {
          try {
            const double th = spanning_angle_deg(beams.beams.at(ids[i]), X[i], beams.beams.at(ids[k]), X[k]);
            if (th > best) {
              best = th;
              a = i;
              b = k;
            }
          } catch (const CalibError&) {
          }
        }
    }
    try {
      const PlaneH pl = init_mirror_plane({beams.beams.at(ids[a]), beams.beams.at(ids[b])}, {X[a], X[b]});
      init.planes.push_back(to_min(pl));
      input.pulses.push_back(p);
    } catch (const CalibError&) {
      res.skipped_pulses.push_back(p.id);
    }
  }
  if (input.pulses.empty()) throw CalibError(ErrorCode::InsufficientData, "no pulse has two usable beam dots");

  res.mle = solve_mle(input, init, options.lm, options.covariance);
  const CalibState& st = res.mle.state;
  for (const auto& [id, L] : st.beams) res.beams[id] = from_min(L);

  std::optional<PluckerLine> held;
  if (options.holdout_beam) held = heldout_line(data, *options.holdout_beam, st.T_C1W, st.T_C1S);
  const int base_beam = res.estimation_beams.front();

  double theta_sum = 0.0;
  int theta_n = 0;
  for (std::size_t j = 0; j < input.pulses.size(); ++j) {
    const Pulse& p = input.pulses[j];
    PulseEstimate e;
    e.pulse = p.id;
    e.t = p.t;
    e.tag = p.tag;
    e.plane = from_min(st.planes[j]);
    e.cov = res.mle.plane_covariance(j);
    std::vector<int> ids;
    for (int id : res.estimation_beams)
      if (p.dots.count(id)) ids.push_back(id);
    try {
      const PluckerLine& L1 = res.beams.at(ids[0]);
      const PluckerLine& L2 = res.beams.at(ids[1]);
      e.theta_deg = spanning_angle_deg(L1, reflected_point(e.plane, L1), L2, reflected_point(e.plane, L2));
      theta_sum += e.theta_deg;
      ++theta_n;
    } catch (const CalibError&) {
      e.theta_deg = 0.0;
    }
    if (held) {
      const auto it = p.dots.find(*options.holdout_beam);
      if (it != p.dots.end()) {
        e.heldout = predict_heldout(data, *options.holdout_beam, res.mle, j, it->second);
      }
    }
    const auto bit = p.dots.find(base_beam);
    if (bit != p.dots.end()) {
      try {
        const Point3 X = backproject_to_plane(bit->second.uv, st.T_C2W, sc.K2, world_plane());
        e.baseline_plane = baseline_pure_rotation(res.beams.at(base_beam), X, sc.nominal_center);
        if (held) {
          const auto it = p.dots.find(*options.holdout_beam);
          if (it != p.dots.end()) e.baseline_heldout = heldout_error(data, *held, st.T_C2W, *e.baseline_plane, it->second);
        }
      } catch (const CalibError&) {
        e.baseline_plane.reset();
      }
    }
    res.pulses.push_back(std::move(e));
  }
  res.mean_theta_deg = theta_n > 0 ? theta_sum / theta_n : 0.0;
  return res;
}

}  // namespace msm

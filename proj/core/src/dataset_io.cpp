#include "msmcalib/dataset_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "msmcalib/error.hpp"

namespace msm::io {

using json = nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw CalibError(ErrorCode::Validation, msg); }

class Node {
 public:
  Node(const json& j, std::string file, std::string path) : j_(j), file_(std::move(file)), path_(std::move(path)) {}

  [[noreturn]] void fail(const std::string& msg) const { invalid(file_ + ": " + (path_.empty() ? "/" : path_) + ": " + msg); }

  bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }

  Node operator[](const std::string& key) const {
    if (!j_.is_object()) fail("expected an object");
    const auto it = j_.find(key);
    if (it == j_.end()) Node(j_, file_, path_ + "/" + key).fail("missing field");
    return {*it, file_, path_ + "/" + key};
  }
  Node operator[](std::size_t i) const { return {j_.at(i), file_, path_ + "/" + std::to_string(i)}; }

  std::size_t size() const {
    if (!j_.is_array()) fail("expected an array");
    return j_.size();
  }
  bool is_null() const { return j_.is_null(); }
  double num() const {
    if (!j_.is_number()) fail("expected a number");
    const double v = j_.get<double>();
    if (!std::isfinite(v)) fail("expected a finite number");
    return v;
  }
  int integer() const {
    if (!j_.is_number_integer()) fail("expected an integer");
    return j_.get<int>();
  }
  std::uint64_t u64() const {
    if (!j_.is_number_unsigned() && !(j_.is_number_integer() && j_.get<long long>() >= 0)) fail("expected a non-negative integer");
    return j_.get<std::uint64_t>();
  }
  bool boolean() const {
    if (!j_.is_boolean()) fail("expected a boolean");
    return j_.get<bool>();
  }
  std::string str() const {
    if (!j_.is_string()) fail("expected a string");
    return j_.get<std::string>();
  }
  template <int N>
  Eigen::Matrix<double, N, 1> vec() const {
    if (!j_.is_array() || static_cast<int>(j_.size()) != N) fail("expected an array of " + std::to_string(N) + " numbers");
    Eigen::Matrix<double, N, 1> v;
    for (int i = 0; i < N; ++i) v(i) = (*this)[static_cast<std::size_t>(i)].num();
    return v;
  }
  Mat3 mat3() const {
    const auto v = vec<9>();
    Mat3 M;
    M << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), v(8);
    return M;
  }
  std::vector<double> numbers() const {
    std::vector<double> out(size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*this)[i].num();
    return out;
  }

 private:
  const json& j_;
  std::string file_;
  std::string path_;
};

template <typename Derived>
json arr(const Eigen::MatrixBase<Derived>& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) a.push_back(m(r, c));
  }
  return a;
}

json load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) invalid(path.filename().string() + ": cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    invalid(path.filename().string() + ": parse error at byte " + std::to_string(e.byte));
  }
}

void save(const json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) invalid("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Node root(const json& j, const fs::path& path) { return {j, path.filename().string(), ""}; }

// Image point as [u, v, cov_uu, cov_uv, cov_vv].
json point_json(const ImagePoint& p) { return json::array({p.uv.x(), p.uv.y(), p.cov(0, 0), p.cov(0, 1), p.cov(1, 1)}); }

ImagePoint point_from(const Node& n) {
  const auto v = n.vec<5>();
  ImagePoint p;
  p.uv = v.head<2>();
  p.cov << v(2), v(3), v(3), v(4);
  if (p.cov(0, 0) <= 0.0 || p.cov(1, 1) <= 0.0 || p.cov.determinant() <= 0.0) n.fail("covariance is not positive definite");
  return p;
}

json points_json(const std::vector<ImagePoint>& pts) {
  json a = json::array();
  for (const auto& p : pts) a.push_back(point_json(p));
  return a;
}

std::vector<ImagePoint> points_from(const Node& n) {
  std::vector<ImagePoint> out(n.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = point_from(n[i]);
  return out;
}

json intrinsics_json(const Intrinsics& K) {
  return {{"fx_px", K.fx}, {"fy_px", K.fy}, {"cx_px", K.cx}, {"cy_px", K.cy}, {"width_px", K.width}, {"height_px", K.height}};
}

Intrinsics intrinsics_from(const Node& n) {
  Intrinsics K;
  K.fx = n["fx_px"].num();
  K.fy = n["fy_px"].num();
  K.cx = n["cx_px"].num();
  K.cy = n["cy_px"].num();
  K.width = n["width_px"].integer();
  K.height = n["height_px"].integer();
  if (K.fx <= 0.0) n["fx_px"].fail("focal length must be positive");
  if (K.fy <= 0.0) n["fy_px"].fail("focal length must be positive");
  if (K.width < 0) n["width_px"].fail("must be >= 0");
  if (K.height < 0) n["height_px"].fail("must be >= 0");
  return K;
}

json board_json(const CheckerboardSpec& b) { return {{"rows", b.rows}, {"cols", b.cols}, {"cell_mm", b.cell}}; }

CheckerboardSpec board_from(const Node& n) {
  CheckerboardSpec b{n["rows"].integer(), n["cols"].integer(), n["cell_mm"].num()};
  if (b.rows < 2) n["rows"].fail("must be >= 2");
  if (b.cols < 2) n["cols"].fail("must be >= 2");
  if (b.cell <= 0.0) n["cell_mm"].fail("must be positive");
  return b;
}

json rigid_json(const RigidTransform& T) { return {{"R", arr(T.R)}, {"t_mm", arr(T.t)}}; }
RigidTransform rigid_from(const Node& n) { return {n["R"].mat3(), n["t_mm"].vec<3>()}; }

json min_json(const RigidTransformMin& T) { return {{"w_rad", arr(T.w)}, {"t_mm", arr(T.t)}}; }
RigidTransformMin min_from(const Node& n) { return {n["w_rad"].vec<3>(), n["t_mm"].vec<3>()}; }

json line_json(int id, const PluckerLine& L) { return {{"id", id}, {"v", arr(L.v)}, {"m_mm", arr(L.m)}}; }
PluckerLine line_from(const Node& n) {
  PluckerLine L{n["v"].vec<3>(), n["m_mm"].vec<3>()};
  if (std::abs(L.v.norm() - 1.0) > 1e-6) n["v"].fail("direction must be a unit vector");
  return L;
}

json plane_json(const PlaneH& p) { return {{"n", arr(p.n)}, {"d_mm", p.d}}; }
PlaneH plane_from(const Node& n) {
  PlaneH p{n["n"].vec<3>(), n["d_mm"].num()};
  if (std::abs(p.n.norm() - 1.0) > 1e-6) n["n"].fail("normal must be a unit vector");
  return p;
}

json heldout_json(const HeldoutPrediction& h) {
  return {{"delta_px", h.delta_px},
          {"sigma_px", h.sigma_px},
          {"delta_mm", h.delta_mm},
          {"delta_deg", h.delta_deg},
          {"predicted_px", arr(h.predicted)}};
}

HeldoutPrediction heldout_from(const Node& n) {
  HeldoutPrediction h;
  h.delta_px = n["delta_px"].num();
  h.sigma_px = n["sigma_px"].num();
  h.delta_mm = n["delta_mm"].num();
  h.delta_deg = n["delta_deg"].num();
  h.predicted = n["predicted_px"].vec<2>();
  return h;
}

FrameTag tag_from(const Node& n) {
  const std::string s = n.str();
  if (s != "home" && s != "fast" && s != "full") n.fail("expected one of home, fast, full");
  return frame_tag_from_string(s);
}

// Optional overrides for config reading.
void opt(const Node& n, const char* key, double& v) {
  if (n.has(key)) v = n[key].num();
}
void opt(const Node& n, const char* key, int& v) {
  if (n.has(key)) v = n[key].integer();
}
void opt(const Node& n, const char* key, bool& v) {
  if (n.has(key)) v = n[key].boolean();
}
void opt(const Node& n, const char* key, Vec3& v) {
  if (n.has(key)) v = n[key].vec<3>();
}
void opt(const Node& n, const char* key, std::vector<double>& v) {
  if (n.has(key)) v = n[key].numbers();
}

}  // namespace

void write_hall_csv(const HallSeries& series, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) invalid("cannot write " + path.string());
  out << "t,bx,by,bz\n" << std::setprecision(17);
  for (std::size_t i = 0; i < series.size(); ++i) {
    out << series.t[i] << ',' << series.B[i].x() << ',' << series.B[i].y() << ',' << series.B[i].z() << '\n';
  }
}

HallSeries read_hall_csv(const fs::path& path) {
  const std::string name = path.filename().string();
  std::ifstream in(path);
  if (!in) invalid(name + ": cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) invalid(name + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t,bx,by,bz") invalid(name + ": line 1: expected header t,bx,by,bz");
  HallSeries s;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<double, 4> v{};
    std::stringstream ss(line);
    std::string cell;
    int k = 0;
    while (std::getline(ss, cell, ',')) {
      if (k >= 4) invalid(name + ": line " + std::to_string(lineno) + ": expected 4 columns");
      try {
        std::size_t used = 0;
        v[static_cast<std::size_t>(k)] = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        invalid(name + ": line " + std::to_string(lineno) + ": column " + std::to_string(k + 1) + ": not a number");
      }
      ++k;
    }
    if (k != 4) invalid(name + ": line " + std::to_string(lineno) + ": expected 4 columns");
    s.t.push_back(v[0]);
    s.B.emplace_back(v[1], v[2], v[3]);
  }
  try {
    s.validate();
  } catch (const CalibError& e) {
    invalid(name + ": " + e.what());
  }
  return s;
}

void write_dataset(const Dataset& data, const fs::path& dir) {
  fs::create_directories(dir);
  const Scene& sc = data.scene;
  json scene = {{"K1", intrinsics_json(sc.K1)},
                {"K2", intrinsics_json(sc.K2)},
                {"world_board", board_json(sc.world_board)},
                {"sliding_board", board_json(sc.sliding_board)},
                {"beams", sc.beams},
                {"nominal_center_mm", arr(sc.nominal_center)},
                {"drives", {{"fast_hz", sc.drives.fast_hz}, {"slow_hz", sc.drives.slow_hz}}}};
  save(scene, dir / "scene.json");

  json caps = json::array();
  for (const auto& c : data.captures) {
    json dots = json::array();
    for (const auto& d : c.dots) dots.push_back({{"beam", d.beam}, {"x_px", point_json(d.x)}});
    caps.push_back({{"index", c.index},
                    {"world_corners_px", points_json(c.world_corners)},
                    {"sliding_corners_px", points_json(c.sliding_corners)},
                    {"dots", dots}});
  }
  save(json{{"captures", caps}}, dir / "beams.json");

  json frames = json::array();
  for (const auto& f : data.frames) {
    json dots = json::array();
    for (const auto& d : f.dots) {
      dots.push_back({{"beam", d.beam}, {"pulse", d.pulse}, {"t_s", d.t}, {"x_px", point_json(d.x)}});
    }
    frames.push_back({{"index", f.index}, {"tag", to_string(f.tag)}, {"corners_px", points_json(f.corners)}, {"dots", dots}});
  }
  save(json{{"frames", frames}}, dir / "scan.json");

  if (!data.hall_actual.empty()) write_hall_csv(data.hall_actual, dir / "hall_actual.csv");
  if (!data.hall_background.empty()) write_hall_csv(data.hall_background, dir / "hall_background.csv");
}

Dataset read_dataset(const fs::path& dir) {
  Dataset data;
  {
    const json j = load(dir / "scene.json");
    const Node n = root(j, dir / "scene.json");
    data.scene.K1 = intrinsics_from(n["K1"]);
    data.scene.K2 = intrinsics_from(n["K2"]);
    data.scene.world_board = board_from(n["world_board"]);
    data.scene.sliding_board = board_from(n["sliding_board"]);
    const Node beams = n["beams"];
    for (std::size_t i = 0; i < beams.size(); ++i) data.scene.beams.push_back(beams[i].integer());
    data.scene.nominal_center = n["nominal_center_mm"].vec<3>();
    data.scene.drives.fast_hz = n["drives"]["fast_hz"].num();
    data.scene.drives.slow_hz = n["drives"]["slow_hz"].num();
  }
  const auto known_beam = [&](const Node& b) {
    const int id = b.integer();
    if (std::find(data.scene.beams.begin(), data.scene.beams.end(), id) == data.scene.beams.end()) {
      b.fail("beam id " + std::to_string(id) + " is not listed in scene.json");
    }
    return id;
  };
  {
    const json j = load(dir / "beams.json");
    const Node caps = root(j, dir / "beams.json")["captures"];
    for (std::size_t l = 0; l < caps.size(); ++l) {
      const Node c = caps[l];
      SlidingCapture cap;
      cap.index = c["index"].integer();
      cap.world_corners = points_from(c["world_corners_px"]);
      cap.sliding_corners = points_from(c["sliding_corners_px"]);
      if (static_cast<int>(cap.world_corners.size()) != data.scene.world_board.size()) {
        c["world_corners_px"].fail("expected " + std::to_string(data.scene.world_board.size()) + " corners");
      }
      if (static_cast<int>(cap.sliding_corners.size()) != data.scene.sliding_board.size()) {
        c["sliding_corners_px"].fail("expected " + std::to_string(data.scene.sliding_board.size()) + " corners");
      }
      const Node dots = c["dots"];
      for (std::size_t i = 0; i < dots.size(); ++i) {
        cap.dots.push_back({known_beam(dots[i]["beam"]), point_from(dots[i]["x_px"])});
      }
      data.captures.push_back(std::move(cap));
    }
  }
  {
    const json j = load(dir / "scan.json");
    const Node frames = root(j, dir / "scan.json")["frames"];
    for (std::size_t k = 0; k < frames.size(); ++k) {
      const Node f = frames[k];
      ScanFrame sf;
      sf.index = f["index"].integer();
      sf.tag = tag_from(f["tag"]);
      sf.corners = points_from(f["corners_px"]);
      if (static_cast<int>(sf.corners.size()) != data.scene.world_board.size()) {
        f["corners_px"].fail("expected " + std::to_string(data.scene.world_board.size()) + " corners");
      }
      const Node dots = f["dots"];
      for (std::size_t i = 0; i < dots.size(); ++i) {
        const Node d = dots[i];
        sf.dots.push_back({known_beam(d["beam"]), d["pulse"].integer(), d["t_s"].num(), point_from(d["x_px"])});
      }
      data.frames.push_back(std::move(sf));
    }
  }
  const bool has_actual = fs::exists(dir / "hall_actual.csv");
  const bool has_background = fs::exists(dir / "hall_background.csv");
  if (has_actual != has_background) invalid("hall_actual.csv and hall_background.csv must be present together");
  if (has_actual) {
    data.hall_actual = read_hall_csv(dir / "hall_actual.csv");
    data.hall_background = read_hall_csv(dir / "hall_background.csv");
  }
  data.validate();
  return data;
}

sim::SimConfig sim_config_from_string(const std::string& text, const std::string& name) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    invalid(name + ": parse error at byte " + std::to_string(e.byte));
  }
  const Node n(j, name, "");
  if (!j.is_object()) n.fail("expected an object");
  sim::SimConfig cfg;
  if (n.has("seed")) cfg.seed = n["seed"].u64();
  opt(n, "sigma_px", cfg.sigma_px);
  if (cfg.sigma_px < 0.0) n["sigma_px"].fail("must be >= 0");

  if (n.has("scene")) {
    const Node s = n["scene"];
    auto& sc = cfg.scene;
    if (s.has("K1")) sc.K1 = intrinsics_from(s["K1"]);
    if (s.has("K2")) sc.K2 = intrinsics_from(s["K2"]);
    if (s.has("world_board")) sc.world_board = board_from(s["world_board"]);
    if (s.has("sliding_board")) sc.sliding_board = board_from(s["sliding_board"]);
    opt(s, "camera1_position_mm", sc.camera1_position);
    opt(s, "camera1_target_mm", sc.camera1_target);
    opt(s, "camera2_position_mm", sc.camera2_position);
    opt(s, "camera2_target_mm", sc.camera2_target);
    opt(s, "rotation_center_mm", sc.rotation_center);
    opt(s, "home_normal", sc.home_normal);
    opt(s, "fast_axis", sc.fast_axis);
    opt(s, "sliding_heights_mm", sc.sliding_heights_mm);
    opt(s, "sliding_tilt_deg", sc.sliding_tilt_deg);
    opt(s, "nominal_center_offset_mm", sc.nominal_center_offset);
    if (s.has("beams")) {
      const Node b = s["beams"];
      sc.beams.clear();
      for (std::size_t i = 0; i < b.size(); ++i) {
        sim::BeamDef d;
        d.id = b[i]["id"].integer();
        opt(b[i], "incidence_deg", d.incidence_deg);
        opt(b[i], "azimuth_deg", d.azimuth_deg);
        if (b[i].has("aim_offset_mm")) d.aim_offset_mm = b[i]["aim_offset_mm"].vec<2>();
        sc.beams.push_back(d);
      }
      if (sc.beams.size() < 2) b.fail("at least 2 beams are required");
    }
  }
  if (n.has("scan")) {
    const Node s = n["scan"];
    auto& sc = cfg.scan;
    opt(s, "fast_amplitude_deg", sc.fast_amplitude_deg);
    opt(s, "slow_amplitude_deg", sc.slow_amplitude_deg);
    opt(s, "translation_mm", sc.translation_mm);
    opt(s, "fast_hz", sc.fast_hz);
    opt(s, "slow_hz", sc.slow_hz);
    opt(s, "fast_phase_rad", sc.fast_phase_rad);
    opt(s, "slow_phase_rad", sc.slow_phase_rad);
    opt(s, "duration_s", sc.duration_s);
    opt(s, "pulse_constants", sc.pulse_constants);
    opt(s, "max_pulses", sc.max_pulses);
    opt(s, "home_capture", sc.home_capture);
    opt(s, "fast_constants", sc.fast_constants);
    opt(s, "fast_cycles", sc.fast_cycles);
    opt(s, "pulses_per_frame", sc.pulses_per_frame);
    opt(s, "min_dot_separation_px", sc.min_dot_separation_px);
    if (sc.fast_hz <= 0.0) s["fast_hz"].fail("must be positive");
    if (sc.slow_hz <= 0.0) s["slow_hz"].fail("must be positive");
    if (sc.duration_s <= 0.0) s["duration_s"].fail("must be positive");
    if (sc.pulses_per_frame < 1) s["pulses_per_frame"].fail("must be >= 1");
  }
  if (n.has("hall")) {
    const Node s = n["hall"];
    auto& h = cfg.hall;
    opt(s, "enabled", h.enabled);
    if (s.has("mode")) {
      const std::string m = s["mode"].str();
      if (m == "matched") h.mode = sim::HallMode::Matched;
      else if (m == "dipole") h.mode = sim::HallMode::Dipole;
      else s["mode"].fail("expected matched or dipole");
    }
    opt(s, "rate_hz", h.rate_hz);
    opt(s, "margin_s", h.margin_s);
    opt(s, "dt_s", h.dt_s);
    opt(s, "noise", h.noise);
    if (s.has("M")) h.M = s["M"].mat3();
    opt(s, "offset", h.offset);
    opt(s, "coil_fast", h.coil_fast);
    opt(s, "coil_slow", h.coil_slow);
    opt(s, "dipole_scale", h.dipole_scale);
    opt(s, "magnet_depth_mm", h.magnet_depth_mm);
    opt(s, "sensor_position_mm", h.sensor_position);
    if (h.rate_hz <= 0.0) s["rate_hz"].fail("must be positive");
  }
  return cfg;
}

sim::SimConfig read_sim_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) invalid(path.filename().string() + ": cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return sim_config_from_string(ss.str(), path.filename().string());
}

std::string sim_config_to_string(const sim::SimConfig& cfg) {
  const auto& sc = cfg.scene;
  json beams = json::array();
  for (const auto& b : sc.beams) {
    beams.push_back({{"id", b.id},
                     {"incidence_deg", b.incidence_deg},
                     {"azimuth_deg", b.azimuth_deg},
                     {"aim_offset_mm", arr(b.aim_offset_mm)}});
  }
  const auto& s = cfg.scan;
  const auto& h = cfg.hall;
  json j = {{"seed", cfg.seed},
            {"sigma_px", cfg.sigma_px},
            {"scene",
             {{"K1", intrinsics_json(sc.K1)},
              {"K2", intrinsics_json(sc.K2)},
              {"world_board", board_json(sc.world_board)},
              {"sliding_board", board_json(sc.sliding_board)},
              {"camera1_position_mm", arr(sc.camera1_position)},
              {"camera1_target_mm", arr(sc.camera1_target)},
              {"camera2_position_mm", arr(sc.camera2_position)},
              {"camera2_target_mm", arr(sc.camera2_target)},
              {"rotation_center_mm", arr(sc.rotation_center)},
              {"home_normal", arr(sc.home_normal)},
              {"fast_axis", arr(sc.fast_axis)},
              {"beams", beams},
              {"sliding_heights_mm", sc.sliding_heights_mm},
              {"sliding_tilt_deg", sc.sliding_tilt_deg},
              {"nominal_center_offset_mm", arr(sc.nominal_center_offset)}}},
            {"scan",
             {{"fast_amplitude_deg", s.fast_amplitude_deg},
              {"slow_amplitude_deg", s.slow_amplitude_deg},
              {"translation_mm", s.translation_mm},
              {"fast_hz", s.fast_hz},
              {"slow_hz", s.slow_hz},
              {"fast_phase_rad", s.fast_phase_rad},
              {"slow_phase_rad", s.slow_phase_rad},
              {"duration_s", s.duration_s},
              {"pulse_constants", s.pulse_constants},
              {"max_pulses", s.max_pulses},
              {"home_capture", s.home_capture},
              {"fast_constants", s.fast_constants},
              {"fast_cycles", s.fast_cycles},
              {"pulses_per_frame", s.pulses_per_frame},
              {"min_dot_separation_px", s.min_dot_separation_px}}},
            {"hall",
             {{"enabled", h.enabled},
              {"mode", h.mode == sim::HallMode::Matched ? "matched" : "dipole"},
              {"rate_hz", h.rate_hz},
              {"margin_s", h.margin_s},
              {"dt_s", h.dt_s},
              {"noise", h.noise},
              {"M", arr(h.M)},
              {"offset", arr(h.offset)},
              {"coil_fast", arr(h.coil_fast)},
              {"coil_slow", arr(h.coil_slow)},
              {"dipole_scale", h.dipole_scale},
              {"magnet_depth_mm", h.magnet_depth_mm},
              {"sensor_position_mm", arr(h.sensor_position)}}}};
  return j.dump(2) + "\n";
}

void write_ground_truth(const sim::GroundTruth& truth, const fs::path& path) {
  json T_C1S = json::array();
  for (const auto& T : truth.T_C1S) T_C1S.push_back(rigid_json(T));
  json beams = json::array();
  for (const auto& [id, L] : truth.beams) beams.push_back(line_json(id, L));
  json pulses = json::array();
  for (const auto& p : truth.pulses) {
    pulses.push_back({{"pulse", p.id},
                      {"t_s", p.t},
                      {"tag", to_string(p.tag)},
                      {"plane", plane_json(p.plane)},
                      {"alpha_deg", p.pose.alpha_deg},
                      {"beta_deg", p.pose.beta_deg},
                      {"tau_mm", p.pose.tau_mm}});
  }
  save({{"T_C1W", rigid_json(truth.T_C1W)},
        {"T_C2W", rigid_json(truth.T_C2W)},
        {"T_C1S", T_C1S},
        {"beams", beams},
        {"frame", {{"R0", arr(truth.frame.R0)}, {"X_O_mm", arr(truth.frame.X_O)}}},
        {"pulses", pulses},
        {"hall_dt_s", truth.hall_dt},
        {"dropped_dots", truth.dropped_dots},
        {"retroreflections", truth.retroreflections}},
       path);
}

sim::GroundTruth read_ground_truth(const fs::path& path) {
  const json j = load(path);
  const Node n = root(j, path);
  sim::GroundTruth gt;
  gt.T_C1W = rigid_from(n["T_C1W"]);
  gt.T_C2W = rigid_from(n["T_C2W"]);
  const Node s = n["T_C1S"];
  for (std::size_t i = 0; i < s.size(); ++i) gt.T_C1S.push_back(rigid_from(s[i]));
  const Node b = n["beams"];
  for (std::size_t i = 0; i < b.size(); ++i) gt.beams[b[i]["id"].integer()] = line_from(b[i]);
  gt.frame.R0 = n["frame"]["R0"].mat3();
  gt.frame.X_O = n["frame"]["X_O_mm"].vec<3>();
  gt.frame.origin.X = gt.frame.X_O;
  const Node p = n["pulses"];
  for (std::size_t i = 0; i < p.size(); ++i) {
    sim::PulseTruth t;
    t.id = p[i]["pulse"].integer();
    t.t = p[i]["t_s"].num();
    t.tag = tag_from(p[i]["tag"]);
    t.plane = plane_from(p[i]["plane"]);
    t.pose = {p[i]["alpha_deg"].num(), p[i]["beta_deg"].num(), p[i]["tau_mm"].num()};
    gt.pulses.push_back(t);
  }
  gt.hall_dt = n["hall_dt_s"].num();
  gt.dropped_dots = n["dropped_dots"].integer();
  gt.retroreflections = n["retroreflections"].integer();
  return gt;
}

void write_beams(const BeamReconstruction& beams, const fs::path& path) {
  json lines = json::array();
  for (const auto& [id, L] : beams.beams) {
    json l = line_json(id, L);
    l["rms_mm"] = beams.rms_mm.count(id) ? beams.rms_mm.at(id) : 0.0;
    lines.push_back(l);
  }
  json T_C1S = json::array();
  for (const auto& T : beams.T_C1S) T_C1S.push_back(min_json(T));
  save({{"beams", lines}, {"T_C1W", min_json(beams.T_C1W)}, {"T_C1S", T_C1S}}, path);
}

BeamReconstruction read_beams(const fs::path& path) {
  const json j = load(path);
  const Node n = root(j, path);
  BeamReconstruction b;
  const Node lines = n["beams"];
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const int id = lines[i]["id"].integer();
    b.beams[id] = line_from(lines[i]);
    b.rms_mm[id] = lines[i]["rms_mm"].num();
  }
  b.T_C1W = min_from(n["T_C1W"]);
  const Node s = n["T_C1S"];
  for (std::size_t i = 0; i < s.size(); ++i) b.T_C1S.push_back(min_from(s[i]));
  return b;
}

void write_poses(const PosesFile& poses, const fs::path& path) {
  json beams = json::array();
  for (const auto& [id, L] : poses.beams) beams.push_back(line_json(id, L));
  json list = json::array();
  for (const auto& p : poses.poses) {
    json r = {{"pulse", p.pulse},
              {"t_s", p.t},
              {"tag", to_string(p.tag)},
              {"plane", plane_json(p.plane)},
              {"cov", arr(p.cov)},
              {"theta_deg", p.theta_deg}};
    r["heldout"] = p.heldout ? heldout_json(*p.heldout) : json(nullptr);
    r["baseline_heldout"] = p.baseline_heldout ? heldout_json(*p.baseline_heldout) : json(nullptr);
    list.push_back(r);
  }
  save({{"estimation_beams", poses.estimation_beams},
        {"holdout_beam", poses.holdout_beam ? json(*poses.holdout_beam) : json(nullptr)},
        {"beams", beams},
        {"T_C1W", min_json(poses.T_C1W)},
        {"T_C2W", min_json(poses.T_C2W)},
        {"solver", {{"iterations", poses.iterations}, {"final_cost", poses.final_cost}, {"converged", poses.converged}}},
        {"mean_theta_deg", poses.mean_theta_deg},
        {"skipped_pulses", poses.skipped_pulses},
        {"poses", list}},
       path);
}

PosesFile read_poses(const fs::path& path) {
  const json j = load(path);
  const Node n = root(j, path);
  PosesFile f;
  const Node eb = n["estimation_beams"];
  for (std::size_t i = 0; i < eb.size(); ++i) f.estimation_beams.push_back(eb[i].integer());
  if (!n["holdout_beam"].is_null()) f.holdout_beam = n["holdout_beam"].integer();
  const Node beams = n["beams"];
  for (std::size_t i = 0; i < beams.size(); ++i) f.beams[beams[i]["id"].integer()] = line_from(beams[i]);
  f.T_C1W = min_from(n["T_C1W"]);
  f.T_C2W = min_from(n["T_C2W"]);
  f.iterations = n["solver"]["iterations"].integer();
  f.final_cost = n["solver"]["final_cost"].num();
  f.converged = n["solver"]["converged"].boolean();
  f.mean_theta_deg = n["mean_theta_deg"].num();
  const Node sk = n["skipped_pulses"];
  for (std::size_t i = 0; i < sk.size(); ++i) f.skipped_pulses.push_back(sk[i].integer());
  const Node list = n["poses"];
  for (std::size_t i = 0; i < list.size(); ++i) {
    const Node p = list[i];
    PoseRecord r;
    r.pulse = p["pulse"].integer();
    r.t = p["t_s"].num();
    r.tag = tag_from(p["tag"]);
    r.plane = plane_from(p["plane"]);
    r.cov = p["cov"].mat3();
    r.theta_deg = p["theta_deg"].num();
    if (!p["heldout"].is_null()) r.heldout = heldout_from(p["heldout"]);
    if (!p["baseline_heldout"].is_null()) r.baseline_heldout = heldout_from(p["baseline_heldout"]);
    f.poses.push_back(r);
  }
  return f;
}

void write_frame(const FrameFile& frame, const fs::path& path) {
  const auto& o = frame.frame.origin;
  json list = json::array();
  for (const auto& p : frame.poses) {
    list.push_back({{"pulse", p.pulse},
                    {"t_s", p.t},
                    {"tag", to_string(p.tag)},
                    {"alpha_deg", p.pose.alpha_deg},
                    {"beta_deg", p.pose.beta_deg},
                    {"tau_mm", p.pose.tau_mm}});
  }
  save({{"R0", arr(frame.frame.R0)},
        {"X_O_mm", arr(frame.frame.X_O)},
        {"fast_axis_residual", frame.frame.fast_axis_residual},
        {"origin",
         {{"rms_mm", o.rms_mm},
          {"spread_mm", o.spread_mm},
          {"ambiguous_along_axis", o.ambiguous_along_axis},
          {"singular_values", arr(o.singular_values)}}},
        {"poses", list}},
       path);
}

FrameFile read_frame(const fs::path& path) {
  const json j = load(path);
  const Node n = root(j, path);
  FrameFile f;
  f.frame.R0 = n["R0"].mat3();
  f.frame.X_O = n["X_O_mm"].vec<3>();
  f.frame.fast_axis_residual = n["fast_axis_residual"].num();
  const Node o = n["origin"];
  f.frame.origin.X = f.frame.X_O;
  f.frame.origin.rms_mm = o["rms_mm"].num();
  f.frame.origin.spread_mm = o["spread_mm"].num();
  f.frame.origin.ambiguous_along_axis = o["ambiguous_along_axis"].boolean();
  f.frame.origin.singular_values = o["singular_values"].vec<4>();
  const Node list = n["poses"];
  for (std::size_t i = 0; i < list.size(); ++i) {
    const Node p = list[i];
    f.poses.push_back({p["pulse"].integer(), p["t_s"].num(), tag_from(p["tag"]),
                       HomePose{p["alpha_deg"].num(), p["beta_deg"].num(), p["tau_mm"].num()}});
  }
  return f;
}

void write_hall_model(const HallCalibration& cal, const HallEvalOptions& options, const fs::path& path) {
  const auto& m = cal.model;
  json per = json::array();
  for (const auto& v : cal.evaluation.test_rmse) per.push_back(arr(v));
  json j = {{"kind", to_string(m.kind)},
            {"A", arr(m.A)},
            {"dt_s", m.dt},
            {"f_hz", arr(m.f)},
            {"train_rmse", arr(cal.train_rmse)},
            {"test_rmse", arr(cal.evaluation.mean)},
            {"test_rmse_sd", arr(cal.evaluation.sd)},
            {"repeats", options.repeats},
            {"split", options.split},
            {"seed", options.seed},
            {"test_rmse_per_repeat", per}};
  if (m.kind == HallModelKind::Sine) j["phi_rad"] = arr(m.phi);
  save(j, path);
}

HallModelFile read_hall_model(const fs::path& path) {
  const json j = load(path);
  const Node n = root(j, path);
  HallModelFile f;
  const std::string kind = n["kind"].str();
  if (kind != "linear" && kind != "sine") n["kind"].fail("expected linear or sine");
  f.model.kind = hall_model_kind_from_string(kind);
  const auto A = n["A"].vec<12>();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) f.model.A(r, c) = A(4 * r + c);
  }
  f.model.dt = n["dt_s"].num();
  f.model.f = n["f_hz"].vec<3>();
  if (f.model.kind == HallModelKind::Sine) f.model.phi = n["phi_rad"].vec<3>();
  f.train_rmse = n["train_rmse"].vec<3>();
  f.test_rmse = n["test_rmse"].vec<3>();
  f.test_rmse_sd = n["test_rmse_sd"].vec<3>();
  f.repeats = n["repeats"].integer();
  f.split = n["split"].num();
  const Node per = n["test_rmse_per_repeat"];
  for (std::size_t i = 0; i < per.size(); ++i) f.test_rmse_per_repeat.push_back(per[i].vec<3>());
  return f;
}

}  // namespace msm::io

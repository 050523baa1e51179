#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include <gtest/gtest.h>

#include <json.hpp>

#include "msmcalib/dataset_io.hpp"
#include "msmcalib/error.hpp"
#include "test_support.hpp"

using namespace msm;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("msmcalib_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const CalibError& e) {
    EXPECT_EQ(e.code(), ErrorCode::Validation);
    return e.what();
  }
  ADD_FAILURE() << "no CalibError thrown";
  return {};
}

void edit_json(const fs::path& path, const std::function<void(json&)>& fn) {
  json j;
  std::ifstream(path) >> j;
  fn(j);
  std::ofstream(path) << j.dump();
}

sim::SimOutput small_sim() {
  auto cfg = msm::testing::scan_config(2, 12, 0.5, 4);
  cfg.hall.enabled = true;
  cfg.hall.margin_s = 0.1;
  return sim::simulate(cfg);
}

}  // namespace

TEST(DatasetIo, RoundTrip) {
  const auto s = small_sim();
  const fs::path dir = scratch("roundtrip");
  io::write_dataset(s.data, dir);
  const Dataset d = io::read_dataset(dir);
  EXPECT_EQ(d.scene.beams, s.data.scene.beams);
  EXPECT_EQ(d.scene.K2.width, s.data.scene.K2.width);
  EXPECT_DOUBLE_EQ(d.scene.K1.fx, s.data.scene.K1.fx);
  ASSERT_EQ(d.captures.size(), s.data.captures.size());
  ASSERT_EQ(d.frames.size(), s.data.frames.size());
  for (std::size_t k = 0; k < d.frames.size(); ++k) {
    EXPECT_EQ(d.frames[k].tag, s.data.frames[k].tag);
    ASSERT_EQ(d.frames[k].dots.size(), s.data.frames[k].dots.size());
    for (std::size_t i = 0; i < d.frames[k].dots.size(); ++i) {
      EXPECT_EQ(d.frames[k].dots[i].x.uv, s.data.frames[k].dots[i].x.uv);
      EXPECT_EQ(d.frames[k].dots[i].x.cov, s.data.frames[k].dots[i].x.cov);
      EXPECT_EQ(d.frames[k].dots[i].pulse, s.data.frames[k].dots[i].pulse);
    }
  }
  EXPECT_EQ(d.captures[1].sliding_corners.back().uv, s.data.captures[1].sliding_corners.back().uv);
  ASSERT_EQ(d.hall_actual.size(), s.data.hall_actual.size());
  EXPECT_EQ(d.hall_actual.t.back(), s.data.hall_actual.t.back());
  EXPECT_EQ(d.hall_background.B.front(), s.data.hall_background.B.front());
}

TEST(DatasetIo, CorruptFieldNamesItsPath) {
  const auto s = small_sim();
  const fs::path dir = scratch("corrupt");
  io::write_dataset(s.data, dir);
  edit_json(dir / "scene.json", [](json& j) { j["K1"]["fx_px"] = "abc"; });
  const std::string msg = error_of([&] { io::read_dataset(dir); });
  EXPECT_NE(msg.find("scene.json"), std::string::npos) << msg;
  EXPECT_NE(msg.find("/K1/fx_px"), std::string::npos) << msg;

  io::write_dataset(s.data, dir);
  edit_json(dir / "scene.json", [](json& j) { j.erase("K2"); });
  EXPECT_NE(error_of([&] { io::read_dataset(dir); }).find("/K2"), std::string::npos);

  io::write_dataset(s.data, dir);
  std::ofstream(dir / "scan.json") << "{ \"frames\": [";
  EXPECT_NE(error_of([&] { io::read_dataset(dir); }).find("scan.json"), std::string::npos);
}

TEST(HallCsv, RoundTripAndBadCell) {
  HallSeries h;
  for (int i = 0; i < 5; ++i) {
    h.t.push_back(0.001 * i);
    h.B.push_back(Vec3(i, -0.5 * i, 1.0 / 3.0));
  }
  const fs::path dir = scratch("csv");
  io::write_hall_csv(h, dir / "h.csv");
  const HallSeries r = io::read_hall_csv(dir / "h.csv");
  ASSERT_EQ(r.size(), h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    EXPECT_EQ(r.t[i], h.t[i]);
    EXPECT_EQ(r.B[i], h.B[i]);
  }
  std::ofstream(dir / "bad.csv") << "t,bx,by,bz\n0,1,2,3\n0.001,1,x,3\n";
  EXPECT_NE(error_of([&] { io::read_hall_csv(dir / "bad.csv"); }).find("bad.csv"), std::string::npos);
  std::ofstream(dir / "back.csv") << "t,bx,by,bz\n0.1,1,2,3\n0.0,1,2,3\n";
  error_of([&] { io::read_hall_csv(dir / "back.csv"); });
}

TEST(SimConfigIo, MissingFieldsKeepDefaults) {
  const sim::SimConfig cfg = io::sim_config_from_string(R"({"sigma_px": 0.7, "scan": {"max_pulses": 12}})");
  const sim::SimConfig def;
  EXPECT_DOUBLE_EQ(cfg.sigma_px, 0.7);
  EXPECT_EQ(cfg.scan.max_pulses, 12);
  EXPECT_DOUBLE_EQ(cfg.scan.fast_hz, def.scan.fast_hz);
  EXPECT_EQ(cfg.scene.beams.size(), def.scene.beams.size());

  sim::SimConfig other;
  other.seed = 77;
  other.hall.mode = sim::HallMode::Matched;
  other.scene.beams[1].aim_offset_mm = Vec2(0.5, -1.0);
  const sim::SimConfig back = io::sim_config_from_string(io::sim_config_to_string(other));
  EXPECT_EQ(back.seed, 77u);
  EXPECT_EQ(back.hall.mode, sim::HallMode::Matched);
  EXPECT_EQ(back.scene.beams[1].aim_offset_mm, Vec2(0.5, -1.0));
  EXPECT_EQ(io::sim_config_to_string(back), io::sim_config_to_string(other));

  const std::string msg = error_of([] { io::sim_config_from_string(R"({"scan": {"max_pulses": "many"}})", "c.json"); });
  EXPECT_NE(msg.find("/scan/max_pulses"), std::string::npos) << msg;
}

TEST(ResultFiles, PosesAndFrameRoundTrip) {
  PosesFile pf;
  pf.estimation_beams = {0, 1};
  pf.holdout_beam = 2;
  pf.beams[0] = PluckerLine::from_point_direction(Point3(1, 2, 3), Vec3(0, 0.6, -0.8));
  pf.converged = true;
  pf.iterations = 7;
  PoseRecord r;
  r.pulse = 4;
  r.t = 0.125;
  r.tag = FrameTag::Fast;
  r.plane = PlaneH::through_point(Vec3(0.1, 0.0, 1.0).normalized(), Point3(95, 70, -200));
  r.cov = Mat3::Identity() * 1e-6;
  r.heldout = HeldoutPrediction{0.3, 0.5, 0.02, 0.001, Vec2(10, 20)};
  pf.poses.push_back(r);
  const fs::path dir = scratch("results");
  io::write_poses(pf, dir / "poses.json");
  const PosesFile q = io::read_poses(dir / "poses.json");
  EXPECT_EQ(q.estimation_beams, pf.estimation_beams);
  EXPECT_EQ(q.holdout_beam, pf.holdout_beam);
  ASSERT_EQ(q.poses.size(), 1u);
  EXPECT_EQ(q.poses[0].tag, FrameTag::Fast);
  EXPECT_LT((q.poses[0].plane.coeffs() - r.plane.coeffs()).norm(), 1e-12);
  ASSERT_TRUE(q.poses[0].heldout.has_value());
  EXPECT_DOUBLE_EQ(q.poses[0].heldout->delta_px, 0.3);
  EXPECT_LT((q.beams.at(0).m - pf.beams[0].m).norm(), 1e-12);

  FrameFile ff;
  ff.frame = make_home_frame(Vec3(0.02, -0.03, 1), Vec3(1, 0.05, 0), Point3(95, 70, -200));
  ff.poses.push_back({4, 0.125, FrameTag::Full, HomePose{1.0, -2.0, 0.3}});
  io::write_frame(ff, dir / "frame.json");
  const FrameFile g = io::read_frame(dir / "frame.json");
  EXPECT_LT((g.frame.R0 - ff.frame.R0).norm(), 1e-12);
  EXPECT_LT((g.frame.X_O - ff.frame.X_O).norm(), 1e-12);
  ASSERT_EQ(g.poses.size(), 1u);
  EXPECT_LT((g.poses[0].pose.vector() - ff.poses[0].pose.vector()).norm(), 1e-12);
}

TEST(ResultFiles, GroundTruthRoundTrip) {
  const auto s = small_sim();
  const fs::path dir = scratch("truth");
  io::write_ground_truth(s.truth, dir / "gt.json");
  const sim::GroundTruth g = io::read_ground_truth(dir / "gt.json");
  ASSERT_EQ(g.pulses.size(), s.truth.pulses.size());
  EXPECT_LT((g.frame.X_O - s.truth.frame.X_O).norm(), 1e-12);
  EXPECT_LT((g.pulses.back().plane.n - s.truth.pulses.back().plane.n).norm(), 1e-12);
  EXPECT_EQ(g.beams.size(), s.truth.beams.size());
}

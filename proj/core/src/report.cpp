#include "msmcalib/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "msmcalib/dataset_io.hpp"
#include "msmcalib/error.hpp"

namespace msm::report {

namespace fs = std::filesystem;

namespace {

std::string num(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Stats {
  double mean = 0.0;
  double sd = 0.0;
  double max = 0.0;
  std::size_t n = 0;
};

Stats stats(const std::vector<double>& v) {
  Stats s;
  s.n = v.size();
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  for (double x : v) s.sd += (x - s.mean) * (x - s.mean);
  s.sd = v.size() > 1 ? std::sqrt(s.sd / static_cast<double>(v.size() - 1)) : 0.0;
  s.max = *std::max_element(v.begin(), v.end());
  return s;
}

std::string pm(const Stats& s, int prec = 4) { return num(s.mean, prec) + " ± " + num(s.sd, prec); }

void save_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw CalibError(ErrorCode::Validation, "cannot write " + path.string());
  out << text;
}

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

}  // namespace

std::string svg_chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                      const std::vector<Series>& series, bool flip_y) {
  constexpr double W = 640.0, H = 420.0, L = 70.0, R = 130.0, T = 40.0, B = 50.0;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
    for (double v : s.y) y0 = std::min(y0, v), y1 = std::max(y1, v);
  }
  if (!std::isfinite(x0)) x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) {
    const double u = (y - y0) / (y1 - y0);
    return flip_y ? T + u * (H - T - B) : H - B - u * (H - T - B);
  };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title) << "</text>\n";
  o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
    << "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0;
    const double yv = y0 + (y1 - y0) * k / 4.0;
    o << "<text x=\"" << num(px(xv), 1) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << num(xv, 3) << "</text>\n";
    o << "<text x=\"" << L - 6 << "\" y=\"" << num(py(yv) + 4, 1) << "\" text-anchor=\"end\">" << num(yv, 3) << "</text>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << escape(xlabel) << "</text>\n";
  o << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << (T + H - B) / 2 << ")\">" << escape(ylabel) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    if (s.points) {
      o << "<g fill=\"" << s.color << "\">\n";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        o << "<circle cx=\"" << num(px(s.x[i]), 2) << "\" cy=\"" << num(py(s.y[i]), 2) << "\" r=\"1.8\"/>\n";
      }
      o << "</g>\n";
    } else {
      o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.2\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) o << num(px(s.x[i]), 2) << ',' << num(py(s.y[i]), 2) << ' ';
      o << "\"/>\n";
    }
    const double ly = T + 14.0 + 16.0 * static_cast<double>(k);
    o << "<rect x=\"" << W - R + 10 << "\" y=\"" << ly - 8 << "\" width=\"10\" height=\"10\" fill=\"" << s.color << "\"/>\n";
    o << "<text x=\"" << W - R + 26 << "\" y=\"" << ly + 1 << "\">" << escape(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string write_report(const fs::path& run_dir) {
  if (!fs::exists(run_dir / "scene.json") || !fs::exists(run_dir / "scan.json")) {
    throw CalibError(ErrorCode::Validation, "report: " + run_dir.string() + " has no scene.json/scan.json");
  }
  const Dataset data = io::read_dataset(run_dir);
  std::optional<sim::GroundTruth> truth;
  if (fs::exists(run_dir / "ground_truth.json")) truth = io::read_ground_truth(run_dir / "ground_truth.json");
  std::map<int, const sim::PulseTruth*> truth_pulse;
  if (truth) {
    for (const auto& p : truth->pulses) truth_pulse[p.id] = &p;
  }

  std::ostringstream md;
  md << "# msmcalib report\n\n";
  std::size_t n_dots = 0;
  for (const auto& f : data.frames) n_dots += f.dots.size();
  md << "## Dataset\n\n";
  md << "| item | value |\n|---|---|\n";
  md << "| beams | " << data.scene.beams.size() << " |\n";
  md << "| sliding captures | " << data.captures.size() << " |\n";
  md << "| scan frames | " << data.frames.size() << " |\n";
  md << "| reflected dots | " << n_dots << " |\n";
  md << "| Hall samples | " << data.hall_actual.size() << " |\n\n";

  // Scan pattern.
  {
    std::map<int, Series> by_beam;
    for (const auto& f : data.frames) {
      for (const auto& d : f.dots) {
        auto& s = by_beam[d.beam];
        s.x.push_back(d.x.uv.x());
        s.y.push_back(d.x.uv.y());
      }
    }
    std::vector<Series> series;
    std::size_t k = 0;
    for (auto& [id, s] : by_beam) {
      s.label = "beam " + std::to_string(id);
      s.color = kColors[k++ % 6];
      s.points = true;
      series.push_back(std::move(s));
    }
    save_text(run_dir / "scan_pattern.svg", svg_chart("Reflected dots in camera C2", "u (px)", "v (px)", series, true));
    md << "![scan pattern](scan_pattern.svg)\n\n";
  }

  if (fs::exists(run_dir / "beams_est.json")) {
    const auto beams = io::read_beams(run_dir / "beams_est.json");
    md << "## Incident beams\n\n";
    md << "| beam | fit RMS (mm) |";
    if (truth) md << " direction error (deg) | distance to true foot (mm) |";
    md << "\n|---|---|" << (truth ? "---|---|" : "") << "\n";
    for (const auto& [id, L] : beams.beams) {
      md << "| " << id << " | " << num(beams.rms_mm.count(id) ? beams.rms_mm.at(id) : 0.0) << " |";
      if (truth && truth->beams.count(id)) {
        const auto& Lt = truth->beams.at(id);
        md << ' ' << num(rad2deg(axis_angle_between(L.v, Lt.v)), 5) << " | " << num(Lt.distance(L.foot()), 4) << " |";
      }
      md << "\n";
    }
    md << "\n";
  }

  if (fs::exists(run_dir / "poses.json")) {
    const auto poses = io::read_poses(run_dir / "poses.json");
    md << "## Mirror pose estimation\n\n";
    md << "Solver: " << poses.iterations << " iterations, final cost " << num(poses.final_cost, 3)
       << (poses.converged ? ", converged" : ", not converged") << ". Estimated poses: " << poses.poses.size()
       << ", skipped: " << poses.skipped_pulses.size() << ".\n\n";
    std::vector<double> prop, base, ratio;
    for (const auto& p : poses.poses) {
      if (p.heldout) {
        prop.push_back(p.heldout->delta_deg);
        if (p.heldout->sigma_px > 0.0) ratio.push_back(p.heldout->delta_px / p.heldout->sigma_px);
      }
      if (p.baseline_heldout) base.push_back(p.baseline_heldout->delta_deg);
    }
    if (!prop.empty()) {
      const std::size_t within = static_cast<std::size_t>(std::count_if(ratio.begin(), ratio.end(), [](double r) { return r < 3.0; }));
      md << "| mean spanning angle (deg) | proposed error (deg) | pure-rotation error (deg) | held-out within 3 sigma |\n";
      md << "|---|---|---|---|\n";
      md << "| " << num(poses.mean_theta_deg, 2) << " | " << pm(stats(prop)) << " | "
         << (base.empty() ? std::string("n/a") : pm(stats(base))) << " | " << within << "/" << ratio.size() << " |\n\n";
    }
    if (truth) {
      std::vector<double> dn, dd;
      for (const auto& p : poses.poses) {
        const auto it = truth_pulse.find(p.pulse);
        if (it == truth_pulse.end()) continue;
        PlaneH a = p.plane;
        const PlaneH& b = it->second->plane;
        if (a.n.dot(b.n) < 0.0) a = a.flipped();
        dn.push_back(rad2deg(angle_between(a.n, b.n)));
        dd.push_back(std::abs(a.d - b.d));
      }
      const Stats sn = stats(dn), sd = stats(dd);
      md << "Ground-truth deltas over " << sn.n << " planes: normal " << pm(sn, 5) << " deg (max " << num(sn.max, 5)
         << "), offset " << pm(sd, 5) << " mm (max " << num(sd.max, 5) << ").\n\n";
    }
  }

  if (fs::exists(run_dir / "frame.json")) {
    const auto frame = io::read_frame(run_dir / "frame.json");
    const auto& f = frame.frame;
    md << "## Home frame\n\n";
    md << "| item | value |\n|---|---|\n";
    md << "| rotation center (mm) | " << num(f.X_O.x(), 3) << ", " << num(f.X_O.y(), 3) << ", " << num(f.X_O.z(), 3) << " |\n";
    md << "| fast axis | " << num(f.R0(0, 0), 5) << ", " << num(f.R0(1, 0), 5) << ", " << num(f.R0(2, 0), 5) << " |\n";
    md << "| home normal | " << num(f.R0(0, 2), 5) << ", " << num(f.R0(1, 2), 5) << ", " << num(f.R0(2, 2), 5) << " |\n";
    md << "| plane spread about the center (mm) | " << num(f.origin.spread_mm, 4) << " |\n";
    if (truth) {
      md << "| fast axis error (deg) | " << num(rad2deg(axis_angle_between(f.R0.col(0), truth->frame.R0.col(0))), 5) << " |\n";
      md << "| center error (mm) | " << num((f.X_O - truth->frame.X_O).norm(), 4) << " |\n";
    }
    md << "\n";

    Series a{"alpha (deg)", {}, {}, kColors[0]}, b{"beta (deg)", {}, {}, kColors[1]}, t{"tau x10 (mm)", {}, {}, kColors[2]};
    std::vector<double> ea, eb, et;
    for (const auto& p : frame.poses) {
      if (p.tag != FrameTag::Full) continue;
      a.x.push_back(p.t), a.y.push_back(p.pose.alpha_deg);
      b.x.push_back(p.t), b.y.push_back(p.pose.beta_deg);
      t.x.push_back(p.t), t.y.push_back(10.0 * p.pose.tau_mm);
      const auto it = truth_pulse.find(p.pulse);
      if (it != truth_pulse.end()) {
        ea.push_back(std::abs(p.pose.alpha_deg - it->second->pose.alpha_deg));
        eb.push_back(std::abs(p.pose.beta_deg - it->second->pose.beta_deg));
        et.push_back(std::abs(p.pose.tau_mm - it->second->pose.tau_mm));
      }
    }
    for (Series* s : {&a, &b, &t}) s->points = true;
    save_text(run_dir / "poses.svg", svg_chart("Mirror poses in the home frame", "t (s)", "value", {a, b, t}));
    md << "![poses](poses.svg)\n\n";
    if (!ea.empty()) {
      md << "| pose error vs ground truth | alpha (deg) | beta (deg) | tau (mm) |\n|---|---|---|---|\n";
      md << "| mean ± SD | " << pm(stats(ea), 5) << " | " << pm(stats(eb), 5) << " | " << pm(stats(et), 5) << " |\n\n";
    }
  }

  std::vector<fs::path> models;
  if (fs::exists(run_dir)) {
    for (const auto& e : fs::directory_iterator(run_dir)) {
      const std::string name = e.path().filename().string();
      if (name.rfind("hallmodel", 0) == 0 && e.path().extension() == ".json") models.push_back(e.path());
    }
  }
  std::sort(models.begin(), models.end());
  if (!models.empty()) {
    md << "## Hall sensor calibration\n\n";
    md << "| file | model | alpha RMSE (deg) | beta RMSE (deg) | tau RMSE (mm) | time offset (ms) |\n";
    md << "|---|---|---|---|---|---|\n";
    for (const auto& path : models) {
      const auto m = io::read_hall_model(path);
      md << "| " << path.filename().string() << " | " << to_string(m.model.kind) << " | "
         << num(m.test_rmse.x()) << " ± " << num(m.test_rmse_sd.x()) << " | " << num(m.test_rmse.y()) << " ± "
         << num(m.test_rmse_sd.y()) << " | " << num(m.test_rmse.z()) << " ± " << num(m.test_rmse_sd.z()) << " | "
         << num(1e3 * m.model.dt, 3) << " |\n";
    }
    md << "\nTest RMSE over " << io::read_hall_model(models.front()).repeats << " random splits.";
    if (truth) md << " Injected time offset: " << num(1e3 * truth->hall_dt, 3) << " ms.";
    md << "\n\n";
  }

  if (!data.hall_actual.empty()) {
    const HallSeries fg = foreground(data.hall_actual, data.hall_background);
    std::vector<Series> series{{"bx", {}, {}, kColors[0]}, {"by", {}, {}, kColors[1]}, {"bz", {}, {}, kColors[2]}};
    const double t_end = fg.t_begin() + 0.5;
    for (std::size_t i = 0; i < fg.size() && fg.t[i] <= t_end; i += 2) {
      for (int k = 0; k < 3; ++k) {
        series[static_cast<std::size_t>(k)].x.push_back(fg.t[i]);
        series[static_cast<std::size_t>(k)].y.push_back(fg.B[i](k));
      }
    }
    save_text(run_dir / "hall.svg", svg_chart("Hall foreground", "t (s)", "field (device units)", series));
    md << "![hall foreground](hall.svg)\n";
  }

  const std::string text = md.str();
  save_text(run_dir / "report.md", text);
  return text;
}

}  // namespace msm::report

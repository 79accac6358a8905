#include "ldc/harness/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "ldc/harness/spec.hpp"

namespace ldc::harness {

namespace fs = std::filesystem;

std::string to_string(PlotKind k) {
  switch (k) {
    case PlotKind::loss_space: return "loss_space";
    case PlotKind::weights_over_time: return "weights_over_time";
    case PlotKind::residual_over_time: return "residual_over_time";
    case PlotKind::timing_bars: return "timing_bars";
  }
  return "loss_space";
}

PlotKind parse_plot_kind(const std::string& name) {
  for (PlotKind k : {PlotKind::loss_space, PlotKind::weights_over_time, PlotKind::residual_over_time,
                     PlotKind::timing_bars}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown plot kind '" + name +
                    "' (valid kinds: loss_space, weights_over_time, residual_over_time, timing_bars)");
}

namespace {

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> pts;
};

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

constexpr double kW = 640, kH = 480, kL = 70, kR = 150, kT = 40, kB = 60;

std::string esc(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

std::string svg_lines(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                      const std::vector<Series>& series) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (const auto& [x, y] : s.pts) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, y), y1 = std::max(y1, y);
    }
  if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  const double pw = kW - kL - kR, ph = kH - kT - kB;
  auto px = [&](double x) { return kL + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kT + ph - (y - y0) / (y1 - y0) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << esc(title) << "</text>\n"
    << "<rect x=\"" << kL << "\" y=\"" << kT << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = x0 + (x1 - x0) * i / 4.0, fy = y0 + (y1 - y0) * i / 4.0;
    o << "<text x=\"" << px(fx) << "\" y=\"" << kT + ph + 16 << "\" text-anchor=\"middle\">" << num(fx) << "</text>\n";
    o << "<text x=\"" << kL - 6 << "\" y=\"" << py(fy) + 4 << "\" text-anchor=\"end\">" << num(fy) << "</text>\n";
  }
  o << "<text x=\"" << kL + pw / 2 << "\" y=\"" << kH - 15 << "\" text-anchor=\"middle\">" << esc(xlabel) << "</text>\n"
    << "<text x=\"18\" y=\"" << kT + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
    << kT + ph / 2 << ")\">" << esc(ylabel) << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : series[i].pts) {
      if (std::isfinite(x) && std::isfinite(y)) o << px(x) << ',' << py(y) << ' ';
    }
    o << "\"/>\n";
    if (!series[i].pts.empty()) {
      const auto& [ex, ey] = series[i].pts.back();
      if (std::isfinite(ex) && std::isfinite(ey)) {
        o << "<circle cx=\"" << px(ex) << "\" cy=\"" << py(ey) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
      }
    }
    const double ly = kT + 14 + 16 * static_cast<double>(i);
    o << "<line x1=\"" << kW - kR + 10 << "\" y1=\"" << ly - 4 << "\" x2=\"" << kW - kR + 30 << "\" y2=\"" << ly - 4
      << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
      << "<text x=\"" << kW - kR + 35 << "\" y=\"" << ly << "\">" << esc(series[i].label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string svg_bars(const std::string& title, const std::string& ylabel,
                     const std::vector<std::pair<std::string, double>>& bars) {
  double ymax = 0.0;
  for (const auto& b : bars) ymax = std::max(ymax, b.second);
  if (ymax <= 0.0) ymax = 1.0;
  const double pw = kW - kL - 30, ph = kH - kT - kB;
  const double slot = bars.empty() ? pw : pw / static_cast<double>(bars.size());
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << esc(title) << "</text>\n"
    << "<line x1=\"" << kL << "\" y1=\"" << kT + ph << "\" x2=\"" << kL + pw << "\" y2=\"" << kT + ph
    << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << kL << "\" y1=\"" << kT << "\" x2=\"" << kL << "\" y2=\"" << kT + ph << "\" stroke=\"black\"/>\n"
    << "<text x=\"" << kL - 6 << "\" y=\"" << kT + 4 << "\" text-anchor=\"end\">" << num(ymax) << "</text>\n"
    << "<text x=\"" << kL - 6 << "\" y=\"" << kT + ph + 4 << "\" text-anchor=\"end\">0</text>\n"
    << "<text x=\"18\" y=\"" << kT + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
    << kT + ph / 2 << ")\">" << esc(ylabel) << "</text>\n";
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const double h = std::max(0.0, bars[i].second) / ymax * ph;
    const double x = kL + slot * (static_cast<double>(i) + 0.15);
    o << "<rect x=\"" << x << "\" y=\"" << kT + ph - h << "\" width=\"" << slot * 0.7 << "\" height=\"" << h
      << "\" fill=\"" << kPalette[i % std::size(kPalette)] << "\"/>\n"
      << "<text x=\"" << x + slot * 0.35 << "\" y=\"" << kT + ph + 16 << "\" text-anchor=\"middle\">"
      << esc(bars[i].first) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream f(p);
  if (!f) throw ConfigError("cannot write " + p.string());
  f << s;
  if (!f) throw ConfigError("failed writing " + p.string());
}

double trajectory_micros(const Trajectory& t) {
  if (t.meta.is_object() && t.meta.contains("median_step_micros")) return t.meta["median_step_micros"].get<double>();
  std::vector<double> v;
  for (std::size_t i = 0; i + 1 < t.rows.size(); ++i) {
    if (!t.rows[i].diverged) v.push_back(t.rows[i].step_micros);
  }
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  return v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
}

std::string trajectory_method(const Trajectory& t) {
  if (t.meta.is_object() && t.meta.contains("method")) return t.meta["method"].get<std::string>();
  return t.name;
}

}  // namespace

std::vector<fs::path> emit_plot_data(const std::vector<Trajectory>& trajectories, PlotKind kind,
                                     const fs::path& out_dir, bool svg) {
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  const std::string kname = to_string(kind);

  if (kind == PlotKind::timing_bars) {
    std::map<std::string, std::vector<double>> by_method;
    std::vector<std::string> order;
    for (const Trajectory& t : trajectories) {
      const std::string m = trajectory_method(t);
      if (!by_method.count(m)) order.push_back(m);
      by_method[m].push_back(trajectory_micros(t));
    }
    std::vector<std::pair<std::string, double>> bars;
    for (const std::string& m : order) {
      auto v = by_method[m];
      std::sort(v.begin(), v.end());
      bars.emplace_back(m, v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]));
    }
    double ls = std::numeric_limits<double>::quiet_NaN();
    for (const auto& b : bars) {
      if (b.first == "ls") ls = b.second;
    }
    std::ostringstream d;
    d << "# method median_step_micros ratio_to_ls\n";
    for (const auto& [m, us] : bars) d << m << ' ' << format_double(us) << ' ' << format_double(us / ls) << '\n';
    const fs::path p = out_dir / "timing_bars.dat";
    write_text(p, d.str());
    written.push_back(p);
    if (svg) {
      const fs::path s = out_dir / "timing_bars.svg";
      write_text(s, svg_bars("median step time", "microseconds per step", bars));
      written.push_back(s);
    }
    return written;
  }

  std::vector<Series> series;
  std::string xlabel, ylabel;
  for (const Trajectory& t : trajectories) {
    std::ostringstream d;
    const int k = t.tasks;
    if (kind == PlotKind::loss_space) {
      d << "#";
      for (int i = 1; i <= k; ++i) d << " l" << i;
      d << '\n';
      Series s{t.name, {}};
      for (const auto& r : t.rows) {
        for (int i = 0; i < k; ++i) d << (i ? " " : "") << format_double(r.raw_losses[i]);
        d << '\n';
        s.pts.emplace_back(r.raw_losses[0], k > 1 ? r.raw_losses[1] : 0.0);
      }
      series.push_back(std::move(s));
      xlabel = "L1", ylabel = "L2";
    } else if (kind == PlotKind::weights_over_time) {
      d << "# step";
      for (int i = 1; i <= k; ++i) d << " sigma" << i;
      d << '\n';
      for (const auto& r : t.rows) {
        d << r.step;
        for (int i = 0; i < k; ++i) d << ' ' << format_double(r.sigma[i]);
        d << '\n';
      }
      for (int i = 0; i < k; ++i) {
        Series s{t.name + " task " + std::to_string(i + 1), {}};
        for (const auto& r : t.rows) s.pts.emplace_back(static_cast<double>(r.step), r.sigma[i]);
        series.push_back(std::move(s));
      }
      xlabel = "step", ylabel = "task weight";
    } else {
      d << "# step residual\n";
      Series s{t.name, {}};
      for (const auto& r : t.rows) {
        d << r.step << ' ' << format_double(r.residual) << '\n';
        s.pts.emplace_back(static_cast<double>(r.step), std::log10(std::max(r.residual, 1e-300)));
      }
      series.push_back(std::move(s));
      xlabel = "step", ylabel = "log10 min-norm residual";
    }
    const fs::path p = out_dir / (t.name + "." + kname + ".dat");
    write_text(p, d.str());
    written.push_back(p);
  }
  if (svg) {
    const fs::path s = out_dir / (kname + ".svg");
    write_text(s, svg_lines(kname, xlabel, ylabel, series));
    written.push_back(s);
  }
  return written;
}

}  // namespace ldc::harness

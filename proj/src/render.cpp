#include "fibergap/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>

#include "fibergap/error.hpp"

namespace fibergap {

namespace {

constexpr double kW = 640, kH = 420, kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

struct Axis {
  bool log = false;
  double lo = 0, hi = 1;

  double t(double v) const { return log ? std::log10(v) : v; }
  bool usable(double v) const { return std::isfinite(v) && (!log || v > 0); }
  double frac(double v) const { return hi > lo ? (t(v) - lo) / (hi - lo) : 0.5; }
};

Axis make_axis(bool log, const std::vector<Series>& s, bool use_x) {
  Axis a;
  a.log = log;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& ser : s) {
    for (double v : use_x ? ser.x : ser.y) {
      if (!a.usable(v)) continue;
      lo = std::min(lo, a.t(v));
      hi = std::max(hi, a.t(v));
    }
  }
  if (!(lo <= hi)) lo = 0, hi = 1;
  if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
  const double pad = 0.04 * (hi - lo);
  a.lo = lo - pad;
  a.hi = hi + pad;
  return a;
}

std::string tick_label(const Axis& a, double tv) {
  if (a.log) return fmt::format("{:.3g}", std::pow(10.0, tv));
  return fmt::format("{:.3g}", tv);
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

}  // namespace

std::string render_svg(const PlotSpec& plot) {
  if (plot.series.empty() || plot.series[0].x.size() < 2) {
    throw Error(ErrorCode::kEmptyTable, "plot needs at least 2 rows");
  }
  for (const auto& s : plot.series) {
    if (s.x.size() != s.y.size()) throw Error(ErrorCode::kBadInput, "series x/y length mismatch");
  }
  const Axis ax = make_axis(plot.log_x, plot.series, true);
  const Axis ay = make_axis(plot.log_y, plot.series, false);
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto px = [&](double v) { return kLeft + ax.frac(v) * pw; };
  auto py = [&](double v) { return kTop + (1.0 - ay.frac(v)) * ph; };

  std::string o;
  o += fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">)", kW, kH,
                   kW, kH);
  o += "\n";
  o += fmt::format(R"(<rect x="0" y="0" width="{}" height="{}" fill="white"/>)", kW, kH);
  o += "\n";
  o += fmt::format(R"(<text x="{:.2f}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{}</text>)",
                   kW / 2, escape(plot.title));
  o += "\n";
  o += fmt::format(R"(<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>)", kLeft, kTop, pw, ph);
  o += "\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = ax.lo + (ax.hi - ax.lo) * i / 4.0;
    const double fy = ay.lo + (ay.hi - ay.lo) * i / 4.0;
    const double sx = kLeft + pw * i / 4.0, sy = kTop + ph * (1.0 - i / 4.0);
    o += fmt::format(
        R"(<text x="{:.2f}" y="{:.2f}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>)", sx,
        kTop + ph + 16, tick_label(ax, fx));
    o += "\n";
    o += fmt::format(
        R"(<text x="{:.2f}" y="{:.2f}" text-anchor="end" font-family="sans-serif" font-size="11">{}</text>)",
        kLeft - 6, sy + 4, tick_label(ay, fy));
    o += "\n";
  }
  o += fmt::format(R"(<text x="{:.2f}" y="{:.2f}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>)",
                   kLeft + pw / 2, kH - 10, escape(plot.x_label));
  o += "\n";
  o += fmt::format(
      R"svg(<text x="14" y="{:.2f}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 14 {:.2f})">{}</text>)svg",
      kTop + ph / 2, kTop + ph / 2, escape(plot.y_label));
  o += "\n";

  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const Series& s = plot.series[k];
    const char* color = kColors[k % std::size(kColors)];
    std::string pts;
    std::size_t count = 0;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!ax.usable(s.x[i]) || !ay.usable(s.y[i])) continue;
      pts += fmt::format("{}{:.2f},{:.2f}", count ? " " : "", px(s.x[i]), py(s.y[i]));
      ++count;
    }
    o += fmt::format(R"(<polyline class="series" data-label="{}" data-points="{}" fill="none" stroke="{}" stroke-width="{}"{} points="{}"/>)",
                     escape(s.label), count, color, s.markers ? 1.5 : 2.0, s.markers ? "" : R"( stroke-dasharray="6 3")",
                     pts);
    o += "\n";
    if (s.markers) {
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!ax.usable(s.x[i]) || !ay.usable(s.y[i])) continue;
        o += fmt::format(R"(<circle cx="{:.2f}" cy="{:.2f}" r="3" fill="{}"/>)", px(s.x[i]), py(s.y[i]), color);
        o += "\n";
      }
    }
    const double ly = kTop + 14 + 16.0 * k;
    o += fmt::format(R"(<line x1="{:.2f}" y1="{:.2f}" x2="{:.2f}" y2="{:.2f}" stroke="{}" stroke-width="2"/>)",
                     kLeft + pw - 150, ly - 4, kLeft + pw - 130, ly - 4, color);
    o += fmt::format(R"(<text x="{:.2f}" y="{:.2f}" font-family="sans-serif" font-size="11">{}</text>)",
                     kLeft + pw - 124, ly, escape(s.label));
    o += "\n";
  }
  o += "</svg>\n";
  return o;
}

void write_svg(const PlotSpec& plot, const std::string& path) {
  const std::string svg = render_svg(plot);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::kIoError, "cannot write " + path);
  os << svg;
}

}  // namespace fibergap

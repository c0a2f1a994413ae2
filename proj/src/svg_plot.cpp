#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "clf_etc/experiment.hpp"

namespace clf_etc {
namespace {

constexpr double kWidth = 800.0;
constexpr double kPanelHeight = 200.0;
constexpr double kMargin = 50.0;
constexpr std::size_t kMaxPoints = 2000;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                               "#ff7f0e", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Series {
  std::vector<double> y;
  std::string color;
  bool dashed = false;
};

void panel(std::ostringstream& svg, double top, const std::string& title,
           const std::vector<double>& t, const std::vector<Series>& series) {
  double lo = kInf, hi = -kInf;
  for (const auto& s : series) {
    for (double v : s.y) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double t0 = t.front();
  const double t1 = t.back() > t0 ? t.back() : t0 + 1.0;
  const double x_left = kMargin, x_right = kWidth - 10.0;
  const double y_top = top + 20.0, y_bot = top + kPanelHeight - 20.0;
  const auto px = [&](double tv) { return x_left + (tv - t0) / (t1 - t0) * (x_right - x_left); };
  const auto py = [&](double yv) { return y_bot - (yv - lo) / (hi - lo) * (y_bot - y_top); };

  svg << "<text x=\"" << x_left << "\" y=\"" << top + 14 << "\" font-size=\"12\">"
      << title << "</text>\n";
  svg << "<rect x=\"" << x_left << "\" y=\"" << y_top << "\" width=\"" << x_right - x_left
      << "\" height=\"" << y_bot - y_top << "\" fill=\"none\" stroke=\"#888\"/>\n";
  svg << "<text x=\"2\" y=\"" << y_top + 10 << "\" font-size=\"10\">" << num(hi) << "</text>\n";
  svg << "<text x=\"2\" y=\"" << y_bot << "\" font-size=\"10\">" << num(lo) << "</text>\n";
  svg << "<text x=\"" << x_right - 40 << "\" y=\"" << y_bot + 14 << "\" font-size=\"10\">t="
      << num(t1) << "</text>\n";
  for (const auto& s : series) {
    svg << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1\"";
    if (s.dashed) svg << " stroke-dasharray=\"4,3\"";
    svg << " points=\"";
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      svg << num(px(t[i])) << ',' << num(py(s.y[i])) << ' ';
    }
    svg << "\"/>\n";
  }
}

}  // namespace

std::string trajectory_svg(const Trajectory& traj, const EnergyTimeMap& map,
                           double sigma) {
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << 3 * kPanelHeight << "\">\n";
  if (traj.samples.empty()) {
    svg << "</svg>\n";
    return svg.str();
  }
  const std::size_t stride =
      std::max<std::size_t>(1, (traj.samples.size() + kMaxPoints - 1) / kMaxPoints);
  std::vector<const TrajectorySample*> pts;
  for (std::size_t i = 0; i < traj.samples.size(); i += stride) pts.push_back(&traj.samples[i]);
  if (pts.back() != &traj.samples.back()) pts.push_back(&traj.samples.back());

  std::vector<double> t;
  for (const auto* p : pts) t.push_back(p->t);
  const auto color = [](std::size_t i) { return std::string(kColors[i % 6]); };

  std::vector<Series> xs(static_cast<std::size_t>(traj.state_dim));
  std::vector<Series> us(static_cast<std::size_t>(traj.input_dim));
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i].color = color(i);
  for (std::size_t i = 0; i < us.size(); ++i) us[i].color = color(i);
  Series v{{}, color(0)}, bound{{}, color(1), true};
  for (const auto* p : pts) {
    for (std::size_t i = 0; i < xs.size(); ++i) xs[i].y.push_back(p->x[i]);
    for (std::size_t i = 0; i < us.size(); ++i) us[i].y.push_back(p->u[i]);
    v.y.push_back(p->v);
    bound.y.push_back(convergence_bound(map, sigma, traj.v0, p->t));
  }
  panel(svg, 0.0, "state x(t)", t, xs);
  panel(svg, kPanelHeight, "control u(t)", t, us);
  panel(svg, 2 * kPanelHeight, "V(x(t)) and its convergence bound (dashed)", t, {v, bound});
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace clf_etc

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "fluid_engine.hpp"

namespace chatterlab::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width{720};
  int height{480};
};

namespace detail {

inline std::string escape(const std::string& s) {
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

inline std::string coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace detail

// Line plot with linear axes; series are drawn in the order given.
inline std::string render(const std::vector<Series>& series, const PlotSpec& spec) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!(x0 <= x1)) x0 = 0.0, x1 = 1.0;
  if (!(y0 <= y1)) y0 = 0.0, y1 = 1.0;
  if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;

  const double ml = 70, mr = 20, mt = 40, mb = 50;
  const double pw = spec.width - ml - mr;
  const double ph = spec.height - mt - mb;
  auto px = [&](double v) { return ml + (v - x0) / (x1 - x0) * pw; };
  auto py = [&](double v) { return mt + (1.0 - (v - y0) / (y1 - y0)) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\"" << spec.height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << spec.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
    << detail::escape(spec.title) << "</text>\n";
  o << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double vx = x0 + (x1 - x0) * k / 4.0;
    const double vy = y0 + (y1 - y0) * k / 4.0;
    o << "<text x=\"" << detail::coord(px(vx)) << "\" y=\"" << detail::coord(mt + ph + 16)
      << "\" text-anchor=\"middle\">" << detail::tick(vx) << "</text>\n";
    o << "<text x=\"" << detail::coord(ml - 6) << "\" y=\"" << detail::coord(py(vy) + 4)
      << "\" text-anchor=\"end\">" << detail::tick(vy) << "</text>\n";
  }
  o << "<text x=\"" << detail::coord(ml + pw / 2) << "\" y=\"" << spec.height - 10 << "\" text-anchor=\"middle\">"
    << detail::escape(spec.x_label) << "</text>\n";
  o << "<text x=\"14\" y=\"" << detail::coord(mt + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
    << detail::coord(mt + ph / 2) << ")\">" << detail::escape(spec.y_label) << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = colors[si % 6];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      o << detail::coord(px(s.x[i])) << ',' << detail::coord(py(s.y[i])) << ' ';
    }
    o << "\"/>\n";
    o << "<text x=\"" << detail::coord(ml + 8) << "\" y=\"" << detail::coord(mt + 16 + 14 * si) << "\" fill=\""
      << color << "\">" << detail::escape(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

inline Series extract(const Trajectory& tr, const std::string& label,
                      const std::function<double(const Sample&)>& fx,
                      const std::function<double(const Sample&)>& fy) {
  Series s{label, {}, {}};
  s.x.reserve(tr.samples.size());
  s.y.reserve(tr.samples.size());
  for (const auto& smp : tr.samples) {
    s.x.push_back(fx(smp));
    s.y.push_back(fy(smp));
  }
  return s;
}

// z21 against the queue difference.
inline std::string phase_plot(const Trajectory& tr, const std::string& title) {
  return render({extract(tr, "z21 vs delta", [](const Sample& s) { return s.x.delta(); },
                         [](const Sample& s) { return s.x.z21; })},
                {title, "delta = q2 - q1", "z21", 720, 480});
}

// Queues, or shared occupancies, against time.
inline std::string time_plot(const Trajectory& tr, const std::string& title, bool occupancies) {
  auto t = [](const Sample& s) { return s.t; };
  if (occupancies) {
    return render({extract(tr, "z12", t, [](const Sample& s) { return s.x.z12; }),
                   extract(tr, "z21", t, [](const Sample& s) { return s.x.z21; })},
                  {title, "t", "shared occupancy", 720, 480});
  }
  return render({extract(tr, "q1", t, [](const Sample& s) { return s.x.q1; }),
                 extract(tr, "q2", t, [](const Sample& s) { return s.x.q2; })},
                {title, "t", "queue", 720, 480});
}

}  // namespace chatterlab::svg

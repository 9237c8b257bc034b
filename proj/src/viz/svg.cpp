#include "crat/viz/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace crat::viz {

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Bounds {
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0, x1 = -x0, y1 = -x0;
  void add(double x, double y) {
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  }
};

}  // namespace

std::string scene_svg(const data::Scene& local, const std::vector<Array2>& modes, const std::string& title,
                      const Palette& pal) {
  Bounds b;
  for (const auto& tr : local.tracks)
    for (const auto& o : tr.obs) b.add(o.pos.x, o.pos.y);
  for (const auto& m : modes)
    for (std::size_t t = 0; t < m.rows; ++t) b.add(m(t, 0), m(t, 1));
  if (!std::isfinite(b.x0)) b = {-1, -1, 1, 1};
  const double pad = 5.0, W = 640, H = 640;
  const double span = std::max({b.x1 - b.x0, b.y1 - b.y0, 1.0}) + 2 * pad;
  const double cx = 0.5 * (b.x0 + b.x1), cy = 0.5 * (b.y0 + b.y1), s = W / span;
  auto X = [&](double x) { return W / 2 + (x - cx) * s; };
  auto Y = [&](double y) { return H / 2 - (y - cy) * s; };

  std::ostringstream o;
  o.precision(6);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H + 30 << "\" viewBox=\"0 0 " << W
    << ' ' << H + 30 << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty()) o << "<text x=\"10\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" << escape(title) << "</text>\n";
  o << "<g transform=\"translate(0,30)\">\n";
  auto polyline = [&](const std::vector<data::Vec2>& pts, const std::string& color, double width,
                      const std::string& cls) {
    if (pts.empty()) return;
    o << "<polyline class=\"" << cls << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width
      << "\" points=\"";
    for (const auto& p : pts) o << X(p.x) << ',' << Y(p.y) << ' ';
    o << "\"/>\n";
    o << "<circle class=\"" << cls << "\" cx=\"" << X(pts.back().x) << "\" cy=\"" << Y(pts.back().y)
      << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
  };
  for (std::size_t i = 0; i < local.tracks.size(); ++i) {
    const auto& tr = local.tracks[i];
    std::vector<data::Vec2> past, future;
    for (const auto& ob : tr.obs) (ob.t <= 0 ? past : future).push_back(ob.pos);
    if (i == 0) {
      if (!future.empty() && !past.empty()) future.insert(future.begin(), past.back());
      polyline(future, pal.ground_truth, 2.0, "ground-truth");
      polyline(past, pal.history, 2.5, "history");
    } else {
      polyline(past, pal.others, 1.5, "other");
    }
  }
  const auto origin = local.target().at(0).value_or(data::Vec2{});
  for (std::size_t m = modes.size(); m-- > 0;) {
    std::vector<data::Vec2> pts{origin};
    for (std::size_t t = 0; t < modes[m].rows; ++t) pts.push_back({modes[m](t, 0), modes[m](t, 1)});
    polyline(pts, m == 0 ? pal.best_mode : pal.other_modes, m == 0 ? 2.5 : 1.5, "mode mode-" + std::to_string(m));
  }
  o << "</g>\n</svg>\n";
  return o.str();
}

std::string bar_chart_svg(const std::string& title, const std::string& y_label, const std::vector<std::string>& groups,
                          const std::vector<BarSeries>& series) {
  double lo = 0.0, hi = 0.0;
  for (const auto& s : series)
    for (double v : s.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (hi - lo < 1e-12) hi = lo + 1.0;
  const double W = 640, H = 400, left = 70, right = 20, top = 40, bottom = 60;
  const double plot_h = H - top - bottom, plot_w = W - left - right;
  auto Y = [&](double v) { return top + (hi - v) / (hi - lo) * plot_h; };
  const double group_w = plot_w / double(std::max<std::size_t>(groups.size(), 1));
  const double bar_w = 0.8 * group_w / double(std::max<std::size_t>(series.size(), 1));

  std::ostringstream o;
  o.precision(6);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
    << escape(title) << "</text>\n";
  o << "<text x=\"16\" y=\"" << top + plot_h / 2 << "\" transform=\"rotate(-90 16 " << top + plot_h / 2
    << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << escape(y_label) << "</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    o << "<line x1=\"" << left << "\" x2=\"" << W - right << "\" y1=\"" << Y(v) << "\" y2=\"" << Y(v)
      << "\" stroke=\"#dddddd\"/>\n<text x=\"" << left - 6 << "\" y=\"" << Y(v) + 4
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << v << "</text>\n";
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double gx = left + g * group_w + 0.1 * group_w;
    for (std::size_t s = 0; s < series.size(); ++s) {
      const double v = g < series[s].values.size() ? series[s].values[g] : 0.0;
      const double y = std::min(Y(v), Y(0.0)), h = std::abs(Y(v) - Y(0.0));
      o << "<rect class=\"bar\" x=\"" << gx + s * bar_w << "\" y=\"" << y << "\" width=\"" << bar_w * 0.95
        << "\" height=\"" << h << "\" fill=\"" << series[s].color << "\"><title>" << escape(series[s].label) << ' '
        << escape(groups[g]) << ": " << v << "</title></rect>\n";
    }
    o << "<text x=\"" << gx + 0.4 * group_w << "\" y=\"" << H - bottom + 18
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << escape(groups[g]) << "</text>\n";
  }
  o << "<line x1=\"" << left << "\" x2=\"" << W - right << "\" y1=\"" << Y(0.0) << "\" y2=\"" << Y(0.0)
    << "\" stroke=\"black\"/>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const double lx = left + 10 + s * 160, ly = H - 18;
    o << "<rect x=\"" << lx << "\" y=\"" << ly - 10 << "\" width=\"12\" height=\"12\" fill=\"" << series[s].color
      << "\"/>\n<text x=\"" << lx + 18 << "\" y=\"" << ly
      << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape(series[s].label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace crat::viz

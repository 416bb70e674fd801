#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace eqcorr {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Line chart writer: one polyline per series, axes with five ticks each, a
/// legend and optional vertical markers.
class SvgPlot {
 public:
  SvgPlot(std::string title, std::string x_label, std::string y_label)
      : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

  void add_series(std::string name, std::vector<double> xs, std::vector<double> ys) {
    if (xs.size() != ys.size() || xs.empty()) throw std::invalid_argument("svg series needs matching nonempty x and y");
    series_.push_back({std::move(name), std::move(xs), std::move(ys)});
  }

  void add_marker(double x, std::string label) { markers_.push_back({x, std::move(label)}); }

  std::string render() const {
    if (series_.empty()) throw std::logic_error("svg plot has no series");
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series_) {
      for (double v : s.xs) x0 = std::min(x0, v), x1 = std::max(x1, v);
      for (double v : s.ys)
        if (std::isfinite(v)) y0 = std::min(y0, v), y1 = std::max(y1, v);
    }
    if (x1 <= x0) x1 = x0 + 1.0;
    if (y1 <= y0) y1 = y0 + 1.0;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;

    const double left = 70, right = 20, top = 40, bottom = 50;
    const double w = kWidth - left - right, h = kHeight - top - bottom;
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * w; };
    auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * h; };

    std::ostringstream o;
    o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" viewBox=\"0 0 "
      << kWidth << ' ' << kHeight << "\">\n";
    o << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
    o << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << xml_escape(title_) << "</text>\n";
    o << "<line x1=\"" << left << "\" y1=\"" << top + h << "\" x2=\"" << left + w << "\" y2=\"" << top + h << "\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + h << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
      const double xv = x0 + (x1 - x0) * i / 4.0;
      const double yv = y0 + (y1 - y0) * i / 4.0;
      o << "<text x=\"" << fmt(px(xv)) << "\" y=\"" << top + h + 18 << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(xv)
        << "</text>\n";
      o << "<text x=\"" << left - 6 << "\" y=\"" << fmt(py(yv) + 4) << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(yv)
        << "</text>\n";
    }
    o << "<text x=\"" << left + w / 2 << "\" y=\"" << kHeight - 10 << "\" text-anchor=\"middle\" font-size=\"13\">"
      << xml_escape(x_label_) << "</text>\n";
    o << "<text x=\"16\" y=\"" << top + h / 2 << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
      << top + h / 2 << ")\">" << xml_escape(y_label_) << "</text>\n";

    for (std::size_t k = 0; k < series_.size(); ++k) {
      const auto& s = series_[k];
      const char* colour = kPalette[k % kPaletteSize];
      o << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < s.xs.size(); ++i) {
        if (!std::isfinite(s.ys[i])) continue;
        o << fmt(px(s.xs[i])) << ',' << fmt(py(s.ys[i])) << ' ';
      }
      o << "\"/>\n";
      const double ly = top + 14 + 16 * static_cast<double>(k);
      o << "<line x1=\"" << left + w - 150 << "\" y1=\"" << ly << "\" x2=\"" << left + w - 130 << "\" y2=\"" << ly
        << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
      o << "<text x=\"" << left + w - 125 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">" << xml_escape(s.name) << "</text>\n";
    }
    for (const auto& m : markers_) {
      if (m.x < x0 || m.x > x1) continue;
      o << "<line x1=\"" << fmt(px(m.x)) << "\" y1=\"" << top << "\" x2=\"" << fmt(px(m.x)) << "\" y2=\"" << top + h
        << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
      o << "<text x=\"" << fmt(px(m.x) + 4) << "\" y=\"" << top + 12 << "\" font-size=\"11\">" << xml_escape(m.label)
        << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
  }

 private:
  struct Series {
    std::string name;
    std::vector<double> xs, ys;
  };
  struct Marker {
    double x;
    std::string label;
  };

  static std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
  }

  static constexpr int kWidth = 720;
  static constexpr int kHeight = 440;
  static constexpr std::size_t kPaletteSize = 6;
  static constexpr const char* kPalette[kPaletteSize] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};

  std::string title_, x_label_, y_label_;
  std::vector<Series> series_;
  std::vector<Marker> markers_;
};

}  // namespace eqcorr

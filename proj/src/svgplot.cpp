#include "ssdet/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace ssdet {

namespace {

constexpr int kWidth = 640, kHeight = 420;
constexpr int kLeft = 64, kRight = 24, kTop = 40, kBottom = 48;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#17becf", "#8c564b", "#7f7f7f"};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

SvgPlot::SvgPlot(std::string title, std::string x_label, std::string y_label)
    : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

void SvgPlot::add_series(const std::string& name, const std::vector<double>& x,
                         const std::vector<double>& y) {
  series_.push_back(Series{name, x, y, false});
}

void SvgPlot::add_hline(const std::string& name, double y) {
  series_.push_back(Series{name, {}, {y}, true});
}

void SvgPlot::write(const std::string& path) const {
  double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
  double y_min = std::numeric_limits<double>::infinity(), y_max = -y_min;
  for (const auto& s : series_) {
    for (double v : s.x) {
      x_min = std::min(x_min, v);
      x_max = std::max(x_max, v);
    }
    for (double v : s.y) {
      if (!std::isfinite(v)) continue;
      y_min = std::min(y_min, v);
      y_max = std::max(y_max, v);
    }
  }
  if (!std::isfinite(x_min)) {
    x_min = 0;
    x_max = 1;
  }
  if (!std::isfinite(y_min)) {
    y_min = 0;
    y_max = 1;
  }
  if (x_max == x_min) x_max = x_min + 1;
  if (y_max == y_min) y_max = y_min + 1;
  const double pad = 0.05 * (y_max - y_min);
  y_min -= pad;
  y_max += pad;

  auto px = [&](double x) {
    return kLeft + (x - x_min) / (x_max - x_min) * (kWidth - kLeft - kRight);
  };
  auto py = [&](double y) {
    return kHeight - kBottom - (y - y_min) / (y_max - y_min) * (kHeight - kTop - kBottom);
  };

  std::ofstream f(path);
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
    << kHeight << "\">\n";
  f << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  f << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
    << title_ << "</text>\n";
  f << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 10
    << "\" text-anchor=\"middle\" font-size=\"12\">" << x_label_ << "</text>\n";
  f << "<text x=\"16\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" font-size=\"12\" "
    << "transform=\"rotate(-90 16 " << kHeight / 2 << ")\">" << y_label_ << "</text>\n";

  // Axes and ticks.
  f << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
    << kHeight - kBottom << "\" stroke=\"black\"/>\n";
  f << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\"" << kWidth - kRight
    << "\" y2=\"" << kHeight - kBottom << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x_min + i * (x_max - x_min) / 4;
    const double yv = y_min + i * (y_max - y_min) / 4;
    f << "<text x=\"" << px(xv) << "\" y=\"" << kHeight - kBottom + 16
      << "\" text-anchor=\"middle\" font-size=\"10\">" << fmt(xv) << "</text>\n";
    f << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(yv) + 4
      << "\" text-anchor=\"end\" font-size=\"10\">" << fmt(yv) << "</text>\n";
  }

  int color = 0, legend_y = kTop + 6;
  for (const auto& s : series_) {
    const char* c = kPalette[color % 8];
    if (s.is_hline) {
      f << "<line x1=\"" << kLeft << "\" y1=\"" << py(s.y[0]) << "\" x2=\"" << kWidth - kRight
        << "\" y2=\"" << py(s.y[0]) << "\" stroke=\"" << c
        << "\" stroke-dasharray=\"6 4\" fill=\"none\"/>\n";
    } else {
      f << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.6\" points=\"";
      for (size_t i = 0; i < s.x.size(); ++i) {
        if (!std::isfinite(s.y[i])) continue;
        f << px(s.x[i]) << "," << py(s.y[i]) << " ";
      }
      f << "\"/>\n";
    }
    f << "<rect x=\"" << kWidth - kRight - 150 << "\" y=\"" << legend_y - 9
      << "\" width=\"10\" height=\"10\" fill=\"" << c << "\"/>\n";
    f << "<text x=\"" << kWidth - kRight - 136 << "\" y=\"" << legend_y
      << "\" font-size=\"11\">" << s.name << "</text>\n";
    legend_y += 16;
    ++color;
  }
  f << "</svg>\n";
}

void write_histogram_svg(const std::string& path, const std::string& title,
                         const std::vector<std::string>& series_names,
                         const std::vector<std::vector<double>>& values) {
  std::ofstream f(path);
  const size_t n_series = values.size();
  const size_t n_bins = n_series > 0 ? values[0].size() : 0;
  double v_max = 1e-12;
  for (const auto& s : values)
    for (double v : s) v_max = std::max(v_max, v);

  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
    << kHeight << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  f << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
    << title << "</text>\n";
  const double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;
  const double group_w = n_bins > 0 ? plot_w / static_cast<double>(n_bins) : plot_w;
  const double bar_w = n_series > 0 ? group_w * 0.8 / static_cast<double>(n_series) : group_w;
  for (size_t b = 0; b < n_bins; ++b) {
    for (size_t s = 0; s < n_series; ++s) {
      const double v = values[s][b];
      const double h = v / v_max * plot_h;
      const double x = kLeft + b * group_w + group_w * 0.1 + s * bar_w;
      f << "<rect x=\"" << x << "\" y=\"" << kHeight - kBottom - h << "\" width=\"" << bar_w
        << "\" height=\"" << h << "\" fill=\"" << kPalette[s % 8] << "\"/>\n";
    }
    f << "<text x=\"" << kLeft + b * group_w + group_w / 2 << "\" y=\"" << kHeight - kBottom + 16
      << "\" text-anchor=\"middle\" font-size=\"10\">" << b << "</text>\n";
  }
  int legend_y = kTop + 6;
  for (size_t s = 0; s < n_series; ++s) {
    f << "<rect x=\"" << kWidth - kRight - 170 << "\" y=\"" << legend_y - 9
      << "\" width=\"10\" height=\"10\" fill=\"" << kPalette[s % 8] << "\"/>\n";
    f << "<text x=\"" << kWidth - kRight - 156 << "\" y=\"" << legend_y
      << "\" font-size=\"11\">" << series_names[s] << "</text>\n";
    legend_y += 16;
  }
  f << "</svg>\n";
}

}  // namespace ssdet

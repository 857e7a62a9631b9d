#pragma once

#include <string>
#include <vector>

namespace ssdet {

/// Minimal static SVG charts for the analyze/sweep reports: line series
/// over a shared x axis, plus labeled bar groups for histograms.
class SvgPlot {
 public:
  SvgPlot(std::string title, std::string x_label, std::string y_label);

  void add_series(const std::string& name, const std::vector<double>& x,
                  const std::vector<double>& y);
  /// Horizontal reference line spanning the x range.
  void add_hline(const std::string& name, double y);

  void write(const std::string& path) const;

 private:
  struct Series {
    std::string name;
    std::vector<double> x, y;
    bool is_hline = false;
  };
  std::string title_, x_label_, y_label_;
  std::vector<Series> series_;
};

/// Grouped bar chart: one group per class, one bar per series.
void write_histogram_svg(const std::string& path, const std::string& title,
                         const std::vector<std::string>& series_names,
                         const std::vector<std::vector<double>>& values);

}  // namespace ssdet

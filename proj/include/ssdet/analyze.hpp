#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace ssdet {

/// One evaluation record from the metric log.
struct EvalPoint {
  int iteration = 0;
  std::string stage;
  std::optional<double> teacher_map;
  std::optional<double> student_map;
  std::optional<double> accuracy;
  std::optional<double> miou;
  std::optional<double> boxes_per_image;
  std::optional<double> kl;
  std::vector<long> class_histogram;
  bool has_pseudo = false;
};

/// Parsed metric log: the diagnostic time series plus the frozen
/// post-burn-in reference point. Evaluation points that carry no pseudo
/// diagnostics (burn-in stage) stay in the series with their gap flagged
/// through the optionals.
struct RunSeries {
  std::vector<long> gt_histogram;
  double gt_boxes_per_image = 0.0;
  size_t labeled = 0, unlabeled = 0;
  std::vector<EvalPoint> evals;
  std::optional<EvalPoint> burn_in_limit;
  std::vector<std::pair<int, double>> step_losses;  // (iteration, combined)
  std::string final_status;
  int final_iteration = 0;
};

/// Throws DataError when the log is missing, empty, or malformed.
RunSeries parse_metric_log(const std::string& metrics_path);

/// Emits the diagnostic plots (accuracy, mIoU, boxes-per-image with the gt
/// reference line, KL, mAP, class histogram, loss curve) plus a
/// summary.json numeric dump into <run_dir>/analysis. Re-running is
/// idempotent. Returns the summary document.
nlohmann::json analyze_run(const std::string& run_dir);

}  // namespace ssdet

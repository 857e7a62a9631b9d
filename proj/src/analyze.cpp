#include "ssdet/analyze.hpp"

#include <filesystem>
#include <fstream>

#include "ssdet/dataset.hpp"
#include "ssdet/svgplot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ssdet {

namespace {

EvalPoint parse_eval_point(const json& rec) {
  EvalPoint p;
  p.iteration = rec.at("iteration").get<int>();
  p.stage = rec.value("stage", std::string("mutual"));
  if (rec.contains("teacher") && rec.at("teacher").value("defined", false))
    p.teacher_map = rec.at("teacher").at("map").get<double>();
  if (rec.contains("student") && rec.at("student").value("defined", false))
    p.student_map = rec.at("student").at("map").get<double>();
  if (rec.contains("pseudo")) {
    const auto& ps = rec.at("pseudo");
    p.has_pseudo = true;
    p.accuracy = ps.at("accuracy").get<double>();
    p.miou = ps.at("miou").get<double>();
    p.boxes_per_image = ps.at("boxes_per_image").get<double>();
    p.kl = ps.at("kl").get<double>();
    p.class_histogram = ps.at("class_histogram").get<std::vector<long>>();
  }
  return p;
}

}  // namespace

RunSeries parse_metric_log(const std::string& metrics_path) {
  std::ifstream f(metrics_path);
  if (!f) throw DataError("cannot open metric log: " + metrics_path);
  RunSeries series;
  std::string line;
  size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("metric log line " + std::to_string(line_no) + " is not JSON: " + e.what());
    }
    const std::string type = rec.value("type", "");
    if (type == "diag_meta") {
      series.gt_histogram = rec.value("gt_histogram", std::vector<long>{});
      series.gt_boxes_per_image = rec.value("gt_boxes_per_image", 0.0);
      series.labeled = rec.value("labeled", size_t{0});
      series.unlabeled = rec.value("unlabeled", size_t{0});
    } else if (type == "eval") {
      series.evals.push_back(parse_eval_point(rec));
    } else if (type == "burn_in_limit") {
      EvalPoint p;
      p.iteration = rec.at("iteration").get<int>();
      p.stage = "burn_in_limit";
      const auto& ps = rec.at("pseudo");
      p.has_pseudo = true;
      p.accuracy = ps.at("accuracy").get<double>();
      p.miou = ps.at("miou").get<double>();
      p.boxes_per_image = ps.at("boxes_per_image").get<double>();
      p.kl = ps.at("kl").get<double>();
      p.class_histogram = ps.at("class_histogram").get<std::vector<long>>();
      series.burn_in_limit = p;
    } else if (type == "step") {
      series.step_losses.emplace_back(rec.at("iteration").get<int>(),
                                      rec.at("combined").get<double>());
    } else if (type == "final") {
      series.final_status = rec.value("status", "");
      series.final_iteration = rec.value("iteration", 0);
    }
  }
  if (series.evals.empty() && series.step_losses.empty())
    throw DataError("metric log contains no records: " + metrics_path);
  return series;
}

json analyze_run(const std::string& run_dir) {
  const std::string metrics_path = (fs::path(run_dir) / "metrics.jsonl").string();
  const RunSeries series = parse_metric_log(metrics_path);
  const fs::path out = fs::path(run_dir) / "analysis";
  fs::create_directories(out);

  auto collect = [&](auto getter) {
    std::pair<std::vector<double>, std::vector<double>> xy;
    for (const auto& p : series.evals) {
      const auto v = getter(p);
      if (!v) continue;
      xy.first.push_back(p.iteration);
      xy.second.push_back(*v);
    }
    return xy;
  };

  {
    SvgPlot plot("Pseudo-label accuracy", "iteration", "accuracy");
    auto [x, y] = collect([](const EvalPoint& p) { return p.accuracy; });
    plot.add_series("teacher", x, y);
    if (series.burn_in_limit && series.burn_in_limit->accuracy)
      plot.add_hline("burn-in limit", *series.burn_in_limit->accuracy);
    plot.write((out / "accuracy.svg").string());
  }
  {
    SvgPlot plot("Pseudo-label mIoU", "iteration", "mIoU");
    auto [x, y] = collect([](const EvalPoint& p) { return p.miou; });
    plot.add_series("teacher", x, y);
    if (series.burn_in_limit && series.burn_in_limit->miou)
      plot.add_hline("burn-in limit", *series.burn_in_limit->miou);
    plot.write((out / "miou.svg").string());
  }
  {
    SvgPlot plot("Pseudo boxes per image", "iteration", "boxes / image");
    auto [x, y] = collect([](const EvalPoint& p) { return p.boxes_per_image; });
    plot.add_series("teacher", x, y);
    plot.add_hline("gt boxes / image", series.gt_boxes_per_image);
    if (series.burn_in_limit && series.burn_in_limit->boxes_per_image)
      plot.add_hline("burn-in limit", *series.burn_in_limit->boxes_per_image);
    plot.write((out / "boxes_per_image.svg").string());
  }
  {
    SvgPlot plot("KL(gt || pseudo) over training", "iteration", "KL divergence");
    auto [x, y] = collect([](const EvalPoint& p) { return p.kl; });
    plot.add_series("teacher", x, y);
    plot.write((out / "kl.svg").string());
  }
  {
    SvgPlot plot("Detection mAP (AP50:95)", "iteration", "mAP");
    auto [tx, ty] = collect([](const EvalPoint& p) { return p.teacher_map; });
    auto [sx, sy] = collect([](const EvalPoint& p) { return p.student_map; });
    plot.add_series("teacher", tx, ty);
    plot.add_series("student", sx, sy);
    plot.write((out / "map.svg").string());
  }
  {
    SvgPlot plot("Training loss", "iteration", "combined loss");
    std::vector<double> x, y;
    for (const auto& [it, loss] : series.step_losses) {
      x.push_back(it);
      y.push_back(loss);
    }
    plot.add_series("combined", x, y);
    plot.write((out / "loss.svg").string());
  }
  {
    // Final pseudo-label class distribution against the ground truth.
    std::vector<double> gt(series.gt_histogram.begin(), series.gt_histogram.end());
    std::vector<double> pseudo(gt.size(), 0.0);
    for (auto it = series.evals.rbegin(); it != series.evals.rend(); ++it)
      if (it->has_pseudo) {
        pseudo.assign(it->class_histogram.begin(), it->class_histogram.end());
        break;
      }
    write_histogram_svg((out / "class_histogram.svg").string(),
                        "Class distribution: gt vs pseudo", {"gt", "pseudo"}, {gt, pseudo});
  }

  json summary;
  summary["final_status"] = series.final_status;
  summary["final_iteration"] = series.final_iteration;
  summary["gt_boxes_per_image"] = series.gt_boxes_per_image;
  summary["gt_histogram"] = series.gt_histogram;
  summary["evals"] = json::array();
  for (const auto& p : series.evals) {
    json e{{"iteration", p.iteration}, {"stage", p.stage}};
    if (p.teacher_map) e["teacher_map"] = *p.teacher_map;
    if (p.student_map) e["student_map"] = *p.student_map;
    if (p.has_pseudo) {
      e["accuracy"] = *p.accuracy;
      e["miou"] = *p.miou;
      e["boxes_per_image"] = *p.boxes_per_image;
      e["kl"] = *p.kl;
      e["class_histogram"] = p.class_histogram;
    }
    summary["evals"].push_back(e);
  }
  if (series.burn_in_limit) {
    const auto& p = *series.burn_in_limit;
    summary["burn_in_limit"] = {{"iteration", p.iteration},
                                {"accuracy", *p.accuracy},
                                {"miou", *p.miou},
                                {"boxes_per_image", *p.boxes_per_image},
                                {"kl", *p.kl}};
  }

  std::ofstream sf(out / "summary.json");
  sf << summary.dump(1) << "\n";
  return summary;
}

}  // namespace ssdet

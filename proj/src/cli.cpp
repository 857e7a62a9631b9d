#include "ssdet/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ssdet/analyze.hpp"
#include "ssdet/svgplot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ssdet {

std::string resolve_output_dir(const std::string& output_dir) {
  fs::path p(output_dir);
  if (p.is_absolute()) return p.string();
  const char* root = std::getenv(kOutputRootEnv);
  return ((root && *root ? fs::path(root) : fs::path(".")) / p).string();
}

PreparedRun prepare_run(const RunConfig& cfg) {
  cfg.validate();
  PreparedRun prep;
  prep.config = cfg;

  const std::vector<ImageSample> all = load_dataset(cfg.dataset);
  prep.fingerprint = dataset_fingerprint(all);
  prep.split = sample_labeled_split(all, cfg.split.fraction, cfg.split.seed);
  prep.split.class_count = dataset_class_count(cfg.dataset);
  prep.eval_samples = load_dataset(cfg.eval_dataset);
  if (prep.eval_samples.empty()) throw ConfigError("eval_dataset: produced no samples");
  for (const auto& s : prep.eval_samples)
    if (s.image.width != cfg.model.image_size || s.image.height != cfg.model.image_size)
      throw ConfigError("eval_dataset: image size disagrees with model.image_size");
  for (const auto& s : prep.split.labeled)
    if (s.image.width != cfg.model.image_size || s.image.height != cfg.model.image_size)
      throw ConfigError("dataset: image size disagrees with model.image_size");
  return prep;
}

TrainResult run_training(const PreparedRun& prep, const std::string& run_dir) {
  fs::create_directories(run_dir);
  {
    char fingerprint[32];
    std::snprintf(fingerprint, sizeof(fingerprint), "%016llx",
                  static_cast<unsigned long long>(prep.fingerprint));
    const json manifest{{"code_version", kVersion},
                        {"seed", prep.config.train.seed},
                        {"dataset_fingerprint", std::string(fingerprint)},
                        {"output_dir", run_dir},
                        {"config", to_json(prep.config)}};
    std::ofstream mf(fs::path(run_dir) / "manifest.json");
    if (!mf) throw DataError("cannot write manifest in " + run_dir);
    mf << manifest.dump(1) << "\n";
  }

  Trainer trainer(prep.config.model, prep.config.loss, prep.config.augment, prep.config.train,
                  prep.split, prep.eval_samples);
  TrainResult result = trainer.train(run_dir);

  {
    json status{{"status", result.status == TrainStatus::kCompleted ? "completed" : "diverged"},
                {"iteration", result.iterations_run}};
    if (result.final_teacher_map) status["final_teacher_map"] = *result.final_teacher_map;
    if (result.final_student_map) status["final_student_map"] = *result.final_student_map;
    std::ofstream sf(fs::path(run_dir) / "status.json");
    sf << status.dump(1) << "\n";
  }
  return result;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              std::ostream& out, std::ostream& err) {
  try {
    const RunConfig cfg = load_run_config(config_path, overrides);
    const PreparedRun prep = prepare_run(cfg);
    const std::string run_dir = resolve_output_dir(cfg.output_dir);
    const TrainResult result = run_training(prep, run_dir);
    if (result.status == TrainStatus::kDiverged) {
      out << "status: diverged at iteration " << result.iterations_run << "\n";
      return kExitDiverged;
    }
    out << "status: completed (" << result.iterations_run << " iterations)\n";
    if (result.final_teacher_map) out << "final teacher mAP: " << *result.final_teacher_map << "\n";
    if (result.final_student_map) out << "final student mAP: " << *result.final_student_map << "\n";
    out << "run dir: " << run_dir << "\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DataError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  }
}

namespace {

std::vector<ImageSample> load_eval_data(const std::string& data_path) {
  std::ifstream f(data_path);
  if (!f) throw DataError("cannot open dataset: " + data_path);
  json doc;
  try {
    f >> doc;
  } catch (const json::exception& e) {
    throw DataError("dataset file is not JSON (" + data_path + "): " + e.what());
  }
  if (doc.contains("images") && doc.contains("annotations")) return load_coco_json(data_path);
  // Otherwise treat it as a data source description.
  RunConfig probe;
  json wrapper{{"dataset", doc}};
  const RunConfig cfg = run_config_from_json(wrapper);
  return load_dataset(cfg.dataset);
}

json eval_report_json(const EvalReport& r, const std::string& which) {
  json per_class = json::array();
  for (const auto& ap : r.per_class_ap) per_class.push_back(ap ? json(*ap) : json(nullptr));
  return {{"which", which},
          {"defined", r.defined},
          {"map", r.map},
          {"iou_thresholds", r.iou_thresholds},
          {"ap_per_threshold", r.ap_per_threshold},
          {"per_class_ap", per_class}};
}

}  // namespace

int cmd_eval(const std::string& checkpoint_path, const std::string& data_path,
             const std::string& which, const std::string& report_path, std::ostream& out,
             std::ostream& err) {
  try {
    if (which != "teacher" && which != "student") {
      err << "validation error: --which must be 'teacher' or 'student'\n";
      return kExitValidation;
    }
    const LoadedCheckpoint ckpt = load_checkpoint(checkpoint_path);
    const ParamVector* params = nullptr;
    if (which == "teacher") {
      if (ckpt.state.teacher.empty()) {
        err << "validation error: checkpoint is from the burn-in stage and has no teacher; "
               "evaluate with --which student\n";
        return kExitValidation;
      }
      params = &ckpt.state.teacher;
    } else {
      params = &ckpt.state.student;
    }

    const std::vector<ImageSample> samples = load_eval_data(data_path);
    DetectorNet net(ckpt.model_cfg);
    for (const auto& s : samples)
      if (s.image.width != ckpt.model_cfg.image_size ||
          s.image.height != ckpt.model_cfg.image_size)
        throw DataError("dataset image size disagrees with the checkpointed architecture");

    const EvalReport report =
        evaluate_detector(net, *params, samples, 0.05, ckpt.model_cfg.proposal_nms_iou, 0.5);

    out << "model: " << which << " (iteration " << ckpt.state.iteration << ")\n";
    if (!report.defined) {
      out << "mAP: undefined (dataset has no ground-truth instances)\n";
    } else {
      out << "mAP(50:95): " << report.map << "\n";
      for (size_t i = 0; i < report.iou_thresholds.size(); ++i)
        out << "  AP@" << report.iou_thresholds[i] << ": " << report.ap_per_threshold[i] << "\n";
      for (size_t c = 0; c < report.per_class_ap.size(); ++c)
        if (report.per_class_ap[c])
          out << "  class " << c << ": " << *report.per_class_ap[c] << "\n";
    }

    const std::string out_path =
        report_path.empty() ? checkpoint_path + ".eval_" + which + ".json" : report_path;
    std::ofstream rf(out_path);
    if (!rf) throw DataError("cannot write report: " + out_path);
    rf << eval_report_json(report, which).dump(1) << "\n";
    return kExitOk;
  } catch (const ArchitectureError& e) {
    err << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const DataError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIo;
  }
}

int cmd_analyze(const std::string& run_dir, std::ostream& out, std::ostream& err) {
  try {
    const json summary = analyze_run(run_dir);
    out << "analysis written to " << (fs::path(run_dir) / "analysis").string() << "\n";
    out << "evaluation points: " << summary.at("evals").size() << "\n";
    return kExitOk;
  } catch (const DataError& e) {
    err << "analyze error: " << e.what() << "\n";
    const std::string what = e.what();
    return what.find("cannot open") != std::string::npos ? kExitIo : kExitValidation;
  }
}

int cmd_sweep(const std::string& config_path, const std::string& parameter,
              const std::vector<std::string>& values,
              const std::vector<std::string>& overrides, std::ostream& out, std::ostream& err) {
  static const std::map<std::string, std::string> kParamPaths = {
      {"delta", "train.delta"},
      {"alpha", "train.alpha"},
      {"lambda_u", "train.lambda_u"},
      {"burn_in_iters", "train.burn_in_iters"},
      {"roi_cls_loss", "loss.roi_cls_loss"},
  };
  const auto it = kParamPaths.find(parameter);
  if (it == kParamPaths.end()) {
    err << "validation error: unknown sweep parameter '" << parameter
        << "' (expected delta, alpha, lambda_u, burn_in_iters, or roi_cls_loss)\n";
    return kExitValidation;
  }
  if (values.empty()) {
    err << "validation error: sweep needs at least one value\n";
    return kExitValidation;
  }

  json base_doc;
  {
    std::ifstream f(config_path);
    if (!f) {
      err << "i/o error: cannot open config file: " << config_path << "\n";
      return kExitIo;
    }
    try {
      f >> base_doc;
    } catch (const json::exception& e) {
      err << "config error: " << e.what() << "\n";
      return kExitValidation;
    }
  }

  std::string sweep_root;
  json rows = json::array();
  std::vector<double> xs, maps, boxes;
  for (const auto& value : values) {
    json row{{"value", value}};
    try {
      std::vector<std::string> cell_overrides = overrides;
      cell_overrides.push_back(it->second + "=" + value);
      RunConfig cfg = run_config_with_overrides(base_doc, cell_overrides);
      if (sweep_root.empty())
        sweep_root = resolve_output_dir(cfg.output_dir + "/sweep_" + parameter);
      const std::string cell_dir = sweep_root + "/value_" + value;
      cfg.output_dir = cell_dir;

      const PreparedRun prep = prepare_run(cfg);
      const TrainResult result = run_training(prep, cell_dir);
      if (result.status == TrainStatus::kDiverged) {
        row["status"] = "diverged";
      } else {
        row["status"] = "ok";
        if (result.final_teacher_map) row["teacher_map"] = *result.final_teacher_map;
        if (result.final_student_map) row["student_map"] = *result.final_student_map;
        const RunSeries series = parse_metric_log(result.metrics_path);
        for (auto rit = series.evals.rbegin(); rit != series.evals.rend(); ++rit)
          if (rit->has_pseudo) {
            row["boxes_per_image"] = *rit->boxes_per_image;
            row["kl"] = *rit->kl;
            break;
          }
        double x = 0.0;
        try {
          x = std::stod(value);
        } catch (...) {
          x = static_cast<double>(xs.size());
        }
        if (row.contains("teacher_map")) {
          xs.push_back(x);
          maps.push_back(row["teacher_map"].get<double>());
        }
        if (row.contains("boxes_per_image")) boxes.push_back(row["boxes_per_image"].get<double>());
      }
    } catch (const ConfigError& e) {
      row["status"] = "invalid";
      row["error"] = e.what();
    } catch (const std::invalid_argument& e) {
      row["status"] = "invalid";
      row["error"] = e.what();
    } catch (const DataError& e) {
      err << "i/o error: " << e.what() << "\n";
      return kExitIo;
    }
    rows.push_back(row);
    out << "sweep " << parameter << "=" << value << ": " << row["status"].get<std::string>()
        << "\n";
  }

  if (sweep_root.empty()) {
    err << "validation error: no sweep cell produced a run\n";
    return kExitValidation;
  }
  const json report{{"parameter", parameter}, {"rows", rows}};
  std::ofstream rf(fs::path(sweep_root) / "sweep_report.json");
  rf << report.dump(1) << "\n";

  if (!xs.empty()) {
    SvgPlot plot("Sweep over " + parameter, parameter, "final teacher mAP");
    plot.add_series("teacher mAP", xs, maps);
    plot.write((fs::path(sweep_root) / "sweep_map.svg").string());
  }
  if (boxes.size() == xs.size() && !xs.empty()) {
    SvgPlot plot("Pseudo boxes per image over " + parameter, parameter, "boxes / image");
    plot.add_series("boxes per image", xs, boxes);
    plot.write((fs::path(sweep_root) / "sweep_boxes.svg").string());
  }
  out << "sweep report: " << (fs::path(sweep_root) / "sweep_report.json").string() << "\n";
  return kExitOk;
}

}  // namespace ssdet

#include <CLI11.hpp>
#include <iostream>

#include "ssdet/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"ssdet: semi-supervised shape detection trainer"};
  app.set_version_flag("--version", ssdet::kVersion);
  app.require_subcommand(1);

  std::string config_path, checkpoint, data, which = "teacher", run_dir, report_path;
  std::string sweep_param, sweep_values;
  std::vector<std::string> overrides;

  auto* train = app.add_subcommand("train", "Run the two-stage training regimen");
  train->add_option("--config", config_path, "Run config (JSON)")->required();
  train->add_option("--set", overrides, "Override config values (key.path=value)");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--ckpt", checkpoint, "Checkpoint file")->required();
  eval->add_option("--data", data, "COCO annotations or dataset description (JSON)")->required();
  eval->add_option("--which", which, "teacher|student (default teacher)");
  eval->add_option("--out", report_path, "Report output path");

  auto* analyze = app.add_subcommand("analyze", "Emit diagnostic plots for a run");
  analyze->add_option("--run", run_dir, "Run directory with metrics.jsonl")->required();

  auto* sweep = app.add_subcommand("sweep", "Train once per parameter value and collate");
  sweep->add_option("--config", config_path, "Run config (JSON)")->required();
  sweep->add_option("--param", sweep_param,
                    "delta|alpha|lambda_u|burn_in_iters|roi_cls_loss")->required();
  sweep->add_option("--values", sweep_values, "Comma-separated values")->required();
  sweep->add_option("--set", overrides, "Override config values (key.path=value)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ssdet::kExitValidation;
  }

  if (train->parsed()) return ssdet::cmd_train(config_path, overrides, std::cout, std::cerr);
  if (eval->parsed())
    return ssdet::cmd_eval(checkpoint, data, which, report_path, std::cout, std::cerr);
  if (analyze->parsed()) return ssdet::cmd_analyze(run_dir, std::cout, std::cerr);
  if (sweep->parsed()) {
    std::vector<std::string> values;
    std::string item;
    std::stringstream ss(sweep_values);
    while (std::getline(ss, item, ','))
      if (!item.empty()) values.push_back(item);
    return ssdet::cmd_sweep(config_path, sweep_param, values, overrides, std::cout, std::cerr);
  }
  return ssdet::kExitValidation;
}

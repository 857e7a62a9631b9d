#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ssdet/config.hpp"
#include "ssdet/trainer.hpp"

namespace ssdet {

inline constexpr const char* kVersion = "ssdet 0.1.0";
/// Root directory all relative output_dir values resolve against.
inline constexpr const char* kOutputRootEnv = "SSDET_OUTPUT_ROOT";

/// Stable process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 1,
  kExitDiverged = 2,
  kExitIo = 3,
};

std::string resolve_output_dir(const std::string& output_dir);

/// Builds the trainer inputs (datasets, split) a validated config
/// describes. Throws DataError / ConfigError.
struct PreparedRun {
  RunConfig config;
  DatasetSplit split;
  std::vector<ImageSample> eval_samples;
  uint64_t fingerprint = 0;
};
PreparedRun prepare_run(const RunConfig& cfg);

/// Runs one training end to end into run_dir: manifest first, then the
/// trainer with metric log, checkpoints and status.json.
TrainResult run_training(const PreparedRun& prep, const std::string& run_dir);

int cmd_train(const std::string& config_path, const std::vector<std::string>& overrides,
              std::ostream& out, std::ostream& err);

int cmd_eval(const std::string& checkpoint_path, const std::string& data_path,
             const std::string& which, const std::string& report_path, std::ostream& out,
             std::ostream& err);

int cmd_analyze(const std::string& run_dir, std::ostream& out, std::ostream& err);

int cmd_sweep(const std::string& config_path, const std::string& parameter,
              const std::vector<std::string>& values,
              const std::vector<std::string>& overrides, std::ostream& out, std::ostream& err);

}  // namespace ssdet

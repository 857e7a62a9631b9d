#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "ssdet/augment.hpp"
#include "ssdet/dataset.hpp"
#include "ssdet/detector.hpp"
#include "ssdet/losses.hpp"
#include "ssdet/trainer.hpp"

namespace ssdet {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataSourceConfig {
  enum class Type { kSynthetic, kCoco };
  Type type = Type::kSynthetic;
  SyntheticConfig synthetic;
  std::string coco_annotations;  // path, for Type::kCoco
};

struct SplitConfig {
  double fraction = 0.01;
  uint64_t seed = 11;
};

/// One run, fully resolved: data, split, model, losses, augmentation,
/// regimen, output directory (relative paths resolve against the output
/// root, see cli).
struct RunConfig {
  DataSourceConfig dataset;
  DataSourceConfig eval_dataset;
  SplitConfig split;
  DetectorConfig model;
  LossConfig loss;
  AugmentConfig augment;
  TrainConfig train;
  std::string output_dir = "run";

  /// Field-level validation; throws ConfigError.
  void validate() const;
};

nlohmann::json to_json(const DetectorConfig& cfg);
DetectorConfig detector_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);

/// Parses a config file and applies `--set key.path=value` overrides in
/// order. Values parse as JSON when possible, otherwise as strings.
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides);

/// The same, starting from an in-memory document (used by sweeps).
RunConfig run_config_with_overrides(nlohmann::json doc,
                                    const std::vector<std::string>& overrides);

void apply_override(nlohmann::json& doc, const std::string& spec);

/// Materializes the sample set a DataSourceConfig describes.
std::vector<ImageSample> load_dataset(const DataSourceConfig& cfg);
int dataset_class_count(const DataSourceConfig& cfg);

/// FNV-1a content hash over annotations and (8-bit) pixel data.
uint64_t dataset_fingerprint(const std::vector<ImageSample>& samples);

}  // namespace ssdet

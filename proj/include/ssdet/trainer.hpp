#pragma once

#include <optional>
#include <string>

#include "ssdet/augment.hpp"
#include "ssdet/dataset.hpp"
#include "ssdet/detector.hpp"
#include "ssdet/ema.hpp"
#include "ssdet/evalmetrics.hpp"
#include "ssdet/losses.hpp"
#include "ssdet/pseudolabel.hpp"

namespace ssdet {

/// Training regimen knobs. Defaults follow the standard recipe; the
/// desk-scale run configs shipped under configs/ override the schedule.
struct TrainConfig {
  enum class Mode { kSemi, kSupervised };
  Mode mode = Mode::kSemi;

  double delta = 0.7;      // pseudo-label confidence threshold
  double lambda_u = 4.0;   // unsupervised loss weight
  double alpha = 0.9996;   // EMA rate
  bool ema_enabled = true;  // false: teacher shares the student weights

  int labeled_batch = 8;
  int unlabeled_batch = 8;
  double learning_rate = 0.01;
  double momentum = 0.9;
  int burn_in_iters = 300;
  int total_iters = 3000;
  int eval_every = 300;
  int log_every = 20;
  uint64_t seed = 1;

  double pseudo_nms_iou = 0.5;
  double pseudo_score_floor = 0.05;
  double eval_score_floor = 0.05;
  double eval_nms_iou = 0.5;

  int diag_images = 64;     // unlabeled slice used for pseudo diagnostics
  double match_iou = 0.5;   // diagnostics matching threshold
  double kl_epsilon = 1e-6;

  double divergence_loss_limit = 1e4;
  int divergence_patience = 10;
  int checkpoint_every = 0;  // 0 = final checkpoint only
  bool dump_pseudo = false;
  bool labeled_weak_augment = true;

  void validate() const;
};

enum class TrainStage { kBurnIn, kMutual };

/// The checkpointable unit: both parameter vectors, optimizer state, the
/// iteration counter and the master seed (all random streams derive from
/// (seed, iteration, purpose), so no engine state needs to persist).
struct TrainState {
  ParamVector student;
  ParamVector teacher;          // absent (empty) during burn-in
  Eigen::VectorXd momentum_buf;
  int iteration = 0;
  TrainStage stage = TrainStage::kBurnIn;
  uint64_t seed = 0;
};

struct StepInfo {
  LossBreakdown supervised;
  LossBreakdown unsupervised;      // zero in burn-in / supervised mode
  double combined = 0.0;           // sup.total + lambda_u * unsup.total
  double pseudo_boxes_per_image = 0.0;
};

enum class TrainStatus { kCompleted, kDiverged };

struct TrainResult {
  TrainStatus status = TrainStatus::kCompleted;
  TrainState state;
  int iterations_run = 0;
  std::string metrics_path;
  std::optional<double> final_teacher_map;
  std::optional<double> final_student_map;
};

/// Schedule helper mirroring the reference burn-in lengths per labeled
/// fraction (1k/2k/6k/12k/20k for 0.5/1/2/5/10 percent), scaled by `scale`.
int suggest_burn_in_iters(double fraction, double scale);

void save_checkpoint(const std::string& path, const TrainState& state,
                     const DetectorConfig& model_cfg);

struct LoadedCheckpoint {
  TrainState state;
  DetectorConfig model_cfg;
};
/// Throws DataError with layout diagnostics on corrupt or mismatched files.
LoadedCheckpoint load_checkpoint(const std::string& path);

/// Two-stage trainer: Burn-In on labeled data, then Teacher-Student mutual
/// learning (pseudo-labels from the weak view, student loss on weak labeled
/// + strong unlabeled views, SGD on the student only, EMA to the teacher).
class Trainer {
 public:
  Trainer(DetectorConfig model_cfg, LossConfig loss_cfg, AugmentConfig aug_cfg,
          TrainConfig train_cfg, DatasetSplit split, std::vector<ImageSample> eval_samples);

  const DetectorNet& net() const { return net_; }
  const DatasetSplit& split() const { return split_; }
  const TrainConfig& train_config() const { return cfg_; }

  /// Freshly initialized state at iteration 0 (burn-in stage, no teacher).
  TrainState initial_state() const;

  /// Runs exactly the burn-in stage and returns the duplicated state.
  TrainState burn_in() const;

  /// One training step: burn-in supervised step, or a full mutual-learning
  /// step (pseudo-label generation, joint loss, student SGD, teacher EMA),
  /// depending on the state's stage. Handles the burn-in -> mutual
  /// transition when iteration reaches burn_in_iters in semi mode.
  StepInfo step(TrainState& state) const;

  /// Full regimen with metric log, checkpoints and divergence monitoring.
  /// Writes metrics.jsonl and checkpoint files under run_dir.
  TrainResult train(const std::string& run_dir) const;

  EvalReport evaluate(const ParamVector& params) const;

  /// Pseudo-label sets for the diagnostic slice of the unlabeled pool.
  std::vector<PseudoLabelSet> diagnostic_pseudo_labels(const ParamVector& teacher,
                                                       int iteration) const;
  PseudoDiagnostics diagnostics(const ParamVector& teacher, int iteration) const;
  const std::vector<long>& diag_gt_histogram() const { return diag_gt_hist_; }
  double diag_gt_boxes_per_image() const { return diag_gt_boxes_per_image_; }

 private:
  StepInfo supervised_step(TrainState& state) const;
  StepInfo mutual_step(TrainState& state) const;
  void apply_sgd(TrainState& state, const Eigen::VectorXd& grad) const;
  std::vector<int> sample_batch(size_t pool, int count, uint64_t tag, int iteration) const;
  double accumulate_image_loss(const ParamVector& params, const Image& image,
                               const std::vector<LabeledBox>& targets, bool supervised,
                               uint64_t sample_seed, double weight, Eigen::VectorXd& grad,
                               LossBreakdown& sum) const;

  DetectorNet net_;
  LossConfig loss_cfg_;
  AugmentConfig aug_cfg_;
  TrainConfig cfg_;
  DatasetSplit split_;
  std::vector<ImageSample> eval_samples_;
  size_t diag_count_ = 0;
  std::vector<long> diag_gt_hist_;
  double diag_gt_boxes_per_image_ = 0.0;
};

}  // namespace ssdet

#include "ssdet/trainer.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ssdet/config.hpp"
#include "ssdet/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ssdet {

namespace {

// Stream purposes; every random draw in training derives from
// (seed, purpose, iteration, slot).
enum : uint64_t {
  kStreamInit = 1,
  kStreamLabeledBatch,
  kStreamUnlabeledBatch,
  kStreamAugLabeled,
  kStreamAugUnlabeledWeak,
  kStreamAugUnlabeledStrong,
  kStreamLossSup,
  kStreamLossUnsup,
};

json breakdown_to_json(const LossBreakdown& b) {
  return {{"rpn_cls", b.rpn_cls},
          {"rpn_reg", b.rpn_reg},
          {"roi_cls", b.roi_cls},
          {"roi_reg", b.roi_reg},
          {"total", b.total}};
}

json report_to_json(const EvalReport& r) {
  json per_class = json::array();
  for (const auto& ap : r.per_class_ap)
    per_class.push_back(ap ? json(*ap) : json(nullptr));
  return {{"defined", r.defined},
          {"map", r.map},
          {"ap_per_threshold", r.ap_per_threshold},
          {"per_class_ap", per_class}};
}

json diagnostics_to_json(const PseudoDiagnostics& d, double kl) {
  return {{"accuracy", d.accuracy},
          {"miou", d.miou},
          {"boxes_per_image", d.boxes_per_image},
          {"class_histogram", d.class_histogram},
          {"pseudo_empty", d.pseudo_empty},
          {"kl", kl}};
}

}  // namespace

void TrainConfig::validate() const {
  if (!(delta >= 0.0 && delta <= 1.0))
    throw std::invalid_argument("train.delta: must lie in [0, 1]");
  if (lambda_u < 0.0) throw std::invalid_argument("train.lambda_u: must be >= 0");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("train.alpha: must lie in [0, 1]");
  if (labeled_batch < 1 || unlabeled_batch < 1)
    throw std::invalid_argument("train batch sizes: must be >= 1");
  if (learning_rate <= 0.0) throw std::invalid_argument("train.learning_rate: must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw std::invalid_argument("train.momentum: must lie in [0, 1)");
  if (total_iters < 1) throw std::invalid_argument("train.total_iters: must be >= 1");
  if (mode == Mode::kSemi && !(burn_in_iters >= 0 && burn_in_iters < total_iters))
    throw std::invalid_argument("train.burn_in_iters: must satisfy 0 <= burn_in < total_iters");
  if (eval_every < 1 || log_every < 1)
    throw std::invalid_argument("train.eval_every/log_every: must be >= 1");
  if (!(pseudo_nms_iou > 0.0 && pseudo_nms_iou <= 1.0))
    throw std::invalid_argument("train.pseudo_nms_iou: must lie in (0, 1]");
  if (divergence_patience < 1)
    throw std::invalid_argument("train.divergence_patience: must be >= 1");
}

int suggest_burn_in_iters(double fraction, double scale) {
  // Reference schedule: 1k/2k/6k/12k/20k burn-in iterations at
  // 0.5/1/2/5/10 percent labeled data, interpolated on the log-fraction
  // axis between those anchors and clamped at the ends.
  static const std::vector<std::pair<double, double>> anchor = {
      {0.005, 1000.0}, {0.01, 2000.0}, {0.02, 6000.0}, {0.05, 12000.0}, {0.10, 20000.0}};
  double iters;
  if (fraction <= anchor.front().first) {
    iters = anchor.front().second;
  } else if (fraction >= anchor.back().first) {
    iters = anchor.back().second;
  } else {
    iters = anchor.back().second;
    for (size_t i = 1; i < anchor.size(); ++i) {
      if (fraction <= anchor[i].first) {
        const double t = (std::log(fraction) - std::log(anchor[i - 1].first)) /
                         (std::log(anchor[i].first) - std::log(anchor[i - 1].first));
        iters = anchor[i - 1].second + t * (anchor[i].second - anchor[i - 1].second);
        break;
      }
    }
  }
  return std::max(1, static_cast<int>(std::lround(iters * scale)));
}

Trainer::Trainer(DetectorConfig model_cfg, LossConfig loss_cfg, AugmentConfig aug_cfg,
                 TrainConfig train_cfg, DatasetSplit split,
                 std::vector<ImageSample> eval_samples)
    : net_(model_cfg),
      loss_cfg_(loss_cfg),
      aug_cfg_(aug_cfg),
      cfg_(train_cfg),
      split_(std::move(split)),
      eval_samples_(std::move(eval_samples)) {
  loss_cfg_.validate();
  cfg_.validate();
  if (split_.labeled.empty()) throw std::invalid_argument("train: labeled split is empty");
  if (cfg_.mode == TrainConfig::Mode::kSemi && split_.unlabeled.empty())
    throw std::invalid_argument("train: semi mode requires a nonempty unlabeled pool");

  diag_count_ = std::min<size_t>(static_cast<size_t>(std::max(0, cfg_.diag_images)),
                                 split_.unlabeled.size());
  diag_gt_hist_.assign(static_cast<size_t>(model_cfg.class_count), 0);
  long total = 0;
  for (size_t i = 0; i < diag_count_; ++i) {
    for (const auto& lb : split_.unlabeled_hidden_gt[i]) {
      if (lb.class_id >= 0 && lb.class_id < model_cfg.class_count)
        ++diag_gt_hist_[static_cast<size_t>(lb.class_id)];
      ++total;
    }
  }
  diag_gt_boxes_per_image_ =
      diag_count_ > 0 ? double(total) / double(diag_count_) : 0.0;
}

TrainState Trainer::initial_state() const {
  TrainState st;
  st.seed = cfg_.seed;
  Rng init_rng(mix_seed({cfg_.seed, kStreamInit}));
  st.student = net_.init_params(init_rng);
  st.momentum_buf = Eigen::VectorXd::Zero(st.student.values.size());
  st.iteration = 0;
  st.stage = TrainStage::kBurnIn;
  return st;
}

std::vector<int> Trainer::sample_batch(size_t pool, int count, uint64_t tag,
                                       int iteration) const {
  Rng rng(mix_seed({cfg_.seed, tag, static_cast<uint64_t>(iteration)}));
  std::vector<int> idx(static_cast<size_t>(count));
  for (auto& i : idx) i = rng.uniform_int(static_cast<int>(pool));
  return idx;
}

double Trainer::accumulate_image_loss(const ParamVector& params, const Image& image,
                                      const std::vector<LabeledBox>& targets, bool supervised,
                                      uint64_t sample_seed, double weight,
                                      Eigen::VectorXd& grad, LossBreakdown& sum) const {
  ForwardTrace trace;
  const ProposalOutput props = net_.forward_proposals(params, image, &trace);
  const std::vector<BoxD> roi_boxes = make_roi_training_boxes(
      net_.anchors(), targets, image.width, image.height, loss_cfg_, sample_seed);
  const RoiOutput rois = net_.forward_roi(params, image, roi_boxes, &trace);

  HeadGradients hg;
  const LossBreakdown b = supervised
                              ? supervised_loss(props, rois, targets, loss_cfg_, sample_seed, &hg)
                              : unsupervised_loss(props, rois, targets, loss_cfg_, sample_seed, &hg);
  if (weight != 1.0) {
    hg.d_objectness_logits *= weight;
    hg.d_rpn_deltas *= weight;
    hg.d_cls_logits *= weight;
    hg.d_roi_deltas *= weight;
  }
  net_.backward(params, trace, hg, grad);

  sum.rpn_cls += b.rpn_cls;
  sum.rpn_reg += b.rpn_reg;
  sum.roi_cls += b.roi_cls;
  sum.roi_reg += b.roi_reg;
  sum.total += b.total;
  return b.total;
}

void Trainer::apply_sgd(TrainState& state, const Eigen::VectorXd& grad) const {
  state.momentum_buf = cfg_.momentum * state.momentum_buf + grad;
  state.student.values -= cfg_.learning_rate * state.momentum_buf;
}

StepInfo Trainer::supervised_step(TrainState& state) const {
  StepInfo info;
  const int bl = cfg_.labeled_batch;
  const std::vector<int> batch =
      sample_batch(split_.labeled.size(), bl, kStreamLabeledBatch, state.iteration);

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(state.student.values.size());
  LossBreakdown sum;
  for (int slot = 0; slot < bl; ++slot) {
    const ImageSample& sample = split_.labeled[static_cast<size_t>(batch[static_cast<size_t>(slot)])];
    Rng aug_rng(mix_seed({cfg_.seed, kStreamAugLabeled, static_cast<uint64_t>(state.iteration),
                          static_cast<uint64_t>(slot)}));
    AugmentedPair view = cfg_.labeled_weak_augment
                             ? weak_augment(sample, aug_cfg_, aug_rng)
                             : AugmentedPair{sample.image, sample.boxes};
    const uint64_t loss_seed = mix_seed({cfg_.seed, kStreamLossSup,
                                         static_cast<uint64_t>(state.iteration),
                                         static_cast<uint64_t>(slot)});
    accumulate_image_loss(state.student, view.image, view.boxes, true, loss_seed, 1.0 / bl,
                          grad, sum);
  }

  info.supervised = LossBreakdown{sum.rpn_cls / bl, sum.rpn_reg / bl, sum.roi_cls / bl,
                                  sum.roi_reg / bl, sum.total / bl};
  info.combined = info.supervised.total;

  // Gradients above were already scaled per image; grad is the batch mean.
  apply_sgd(state, grad);
  ++state.iteration;
  return info;
}

StepInfo Trainer::mutual_step(TrainState& state) const {
  StepInfo info;
  const int bl = cfg_.labeled_batch, bu = cfg_.unlabeled_batch;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(state.student.values.size());

  // Supervised branch (weakly augmented labeled batch).
  {
    const std::vector<int> batch =
        sample_batch(split_.labeled.size(), bl, kStreamLabeledBatch, state.iteration);
    LossBreakdown sum;
    for (int slot = 0; slot < bl; ++slot) {
      const ImageSample& sample =
          split_.labeled[static_cast<size_t>(batch[static_cast<size_t>(slot)])];
      Rng aug_rng(mix_seed({cfg_.seed, kStreamAugLabeled, static_cast<uint64_t>(state.iteration),
                            static_cast<uint64_t>(slot)}));
      AugmentedPair view = cfg_.labeled_weak_augment
                               ? weak_augment(sample, aug_cfg_, aug_rng)
                               : AugmentedPair{sample.image, sample.boxes};
      const uint64_t loss_seed = mix_seed({cfg_.seed, kStreamLossSup,
                                           static_cast<uint64_t>(state.iteration),
                                           static_cast<uint64_t>(slot)});
      accumulate_image_loss(state.student, view.image, view.boxes, true, loss_seed, 1.0 / bl,
                            grad, sum);
    }
    info.supervised = LossBreakdown{sum.rpn_cls / bl, sum.rpn_reg / bl, sum.roi_cls / bl,
                                    sum.roi_reg / bl, sum.total / bl};
  }

  // Unsupervised branch: teacher pseudo-labels on the weak view, student
  // loss on the strong view of the same image. Skipped entirely when
  // lambda_u is zero so that trajectory matches supervised-only training
  // bit for bit.
  if (cfg_.lambda_u > 0.0) {
    const std::vector<int> batch =
        sample_batch(split_.unlabeled.size(), bu, kStreamUnlabeledBatch, state.iteration);
    LossBreakdown sum;
    long pseudo_total = 0;
    for (int slot = 0; slot < bu; ++slot) {
      const ImageSample& sample =
          split_.unlabeled[static_cast<size_t>(batch[static_cast<size_t>(slot)])];
      Rng weak_rng(mix_seed({cfg_.seed, kStreamAugUnlabeledWeak,
                             static_cast<uint64_t>(state.iteration),
                             static_cast<uint64_t>(slot)}));
      const AugmentedPair weak = weak_augment(sample, aug_cfg_, weak_rng);

      const PseudoLabelSet pseudo = generate_pseudo_labels(
          net_, state.teacher, weak.image, cfg_.delta, cfg_.pseudo_nms_iou, state.iteration,
          cfg_.pseudo_score_floor, net_.config().proposal_nms_iou);
      pseudo_total += static_cast<long>(pseudo.boxes.size());

      Rng strong_rng(mix_seed({cfg_.seed, kStreamAugUnlabeledStrong,
                               static_cast<uint64_t>(state.iteration),
                               static_cast<uint64_t>(slot)}));
      const Image strong = strong_augment(weak.image, aug_cfg_, strong_rng);

      const uint64_t loss_seed = mix_seed({cfg_.seed, kStreamLossUnsup,
                                           static_cast<uint64_t>(state.iteration),
                                           static_cast<uint64_t>(slot)});
      accumulate_image_loss(state.student, strong, pseudo.boxes, false, loss_seed,
                            cfg_.lambda_u / bu, grad, sum);
    }
    info.unsupervised = LossBreakdown{sum.rpn_cls / bu, sum.rpn_reg / bu, sum.roi_cls / bu,
                                      sum.roi_reg / bu, sum.total / bu};
    info.pseudo_boxes_per_image = double(pseudo_total) / double(bu);
  }

  info.combined = info.supervised.total + cfg_.lambda_u * info.unsupervised.total;
  apply_sgd(state, grad);

  const double alpha_used = cfg_.ema_enabled ? cfg_.alpha : 0.0;
  ema_update_inplace(state.teacher, state.student, alpha_used);
  ++state.iteration;
  return info;
}

StepInfo Trainer::step(TrainState& state) const {
  if (cfg_.mode == TrainConfig::Mode::kSemi && state.stage == TrainStage::kBurnIn &&
      state.iteration >= cfg_.burn_in_iters) {
    state.teacher = clone_params(state.student);
    state.stage = TrainStage::kMutual;
  }
  if (state.stage == TrainStage::kMutual) return mutual_step(state);
  return supervised_step(state);
}

TrainState Trainer::burn_in() const {
  TrainState state = initial_state();
  while (state.iteration < cfg_.burn_in_iters) supervised_step(state);
  state.teacher = clone_params(state.student);
  state.stage = TrainStage::kMutual;
  return state;
}

EvalReport Trainer::evaluate(const ParamVector& params) const {
  return evaluate_detector(net_, params, eval_samples_, cfg_.eval_score_floor,
                           net_.config().proposal_nms_iou, cfg_.eval_nms_iou);
}

std::vector<PseudoLabelSet> Trainer::diagnostic_pseudo_labels(const ParamVector& teacher,
                                                              int iteration) const {
  std::vector<PseudoLabelSet> sets;
  sets.reserve(diag_count_);
  for (size_t i = 0; i < diag_count_; ++i)
    sets.push_back(generate_pseudo_labels(net_, teacher, split_.unlabeled[i].image, cfg_.delta,
                                          cfg_.pseudo_nms_iou, iteration,
                                          cfg_.pseudo_score_floor,
                                          net_.config().proposal_nms_iou));
  return sets;
}

PseudoDiagnostics Trainer::diagnostics(const ParamVector& teacher, int iteration) const {
  const auto sets = diagnostic_pseudo_labels(teacher, iteration);
  std::vector<std::vector<LabeledBox>> gts(split_.unlabeled_hidden_gt.begin(),
                                           split_.unlabeled_hidden_gt.begin() +
                                               static_cast<long>(diag_count_));
  return compute_pseudo_diagnostics(sets, gts, net_.config().class_count, cfg_.match_iou);
}

TrainResult Trainer::train(const std::string& run_dir) const {
  fs::create_directories(run_dir);
  const std::string metrics_path = (fs::path(run_dir) / "metrics.jsonl").string();
  std::ofstream log(metrics_path);
  if (!log) throw DataError("cannot open metric log for writing: " + metrics_path);

  log << json{{"type", "diag_meta"},
              {"diag_images", diag_count_},
              {"gt_histogram", diag_gt_hist_},
              {"gt_boxes_per_image", diag_gt_boxes_per_image_},
              {"labeled", split_.labeled.size()},
              {"unlabeled", split_.unlabeled.size()}}
             .dump()
      << "\n";

  TrainResult result;
  TrainState state = initial_state();
  int bad_steps = 0;

  auto write_eval = [&](const TrainState& st) {
    json rec{{"type", "eval"}, {"iteration", st.iteration}};
    rec["stage"] = st.stage == TrainStage::kMutual ? "mutual" : "burn_in";
    const EvalReport student_report = evaluate(st.student);
    rec["student"] = report_to_json(student_report);
    if (student_report.defined) result.final_student_map = student_report.map;
    if (st.stage == TrainStage::kMutual) {
      const EvalReport teacher_report = evaluate(st.teacher);
      rec["teacher"] = report_to_json(teacher_report);
      if (teacher_report.defined) result.final_teacher_map = teacher_report.map;
      if (diag_count_ > 0) {
        const PseudoDiagnostics d = diagnostics(st.teacher, st.iteration);
        const double kl = class_histogram_kl(d.class_histogram, diag_gt_hist_, cfg_.kl_epsilon);
        rec["pseudo"] = diagnostics_to_json(d, kl);
        if (cfg_.dump_pseudo) {
          const auto sets = diagnostic_pseudo_labels(st.teacher, st.iteration);
          char name[48];
          std::snprintf(name, sizeof(name), "pseudo_%06d.json", st.iteration);
          fs::create_directories(fs::path(run_dir) / "pseudo");
          dump_pseudo_labels_coco(sets, net_.config().class_count,
                                  net_.config().image_size,
                                  (fs::path(run_dir) / "pseudo" / name).string());
        }
      }
    }
    log << rec.dump() << "\n";
  };

  while (state.iteration < cfg_.total_iters) {
    // Burn-in limit diagnostics: the frozen model right at the stage
    // switch, before any mutual learning.
    if (cfg_.mode == TrainConfig::Mode::kSemi && state.stage == TrainStage::kBurnIn &&
        state.iteration >= cfg_.burn_in_iters && diag_count_ > 0) {
      const PseudoDiagnostics d = diagnostics(state.student, state.iteration);
      const double kl = class_histogram_kl(d.class_histogram, diag_gt_hist_, cfg_.kl_epsilon);
      log << json{{"type", "burn_in_limit"},
                  {"iteration", state.iteration},
                  {"pseudo", diagnostics_to_json(d, kl)}}
                 .dump()
          << "\n";
    }

    const StepInfo info = step(state);

    if (state.iteration % cfg_.log_every == 0 || state.iteration == cfg_.total_iters) {
      log << json{{"type", "step"},
                  {"iteration", state.iteration},
                  {"stage", state.stage == TrainStage::kMutual ? "mutual" : "burn_in"},
                  {"sup", breakdown_to_json(info.supervised)},
                  {"unsup", breakdown_to_json(info.unsupervised)},
                  {"combined", info.combined},
                  {"pseudo_boxes_per_image", info.pseudo_boxes_per_image}}
                 .dump()
          << "\n";
    }

    const bool bad = !std::isfinite(info.combined) || info.combined > cfg_.divergence_loss_limit;
    bad_steps = bad ? bad_steps + 1 : 0;
    if (bad_steps >= cfg_.divergence_patience) {
      save_checkpoint((fs::path(run_dir) / "checkpoint_diverged.ckpt").string(), state,
                      net_.config());
      log << json{{"type", "final"},
                  {"status", "diverged"},
                  {"iteration", state.iteration}}
                 .dump()
          << "\n";
      result.status = TrainStatus::kDiverged;
      result.state = std::move(state);
      result.iterations_run = result.state.iteration;
      result.metrics_path = metrics_path;
      return result;
    }

    if (state.iteration % cfg_.eval_every == 0 || state.iteration == cfg_.total_iters)
      write_eval(state);
    if (cfg_.checkpoint_every > 0 && state.iteration % cfg_.checkpoint_every == 0) {
      char name[48];
      std::snprintf(name, sizeof(name), "checkpoint_%06d.ckpt", state.iteration);
      save_checkpoint((fs::path(run_dir) / name).string(), state, net_.config());
    }
  }

  save_checkpoint((fs::path(run_dir) / "checkpoint_final.ckpt").string(), state, net_.config());
  log << json{{"type", "final"}, {"status", "completed"}, {"iteration", state.iteration}}.dump()
      << "\n";
  result.status = TrainStatus::kCompleted;
  result.state = std::move(state);
  result.iterations_run = result.state.iteration;
  result.metrics_path = metrics_path;
  return result;
}

void save_checkpoint(const std::string& path, const TrainState& state,
                     const DetectorConfig& model_cfg) {
  json layout = json::array();
  for (const auto& e : state.student.layout->entries())
    layout.push_back({{"name", e.name}, {"offset", e.offset}, {"rows", e.rows}, {"cols", e.cols}});
  const json header{{"format_version", 1},
                    {"iteration", state.iteration},
                    {"stage", state.stage == TrainStage::kMutual ? "mutual" : "burn_in"},
                    {"seed", state.seed},
                    {"has_teacher", !state.teacher.empty()},
                    {"param_count", state.student.values.size()},
                    {"model", to_json(model_cfg)},
                    {"layout", layout}};
  const std::string header_str = header.dump();

  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint for writing: " + path);
  f.write("SSDETCK1", 8);
  const uint64_t len = header_str.size();
  f.write(reinterpret_cast<const char*>(&len), sizeof(len));
  f.write(header_str.data(), static_cast<std::streamsize>(len));
  auto write_vec = [&f](const Eigen::VectorXd& v) {
    f.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(v.size())));
  };
  write_vec(state.student.values);
  if (!state.teacher.empty()) write_vec(state.teacher.values);
  write_vec(state.momentum_buf);
  if (!f) throw DataError("short write on checkpoint: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, "SSDETCK", 7) != 0)
    throw DataError("not a checkpoint file: " + path);
  if (magic[7] != '1')
    throw DataError("unsupported checkpoint format version in " + path +
                    " (expected SSDETCK1)");
  uint64_t len = 0;
  f.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!f || len == 0 || len > (1ull << 24)) throw DataError("corrupt checkpoint header: " + path);
  std::string header_str(len, '\0');
  f.read(header_str.data(), static_cast<std::streamsize>(len));
  if (!f) throw DataError("truncated checkpoint header: " + path);

  json header;
  try {
    header = json::parse(header_str);
  } catch (const json::exception& e) {
    throw DataError("corrupt checkpoint header JSON: " + std::string(e.what()));
  }
  if (header.value("format_version", 0) != 1)
    throw DataError("unsupported checkpoint format_version in " + path);

  LoadedCheckpoint out;
  out.model_cfg = detector_config_from_json(header.at("model"));
  DetectorNet net(out.model_cfg);

  // Layout diagnostics: the stored layout must equal the one the stored
  // model config reconstructs.
  const auto& entries = net.layout()->entries();
  const auto& stored = header.at("layout");
  if (stored.size() != entries.size())
    throw DataError("checkpoint layout mismatch: " + std::to_string(stored.size()) +
                    " entries stored, architecture has " + std::to_string(entries.size()));
  for (size_t i = 0; i < entries.size(); ++i) {
    const auto& s = stored[i];
    const auto& e = entries[i];
    if (s.at("name").get<std::string>() != e.name ||
        s.at("offset").get<Eigen::Index>() != e.offset ||
        s.at("rows").get<Eigen::Index>() != e.rows || s.at("cols").get<Eigen::Index>() != e.cols)
      throw DataError("checkpoint layout mismatch at entry '" +
                      s.at("name").get<std::string>() + "' (expected '" + e.name + "' " +
                      std::to_string(e.rows) + "x" + std::to_string(e.cols) + " at offset " +
                      std::to_string(e.offset) + ")");
  }

  const Eigen::Index n = header.at("param_count").get<Eigen::Index>();
  if (n != net.layout()->total())
    throw DataError("checkpoint param_count disagrees with architecture");

  TrainState& st = out.state;
  st.iteration = header.at("iteration").get<int>();
  st.stage = header.at("stage").get<std::string>() == "mutual" ? TrainStage::kMutual
                                                               : TrainStage::kBurnIn;
  st.seed = header.at("seed").get<uint64_t>();

  auto read_vec = [&f, &path](Eigen::VectorXd& v, Eigen::Index size) {
    v.resize(size);
    f.read(reinterpret_cast<char*>(v.data()),
           static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(size)));
    if (!f) throw DataError("truncated checkpoint payload: " + path);
  };
  st.student = make_param_vector(net.layout());
  read_vec(st.student.values, n);
  if (header.at("has_teacher").get<bool>()) {
    st.teacher = make_param_vector(net.layout());
    read_vec(st.teacher.values, n);
  }
  read_vec(st.momentum_buf, n);
  return out;
}

}  // namespace ssdet

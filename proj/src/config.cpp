#include "ssdet/config.hpp"

#include <cmath>
#include <fstream>

namespace ssdet {

using nlohmann::json;

namespace {

// Reads j[key] into out when present; leaves the default otherwise.
template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
  }
}

json augment_to_json(const AugmentConfig& a) {
  json cuts = json::array();
  for (const auto& c : a.cutouts)
    cuts.push_back({{"prob", c.prob},
                    {"scale", {c.scale_min, c.scale_max}},
                    {"ratio", {c.ratio_min, c.ratio_max}}});
  return {{"flip_prob", a.flip_prob},
          {"color_jitter_prob", a.color_jitter_prob},
          {"jitter_factor", {a.jitter_factor_min, a.jitter_factor_max}},
          {"hue_shift_max", a.hue_shift_max},
          {"grayscale_prob", a.grayscale_prob},
          {"blur_prob", a.blur_prob},
          {"blur_sigma", {a.blur_sigma_min, a.blur_sigma_max}},
          {"cutouts", cuts},
          {"cutout_fill", a.cutout_fill}};
}

AugmentConfig augment_from_json(const json& j) {
  AugmentConfig a;
  get_if(j, "flip_prob", a.flip_prob);
  get_if(j, "color_jitter_prob", a.color_jitter_prob);
  if (j.contains("jitter_factor")) {
    a.jitter_factor_min = j.at("jitter_factor").at(0).get<double>();
    a.jitter_factor_max = j.at("jitter_factor").at(1).get<double>();
  }
  get_if(j, "hue_shift_max", a.hue_shift_max);
  get_if(j, "grayscale_prob", a.grayscale_prob);
  get_if(j, "blur_prob", a.blur_prob);
  if (j.contains("blur_sigma")) {
    a.blur_sigma_min = j.at("blur_sigma").at(0).get<double>();
    a.blur_sigma_max = j.at("blur_sigma").at(1).get<double>();
  }
  if (j.contains("cutouts")) {
    const auto& cuts = j.at("cutouts");
    if (!cuts.is_array() || cuts.size() != 3)
      throw ConfigError("augment.cutouts: expected exactly 3 patterns");
    for (size_t i = 0; i < 3; ++i) {
      auto& c = a.cutouts[i];
      const auto& src = cuts[i];
      get_if(src, "prob", c.prob);
      if (src.contains("scale")) {
        c.scale_min = src.at("scale").at(0).get<double>();
        c.scale_max = src.at("scale").at(1).get<double>();
      }
      if (src.contains("ratio")) {
        c.ratio_min = src.at("ratio").at(0).get<double>();
        c.ratio_max = src.at("ratio").at(1).get<double>();
      }
    }
  }
  get_if(j, "cutout_fill", a.cutout_fill);
  return a;
}

json loss_to_json(const LossConfig& l) {
  return {{"roi_cls_loss", l.roi_cls_loss == RoiClsLoss::kFocal ? "focal" : "cross_entropy"},
          {"gamma", l.gamma},
          {"rpn_pos_iou", l.rpn_pos_iou},
          {"rpn_neg_iou", l.rpn_neg_iou},
          {"roi_pos_iou", l.roi_pos_iou},
          {"force_best_anchor_positive", l.force_best_anchor_positive},
          {"rpn_sample_count", l.rpn_sample_count},
          {"roi_sample_count", l.roi_sample_count}};
}

LossConfig loss_from_json(const json& j) {
  LossConfig l;
  if (j.contains("roi_cls_loss")) {
    const std::string v = j.at("roi_cls_loss").get<std::string>();
    if (v == "focal")
      l.roi_cls_loss = RoiClsLoss::kFocal;
    else if (v == "cross_entropy")
      l.roi_cls_loss = RoiClsLoss::kCrossEntropy;
    else
      throw ConfigError("loss.roi_cls_loss: expected 'focal' or 'cross_entropy', got '" + v + "'");
  }
  get_if(j, "gamma", l.gamma);
  get_if(j, "rpn_pos_iou", l.rpn_pos_iou);
  get_if(j, "rpn_neg_iou", l.rpn_neg_iou);
  get_if(j, "roi_pos_iou", l.roi_pos_iou);
  get_if(j, "force_best_anchor_positive", l.force_best_anchor_positive);
  get_if(j, "rpn_sample_count", l.rpn_sample_count);
  get_if(j, "roi_sample_count", l.roi_sample_count);
  return l;
}

json train_to_json(const TrainConfig& t) {
  return {{"mode", t.mode == TrainConfig::Mode::kSemi ? "semi" : "supervised"},
          {"delta", t.delta},
          {"lambda_u", t.lambda_u},
          {"alpha", t.alpha},
          {"ema_enabled", t.ema_enabled},
          {"labeled_batch", t.labeled_batch},
          {"unlabeled_batch", t.unlabeled_batch},
          {"learning_rate", t.learning_rate},
          {"momentum", t.momentum},
          {"burn_in_iters", t.burn_in_iters},
          {"total_iters", t.total_iters},
          {"eval_every", t.eval_every},
          {"log_every", t.log_every},
          {"seed", t.seed},
          {"pseudo_nms_iou", t.pseudo_nms_iou},
          {"pseudo_score_floor", t.pseudo_score_floor},
          {"eval_score_floor", t.eval_score_floor},
          {"eval_nms_iou", t.eval_nms_iou},
          {"diag_images", t.diag_images},
          {"match_iou", t.match_iou},
          {"kl_epsilon", t.kl_epsilon},
          {"divergence_loss_limit", t.divergence_loss_limit},
          {"divergence_patience", t.divergence_patience},
          {"checkpoint_every", t.checkpoint_every},
          {"dump_pseudo", t.dump_pseudo},
          {"labeled_weak_augment", t.labeled_weak_augment}};
}

TrainConfig train_from_json(const json& j) {
  TrainConfig t;
  if (j.contains("mode")) {
    const std::string v = j.at("mode").get<std::string>();
    if (v == "semi")
      t.mode = TrainConfig::Mode::kSemi;
    else if (v == "supervised")
      t.mode = TrainConfig::Mode::kSupervised;
    else
      throw ConfigError("train.mode: expected 'semi' or 'supervised', got '" + v + "'");
  }
  get_if(j, "delta", t.delta);
  get_if(j, "lambda_u", t.lambda_u);
  get_if(j, "alpha", t.alpha);
  get_if(j, "ema_enabled", t.ema_enabled);
  get_if(j, "labeled_batch", t.labeled_batch);
  get_if(j, "unlabeled_batch", t.unlabeled_batch);
  get_if(j, "learning_rate", t.learning_rate);
  get_if(j, "momentum", t.momentum);
  get_if(j, "burn_in_iters", t.burn_in_iters);
  get_if(j, "total_iters", t.total_iters);
  get_if(j, "eval_every", t.eval_every);
  get_if(j, "log_every", t.log_every);
  get_if(j, "seed", t.seed);
  get_if(j, "pseudo_nms_iou", t.pseudo_nms_iou);
  get_if(j, "pseudo_score_floor", t.pseudo_score_floor);
  get_if(j, "eval_score_floor", t.eval_score_floor);
  get_if(j, "eval_nms_iou", t.eval_nms_iou);
  get_if(j, "diag_images", t.diag_images);
  get_if(j, "match_iou", t.match_iou);
  get_if(j, "kl_epsilon", t.kl_epsilon);
  get_if(j, "divergence_loss_limit", t.divergence_loss_limit);
  get_if(j, "divergence_patience", t.divergence_patience);
  get_if(j, "checkpoint_every", t.checkpoint_every);
  get_if(j, "dump_pseudo", t.dump_pseudo);
  get_if(j, "labeled_weak_augment", t.labeled_weak_augment);
  return t;
}

json source_to_json(const DataSourceConfig& d) {
  if (d.type == DataSourceConfig::Type::kCoco)
    return {{"type", "coco"}, {"annotations", d.coco_annotations}};
  const auto& s = d.synthetic;
  return {{"type", "synthetic"},
          {"image_size", s.image_size},
          {"class_count", s.class_count},
          {"class_frequencies", s.class_frequencies},
          {"objects_per_image", {s.objects_min, s.objects_max}},
          {"num_images", s.num_images},
          {"seed", s.seed}};
}

DataSourceConfig source_from_json(const json& j) {
  DataSourceConfig d;
  std::string type = "synthetic";
  get_if(j, "type", type);
  if (type == "coco") {
    d.type = DataSourceConfig::Type::kCoco;
    if (!j.contains("annotations"))
      throw ConfigError("dataset: coco source requires 'annotations' path");
    d.coco_annotations = j.at("annotations").get<std::string>();
    return d;
  }
  if (type != "synthetic")
    throw ConfigError("dataset.type: expected 'synthetic' or 'coco', got '" + type + "'");
  auto& s = d.synthetic;
  get_if(j, "image_size", s.image_size);
  get_if(j, "class_count", s.class_count);
  get_if(j, "class_frequencies", s.class_frequencies);
  if (j.contains("objects_per_image")) {
    s.objects_min = j.at("objects_per_image").at(0).get<int>();
    s.objects_max = j.at("objects_per_image").at(1).get<int>();
  }
  get_if(j, "num_images", s.num_images);
  get_if(j, "seed", s.seed);
  return d;
}

}  // namespace

json to_json(const DetectorConfig& m) {
  return {{"image_size", m.image_size},
          {"class_count", m.class_count},
          {"channels", {m.c1, m.c2, m.c3}},
          {"roi_fc_dim", m.roi_fc_dim},
          {"roi_pool", m.roi_pool},
          {"anchor_base", m.anchor_base},
          {"anchor_aspects", m.anchor_aspects},
          {"pre_nms_top", m.pre_nms_top},
          {"topk_proposals", m.topk_proposals},
          {"proposal_nms_iou", m.proposal_nms_iou},
          {"delta_clamp", m.delta_clamp}};
}

DetectorConfig detector_config_from_json(const json& j) {
  DetectorConfig m;
  get_if(j, "image_size", m.image_size);
  get_if(j, "class_count", m.class_count);
  if (j.contains("channels")) {
    m.c1 = j.at("channels").at(0).get<int>();
    m.c2 = j.at("channels").at(1).get<int>();
    m.c3 = j.at("channels").at(2).get<int>();
  }
  get_if(j, "roi_fc_dim", m.roi_fc_dim);
  get_if(j, "roi_pool", m.roi_pool);
  get_if(j, "anchor_base", m.anchor_base);
  get_if(j, "anchor_aspects", m.anchor_aspects);
  get_if(j, "pre_nms_top", m.pre_nms_top);
  get_if(j, "topk_proposals", m.topk_proposals);
  get_if(j, "proposal_nms_iou", m.proposal_nms_iou);
  get_if(j, "delta_clamp", m.delta_clamp);
  return m;
}

void RunConfig::validate() const {
  if (dataset.type == DataSourceConfig::Type::kSynthetic) dataset.synthetic.validate();
  if (eval_dataset.type == DataSourceConfig::Type::kSynthetic) eval_dataset.synthetic.validate();
  if (!(split.fraction > 0.0 && split.fraction <= 1.0))
    throw ConfigError("split.fraction: must lie in (0, 1]");
  try {
    model.validate();
    loss.validate();
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (dataset.type == DataSourceConfig::Type::kSynthetic) {
    if (dataset.synthetic.image_size != model.image_size)
      throw ConfigError("dataset.image_size and model.image_size disagree");
    if (dataset.synthetic.class_count != model.class_count)
      throw ConfigError("dataset.class_count and model.class_count disagree");
  }
  if (output_dir.empty()) throw ConfigError("output_dir: must not be empty");
}

json to_json(const RunConfig& cfg) {
  return {{"dataset", source_to_json(cfg.dataset)},
          {"eval_dataset", source_to_json(cfg.eval_dataset)},
          {"split", {{"fraction", cfg.split.fraction}, {"seed", cfg.split.seed}}},
          {"model", to_json(cfg.model)},
          {"loss", loss_to_json(cfg.loss)},
          {"augment", augment_to_json(cfg.augment)},
          {"train", train_to_json(cfg.train)},
          {"output_dir", cfg.output_dir}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig cfg;
  if (j.contains("dataset")) cfg.dataset = source_from_json(j.at("dataset"));
  if (j.contains("eval_dataset")) cfg.eval_dataset = source_from_json(j.at("eval_dataset"));
  if (j.contains("split")) {
    get_if(j.at("split"), "fraction", cfg.split.fraction);
    get_if(j.at("split"), "seed", cfg.split.seed);
  }
  if (j.contains("model")) cfg.model = detector_config_from_json(j.at("model"));
  if (j.contains("loss")) cfg.loss = loss_from_json(j.at("loss"));
  if (j.contains("augment")) cfg.augment = augment_from_json(j.at("augment"));
  if (j.contains("train")) cfg.train = train_from_json(j.at("train"));
  get_if(j, "output_dir", cfg.output_dir);
  // Synthetic sources inherit unspecified shape fields from the model.
  auto sync = [&](DataSourceConfig& d, const json* src) {
    if (d.type != DataSourceConfig::Type::kSynthetic) return;
    if (!src || !src->contains("image_size")) d.synthetic.image_size = cfg.model.image_size;
    if (!src || !src->contains("class_count")) d.synthetic.class_count = cfg.model.class_count;
  };
  sync(cfg.dataset, j.contains("dataset") ? &j.at("dataset") : nullptr);
  sync(cfg.eval_dataset, j.contains("eval_dataset") ? &j.at("eval_dataset") : nullptr);
  return cfg;
}

void apply_override(json& doc, const std::string& spec) {
  const size_t eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--set expects key.path=value, got '" + spec + "'");
  const std::string path = spec.substr(0, eq);
  const std::string raw = spec.substr(eq + 1);

  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;  // plain string
  }

  json* node = &doc;
  size_t start = 0;
  while (true) {
    const size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) throw ConfigError("--set path has an empty segment: '" + path + "'");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

RunConfig run_config_with_overrides(json doc, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) apply_override(doc, o);
  RunConfig cfg = run_config_from_json(doc);
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  json doc;
  try {
    f >> doc;
  } catch (const json::exception& e) {
    throw ConfigError("config file is not valid JSON (" + path + "): " + e.what());
  }
  return run_config_with_overrides(std::move(doc), overrides);
}

std::vector<ImageSample> load_dataset(const DataSourceConfig& cfg) {
  if (cfg.type == DataSourceConfig::Type::kCoco) return load_coco_json(cfg.coco_annotations);
  return generate_synthetic_dataset(cfg.synthetic);
}

int dataset_class_count(const DataSourceConfig& cfg) {
  if (cfg.type == DataSourceConfig::Type::kCoco) return coco_class_count(cfg.coco_annotations);
  return cfg.synthetic.class_count;
}

uint64_t dataset_fingerprint(const std::vector<ImageSample>& samples) {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& s : samples) {
    mix(static_cast<uint64_t>(s.image.width));
    mix(static_cast<uint64_t>(s.image.height));
    mix(static_cast<uint64_t>(s.boxes.size()));
    for (const auto& lb : s.boxes) {
      mix(static_cast<uint64_t>(lb.class_id));
      for (double v : {lb.box.x_min, lb.box.y_min, lb.box.x_max, lb.box.y_max, lb.score}) {
        uint64_t bits;
        static_assert(sizeof(bits) == sizeof(v));
        std::memcpy(&bits, &v, sizeof(bits));
        mix(bits);
      }
    }
    for (const auto& plane : s.image.ch)
      for (int y = 0; y < s.image.height; ++y)
        for (int x = 0; x < s.image.width; ++x)
          mix(static_cast<uint64_t>(std::lround(plane(y, x) * 255.0)));
  }
  return h;
}

}  // namespace ssdet

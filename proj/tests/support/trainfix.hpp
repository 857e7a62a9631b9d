#pragma once

// Small shared training fixtures for trainer/cli tests: a tiny synthetic
// dataset and a schedule measured in a handful of iterations.

#include "ssdet/config.hpp"
#include "ssdet/trainer.hpp"

namespace ssdet::testsupport {

struct TinyWorld {
  DetectorConfig model;
  LossConfig loss;
  AugmentConfig aug;
  TrainConfig train;
  DatasetSplit split;
  std::vector<ImageSample> eval_samples;
};

inline TinyWorld tiny_world(uint64_t seed = 1, int burn_in = 2, int total = 6) {
  TinyWorld w;
  w.model.image_size = 64;
  w.model.class_count = 6;

  SyntheticConfig data;
  data.image_size = 64;
  data.class_count = 6;
  data.num_images = 30;
  data.seed = 77;
  const auto samples = generate_synthetic_dataset(data);
  w.split = sample_labeled_split(samples, 0.3, 5);
  w.split.class_count = 6;

  SyntheticConfig eval_cfg = data;
  eval_cfg.num_images = 6;
  eval_cfg.seed = 88;
  w.eval_samples = generate_synthetic_dataset(eval_cfg);

  w.train.seed = seed;
  w.train.burn_in_iters = burn_in;
  w.train.total_iters = total;
  w.train.labeled_batch = 2;
  w.train.unlabeled_batch = 2;
  w.train.eval_every = total;
  w.train.log_every = 1;
  w.train.diag_images = 4;
  w.train.alpha = 0.9;
  return w;
}

inline Trainer make_trainer(const TinyWorld& w) {
  return Trainer(w.model, w.loss, w.aug, w.train, w.split, w.eval_samples);
}

}  // namespace ssdet::testsupport

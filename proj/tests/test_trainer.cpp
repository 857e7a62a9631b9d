#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "support/trainfix.hpp"

using namespace ssdet;
using testsupport::TinyWorld;
using testsupport::make_trainer;
using testsupport::tiny_world;

namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ssdet_trainer_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("suggested burn-in lengths follow the 1:2:6:12:20 shape") {
  const double scale = 0.01;
  CHECK(suggest_burn_in_iters(0.005, scale) == 10);
  CHECK(suggest_burn_in_iters(0.01, scale) == 20);
  CHECK(suggest_burn_in_iters(0.02, scale) == 60);
  CHECK(suggest_burn_in_iters(0.05, scale) == 120);
  CHECK(suggest_burn_in_iters(0.10, scale) == 200);
  CHECK(suggest_burn_in_iters(0.50, scale) == 200);  // clamped above
}

TEST_CASE("burn-in duplicates the weights into the teacher") {
  const TinyWorld w = tiny_world();
  const Trainer trainer = make_trainer(w);
  const TrainState state = trainer.burn_in();
  CHECK(state.stage == TrainStage::kMutual);
  CHECK(state.iteration == w.train.burn_in_iters);
  REQUIRE_FALSE(state.teacher.empty());
  CHECK(state.teacher.values == state.student.values);
}

TEST_CASE("burn-in is bit-identical to the supervised trainer") {
  TinyWorld w = tiny_world(/*seed=*/3, /*burn_in=*/4, /*total=*/8);
  const Trainer semi = make_trainer(w);
  const TrainState after_burn_in = semi.burn_in();

  TinyWorld sup = w;
  sup.train.mode = TrainConfig::Mode::kSupervised;
  const Trainer supervised = make_trainer(sup);
  TrainState state = supervised.initial_state();
  for (int i = 0; i < w.train.burn_in_iters; ++i) supervised.step(state);
  CHECK(state.student.values == after_burn_in.student.values);
  CHECK(state.momentum_buf == after_burn_in.momentum_buf);
}

TEST_CASE("lambda_u zero reproduces the supervised trajectory bit for bit") {
  TinyWorld w = tiny_world(/*seed=*/5, /*burn_in=*/1, /*total=*/6);
  w.train.lambda_u = 0.0;
  const Trainer semi = make_trainer(w);
  TrainState semi_state = semi.initial_state();
  for (int i = 0; i < w.train.total_iters; ++i) semi.step(semi_state);

  TinyWorld sup = w;
  sup.train.mode = TrainConfig::Mode::kSupervised;
  const Trainer supervised = make_trainer(sup);
  TrainState sup_state = supervised.initial_state();
  for (int i = 0; i < w.train.total_iters; ++i) supervised.step(sup_state);

  CHECK(semi_state.student.values == sup_state.student.values);
}

TEST_CASE("mutual step composes EMA exactly and stays in the convex hull") {
  const TinyWorld w = tiny_world(/*seed=*/7, /*burn_in=*/1, /*total=*/6);
  const Trainer trainer = make_trainer(w);
  TrainState state = trainer.burn_in();

  for (int s = 0; s < 3; ++s) {
    const Eigen::VectorXd teacher_before = state.teacher.values;
    trainer.step(state);
    const double alpha = w.train.alpha;
    for (Eigen::Index j = 0; j < state.teacher.values.size(); ++j) {
      const double expect = alpha * teacher_before(j) + (1.0 - alpha) * state.student.values(j);
      CHECK(state.teacher.values(j) == expect);
      const double lo = std::min(teacher_before(j), state.student.values(j));
      const double hi = std::max(teacher_before(j), state.student.values(j));
      CHECK(state.teacher.values(j) >= lo);
      CHECK(state.teacher.values(j) <= hi);
    }
  }
}

TEST_CASE("iteration advances by one per step") {
  const TinyWorld w = tiny_world();
  const Trainer trainer = make_trainer(w);
  TrainState state = trainer.initial_state();
  for (int i = 0; i < 4; ++i) {
    const int before = state.iteration;
    trainer.step(state);
    CHECK(state.iteration == before + 1);
  }
}

TEST_CASE("doubling lambda_u doubles the unsupervised contribution exactly") {
  TinyWorld w = tiny_world(/*seed=*/9, /*burn_in=*/1, /*total=*/8);
  w.train.lambda_u = 2.0;
  const Trainer t1 = make_trainer(w);
  TinyWorld w2 = w;
  w2.train.lambda_u = 4.0;
  const Trainer t2 = make_trainer(w2);

  TrainState s1 = t1.burn_in();
  TrainState s2 = s1;  // identical state (burn-in does not involve lambda_u)
  const StepInfo a = t1.step(s1);
  const StepInfo b = t2.step(s2);

  CHECK(a.supervised.total == b.supervised.total);
  CHECK(a.unsupervised.total == b.unsupervised.total);
  CHECK(b.combined - b.supervised.total == 2.0 * (a.combined - a.supervised.total));
}

TEST_CASE("hidden annotations of the unlabeled pool never reach the loss") {
  TinyWorld w = tiny_world(/*seed=*/11, /*burn_in=*/1, /*total=*/6);
  const Trainer clean = make_trainer(w);

  TinyWorld poisoned_world = w;
  for (auto& gt : poisoned_world.split.unlabeled_hidden_gt)
    gt.assign(3, LabeledBox{BoxD{1, 1, 60, 60}, 0, 1.0});
  const Trainer poisoned = make_trainer(poisoned_world);

  TrainState a = clean.burn_in();
  TrainState b = poisoned.burn_in();
  CHECK(a.student.values == b.student.values);
  for (int s = 0; s < 3; ++s) {
    const StepInfo ia = clean.step(a);
    const StepInfo ib = poisoned.step(b);
    CHECK(ia.combined == ib.combined);
    CHECK(a.student.values == b.student.values);
    CHECK(a.teacher.values == b.teacher.values);
  }
}

TEST_CASE("no-EMA mode shares the weights after every step") {
  TinyWorld w = tiny_world(/*seed=*/13, /*burn_in=*/1, /*total=*/6);
  w.train.ema_enabled = false;
  const Trainer trainer = make_trainer(w);
  TrainState state = trainer.burn_in();
  for (int s = 0; s < 3; ++s) {
    trainer.step(state);
    CHECK(state.teacher.values == state.student.values);
  }
}

TEST_CASE("checkpoint round trip") {
  const TinyWorld w = tiny_world(/*seed=*/15, /*burn_in=*/2, /*total=*/8);
  const Trainer trainer = make_trainer(w);
  const fs::path dir = temp_dir("ckpt");

  SUBCASE("resume reproduces the next step bit for bit") {
    TrainState state = trainer.burn_in();
    trainer.step(state);

    const std::string path = (dir / "mid.ckpt").string();
    save_checkpoint(path, state, w.model);
    const LoadedCheckpoint loaded = load_checkpoint(path);
    CHECK(loaded.state.iteration == state.iteration);
    CHECK(loaded.state.stage == TrainStage::kMutual);
    CHECK(loaded.state.seed == state.seed);
    CHECK(loaded.state.student.values == state.student.values);
    CHECK(loaded.state.teacher.values == state.teacher.values);
    CHECK(loaded.state.momentum_buf == state.momentum_buf);

    TrainState resumed = loaded.state;
    trainer.step(state);
    trainer.step(resumed);
    CHECK(resumed.student.values == state.student.values);
    CHECK(resumed.teacher.values == state.teacher.values);

    // Forward outputs reproduce bit-exactly.
    const Image& img = w.eval_samples[0].image;
    const DetectorNet net(w.model);
    const ProposalOutput p1 = net.forward_proposals(state.student, img);
    const ProposalOutput p2 = net.forward_proposals(resumed.student, img);
    CHECK(p1.objectness == p2.objectness);
  }

  SUBCASE("burn-in checkpoints resume in burn-in without a teacher") {
    TrainState state = trainer.initial_state();
    trainer.step(state);
    const std::string path = (dir / "burnin.ckpt").string();
    save_checkpoint(path, state, w.model);
    const LoadedCheckpoint loaded = load_checkpoint(path);
    CHECK(loaded.state.stage == TrainStage::kBurnIn);
    CHECK(loaded.state.teacher.empty());
  }

  SUBCASE("version and corruption checks") {
    TrainState state = trainer.initial_state();
    const std::string path = (dir / "v.ckpt").string();
    save_checkpoint(path, state, w.model);

    // Flip the version byte in the magic.
    {
      std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
      f.seekp(7);
      f.put('9');
    }
    CHECK_THROWS_AS(load_checkpoint(path), DataError);

    // Truncated payload.
    save_checkpoint(path, state, w.model);
    fs::resize_file(path, fs::file_size(path) / 2);
    CHECK_THROWS_AS(load_checkpoint(path), DataError);

    CHECK_THROWS_AS(load_checkpoint((dir / "missing.ckpt").string()), DataError);
  }
}

TEST_CASE("train() writes logs, checkpoints, burn-in-limit record") {
  const TinyWorld w = tiny_world(/*seed=*/17, /*burn_in=*/2, /*total=*/6);
  const Trainer trainer = make_trainer(w);
  const fs::path dir = temp_dir("run");
  const TrainResult result = trainer.train(dir.string());
  CHECK(result.status == TrainStatus::kCompleted);
  CHECK(result.iterations_run == w.train.total_iters);
  CHECK(fs::exists(dir / "metrics.jsonl"));
  CHECK(fs::exists(dir / "checkpoint_final.ckpt"));

  std::ifstream log(dir / "metrics.jsonl");
  std::string line;
  bool saw_burn_in_limit = false, saw_eval = false, saw_final = false;
  while (std::getline(log, line)) {
    if (line.find("\"burn_in_limit\"") != std::string::npos) saw_burn_in_limit = true;
    if (line.find("\"eval\"") != std::string::npos) saw_eval = true;
    if (line.find("\"final\"") != std::string::npos) saw_final = true;
  }
  CHECK(saw_burn_in_limit);
  CHECK(saw_eval);
  CHECK(saw_final);
}

TEST_CASE("diverging training aborts with a snapshot") {
  TinyWorld w = tiny_world(/*seed=*/19, /*burn_in=*/1, /*total=*/60);
  w.train.learning_rate = 1000.0;  // guaranteed blow-up
  w.train.divergence_patience = 3;
  const Trainer trainer = make_trainer(w);
  const fs::path dir = temp_dir("diverge");
  const TrainResult result = trainer.train(dir.string());
  CHECK(result.status == TrainStatus::kDiverged);
  CHECK(result.iterations_run < w.train.total_iters);
  CHECK(fs::exists(dir / "checkpoint_diverged.ckpt"));
}

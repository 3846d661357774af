#include <gtest/gtest.h>

#include <sstream>

#include "murln/checkpoint.hpp"
#include "murln/dataset_io.hpp"
#include "murln/pipeline.hpp"
#include "murln/synthetic.hpp"

namespace murln {
namespace {

struct World {
  SyntheticDataset syn;
  TripletStatistics stats;
  FeatureExtractor fx;

  explicit World(const SyntheticConfig& c)
      : syn(generate_synthetic(c)),
        stats(build_triplet_statistics(syn.dataset.scenes, syn.dataset.vocab)),
        fx(syn.dataset.vocab, stats, syn.embeddings, syn.dataset.visual) {}
};

SyntheticConfig small_synth() {
  SyntheticConfig c;
  c.num_objects = 8;
  c.num_predicates = 4;
  c.train_scenes = 30;
  c.validation_scenes = 5;
  c.test_scenes = 10;
  c.visual_dim = 8;
  c.embedding_dim = 4;
  return c;
}

RunConfig small_run(const SyntheticConfig& s) {
  RunConfig r;
  r.model.visual_dim = s.visual_dim;
  r.model.embedding_dim = s.embedding_dim;
  r.model.num_objects = s.num_objects;
  r.model.num_predicates = s.num_predicates;
  r.model.transform_dim = 8;
  r.model.dc_hidden_dim = 6;
  r.model.rel_hidden_dim = 8;
  r.batch.batch_size = 8;
  r.epochs = 2;
  r.steps_per_epoch = 15;
  r.seed = 5;
  return r;
}

TEST(Presets, ScheduleConstants) {
  const auto vrd = schedule_preset("vrd");
  EXPECT_EQ(vrd.base_lr, 0.0003);
  EXPECT_EQ(vrd.decay, 0.5);
  EXPECT_EQ(vrd.decay_interval, 4000u);
  const auto vg = schedule_preset("vg");
  EXPECT_EQ(vg.base_lr, 0.0003);
  EXPECT_EQ(vg.decay, 0.7);
  EXPECT_EQ(vg.decay_interval, 35000u);
  EXPECT_THROW(schedule_preset("coco"), UsageError);
}

TEST(Presets, TaskPresets) {
  RunConfig r;
  apply_task_preset(r, Task::Predicate);
  EXPECT_EQ(r.model.lambda1, 0.0);
  EXPECT_EQ(r.model.lambda2, 0.0);
  EXPECT_EQ(r.batch.quotas().second, 0u);
  apply_task_preset(r, Task::Relation);
  EXPECT_EQ(r.model.lambda1, 0.5);
  EXPECT_EQ(r.model.lambda2, 1.0);
  EXPECT_EQ(r.batch.quotas(), (std::pair<std::size_t, std::size_t>{8, 24}));
  apply_task_preset(r, Task::Phrase);
  EXPECT_EQ(r.model.lambda1, 0.5);
  EXPECT_EQ(r.batch.undetermined_parts, 3.0);
}

TEST(Presets, DeterminateOnlyAblation) {
  RunConfig r;
  apply_determinate_only(r);
  EXPECT_EQ(r.model.lambda1, 0.0);
  EXPECT_EQ(r.model.lambda2, 0.0);
  EXPECT_EQ(r.batch.quotas().second, 0u);
}

TEST(Training, SameSeedSameLossTraceAndParameters) {
  const auto sc = small_synth();
  World w(sc);
  const auto rc = small_run(sc);
  const auto a = run_training(w.syn.dataset, w.fx, rc);
  const auto b = run_training(w.syn.dataset, w.fx, rc);
  std::ostringstream la, lb;
  write_training_log(la, a);
  write_training_log(lb, b);
  EXPECT_EQ(la.str(), lb.str());
  EXPECT_EQ(a.steps.size(), 30u);
  std::stringstream ca, cb;
  save_checkpoint(ca, *a.model);
  save_checkpoint(cb, *b.model);
  EXPECT_EQ(ca.str(), cb.str());
}

TEST(Training, LogsFourLossTermsPerStep) {
  const auto sc = small_synth();
  World w(sc);
  const auto r = run_training(w.syn.dataset, w.fx, small_run(sc));
  std::ostringstream log;
  write_training_log(log, r);
  std::istringstream lines(log.str());
  std::string first;
  std::getline(lines, first);
  for (const char* key : {"rel_determinate", "rel_undetermined", "det_determinate",
                          "det_undetermined", "\"lr\""}) {
    EXPECT_NE(first.find(key), std::string::npos) << key;
  }
}

TEST(Training, LossDecreases) {
  const auto sc = small_synth();
  World w(sc);
  auto rc = small_run(sc);
  rc.epochs = 4;
  rc.steps_per_epoch = 40;
  rc.optimizer.base_lr = 0.003;
  rc.select_on_validation = false;
  const auto r = run_training(w.syn.dataset, w.fx, rc);
  auto mean = [&](std::size_t from, std::size_t to) {
    double s = 0.0;
    for (std::size_t i = from; i < to; ++i) s += r.steps[i].loss.total;
    return s / static_cast<double>(to - from);
  };
  EXPECT_LT(mean(140, 160), mean(0, 20));
}

TEST(Training, SelectionKeepsBestValidationEpoch) {
  const auto sc = small_synth();
  World w(sc);
  const auto r = run_training(w.syn.dataset, w.fx, small_run(sc));
  ASSERT_TRUE(r.best_epoch.has_value());
  double best = -1.0;
  for (const auto& e : r.epochs) {
    ASSERT_TRUE(e.validation_recall.has_value());
    best = std::max(best, *e.validation_recall);
  }
  EXPECT_EQ(*r.epochs[*r.best_epoch].validation_recall, best);
  // The returned parameters reproduce the selected epoch's validation recall.
  EvalConfig eval;
  eval.recall_at = {50};
  const auto again = evaluate(w.syn.dataset.split(Split::Validation), sc.num_predicates,
                              model_scorer(*r.model, w.fx), eval);
  EXPECT_EQ(again.all.recall.at(50), best);
}

TEST(Training, PredicateTaskTrainsOnGroundTruthPairs) {
  const auto sc = small_synth();
  World w(sc);
  auto rc = small_run(sc);
  apply_task_preset(rc, Task::Predicate);
  rc.epochs = 1;
  const auto r = run_training(w.syn.dataset, w.fx, rc);
  for (const auto& s : r.steps) {
    EXPECT_EQ(s.loss.rel_undetermined, 0.0);
    EXPECT_EQ(s.loss.det_undetermined, 0.0);
  }
}

TEST(Training, DimensionMismatchIsRejected) {
  const auto sc = small_synth();
  World w(sc);
  auto rc = small_run(sc);
  rc.model.visual_dim = 9;
  EXPECT_THROW(run_training(w.syn.dataset, w.fx, rc), DimensionError);
  rc = small_run(sc);
  rc.model.num_predicates = 5;
  EXPECT_THROW(run_training(w.syn.dataset, w.fx, rc), DimensionError);
}

TEST(Training, UndeterminedCapLimitsPool) {
  const auto sc = small_synth();
  World w(sc);
  const auto scenes = w.syn.dataset.split(Split::Train);
  const auto full = build_training_pairs(scenes, sc.num_predicates, Task::Relation, 0, 1);
  const auto capped = build_training_pairs(scenes, sc.num_predicates, Task::Relation, 2, 1);
  EXPECT_EQ(full.determinate.size(), capped.determinate.size());
  EXPECT_LE(capped.undetermined.size(), 2 * scenes.size());
  EXPECT_LT(capped.undetermined.size(), full.undetermined.size());
}

}  // namespace
}  // namespace murln

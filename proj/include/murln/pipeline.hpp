#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "murln/dataset_io.hpp"
#include "murln/errors.hpp"
#include "murln/features.hpp"
#include "murln/inference_eval.hpp"
#include "murln/model.hpp"
#include "murln/neural_core.hpp"
#include "murln/pair_generator.hpp"

namespace murln {

/// Everything a training run needs besides the data.
struct RunConfig {
  ModelConfig model;
  BatchSpec batch;
  AdamConfig optimizer = AdamConfig::vrd();
  Task task = Task::Relation;
  std::size_t epochs = 10;
  std::size_t steps_per_epoch = 0;            // 0: one pass over the determinate pool
  std::size_t max_undetermined_per_scene = 0;  // 0: no cap
  bool select_on_validation = true;
  std::size_t selection_recall_at = 50;
  std::uint64_t seed = 0;
};

inline AdamConfig schedule_preset(const std::string& name) {
  if (name == "vrd") return AdamConfig::vrd();
  if (name == "vg") return AdamConfig::vg();
  throw UsageError("unknown schedule preset '" + name + "' (expected vrd or vg)");
}

/// Predicate detection trains on ground-truth pairs only with lambda1 =
/// lambda2 = 0; phrase and relation detection mix undetermined pairs 3:1 with
/// lambda1 = 0.5, lambda2 = 1.
inline void apply_task_preset(RunConfig& config, Task task) {
  config.task = task;
  if (task == Task::Predicate) {
    config.model.lambda1 = 0.0;
    config.model.lambda2 = 0.0;
    config.batch.undetermined_parts = 0.0;
    config.batch.determinate_parts = 1.0;
  } else {
    config.model.lambda1 = 0.5;
    config.model.lambda2 = 1.0;
    config.batch.undetermined_parts = 3.0;
    config.batch.determinate_parts = 1.0;
  }
}

/// The ablation trained without undetermined relationships: determinate-only
/// batches and lambda1 = lambda2 = 0.
inline void apply_determinate_only(RunConfig& config) {
  config.model.lambda1 = 0.0;
  config.model.lambda2 = 0.0;
  config.batch.undetermined_parts = 0.0;
  config.batch.determinate_parts = 1.0;
}

/// Index of one candidate pair inside TrainingPairs::per_scene.
struct PairRef {
  std::size_t scene;
  std::size_t pair;
};

/// Generator output for the training split.
struct TrainingPairs {
  std::vector<const SceneRecord*> scenes;
  std::vector<std::vector<ObjectPair>> per_scene;
  std::vector<PairRef> determinate;
  std::vector<PairRef> undetermined;

  const ObjectPair& at(const PairRef& r) const { return per_scene[r.scene][r.pair]; }
};

inline TrainingPairs build_training_pairs(const std::vector<const SceneRecord*>& scenes,
                                          std::size_t num_predicates, Task task,
                                          std::size_t max_undetermined_per_scene,
                                          std::uint64_t seed) {
  TrainingPairs tp;
  tp.scenes = scenes;
  for (std::size_t si = 0; si < scenes.size(); ++si) {
    std::vector<ObjectPair> pairs = task == Task::Predicate
                                        ? ground_truth_pairs(*scenes[si], num_predicates)
                                        : generate_for_scene(*scenes[si], num_predicates);
    if (max_undetermined_per_scene > 0) {
      pairs = cap_undetermined(std::move(pairs), max_undetermined_per_scene, seed + si);
    }
    for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
      (pairs[pi].determinate() ? tp.determinate : tp.undetermined).push_back({si, pi});
    }
    tp.per_scene.push_back(std::move(pairs));
  }
  return tp;
}

/// Scores pairs with a model: per-predicate P(R), multiplied across the three
/// networks in IM mode.
inline PairScorer model_scorer(Model& model, const FeatureExtractor& features) {
  return [&model, &features](const SceneRecord& scene, std::span<const ObjectPair> pairs) {
    std::vector<FeatureBundle> bundles;
    std::vector<double> sconf, oconf;
    bundles.reserve(pairs.size());
    for (const auto& p : pairs) {
      bundles.push_back(features.assemble(p, scene));
      sconf.push_back(p.subject.confidence);
      oconf.push_back(p.object.confidence);
    }
    const BatchInputs in = make_inputs(bundles, model.config());
    return model.relation_scores(in, sconf, oconf);
  };
}

struct StepLog {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  LossBreakdown loss;
};

struct EpochLog {
  std::size_t epoch = 0;
  std::optional<double> validation_recall;
  bool selected = false;
};

struct TrainResult {
  std::unique_ptr<Model> model;
  std::vector<StepLog> steps;
  std::vector<EpochLog> epochs;
  std::optional<std::size_t> best_epoch;
};

/// Writes one JSON object per line; numbers keep 17 significant digits.
inline void write_training_log(std::ostream& out, const TrainResult& r) {
  for (const auto& s : r.steps) {
    out << "{\"step\":" << s.step << ",\"epoch\":" << s.epoch
        << ",\"lr\":" << format_double(s.learning_rate)
        << ",\"loss\":" << format_double(s.loss.total)
        << ",\"rel_determinate\":" << format_double(s.loss.rel_determinate)
        << ",\"rel_undetermined\":" << format_double(s.loss.rel_undetermined)
        << ",\"det_determinate\":" << format_double(s.loss.det_determinate)
        << ",\"det_undetermined\":" << format_double(s.loss.det_undetermined) << "}\n";
  }
  for (const auto& e : r.epochs) {
    out << "{\"epoch_end\":" << e.epoch << ",\"validation_recall\":"
        << (e.validation_recall ? format_double(*e.validation_recall) : std::string("null"))
        << ",\"selected\":" << (e.selected ? "true" : "false") << "}\n";
  }
}

/// Sampler -> features -> model -> joint loss -> Adam. After every epoch the
/// validation recall (relation detection, or predicate detection for the
/// predicate task) decides which parameters are kept.
/// Throws DimensionError unless the model fits the dataset vocabulary and features.
inline void check_compatible(const ModelConfig& model, const Dataset& data,
                             const FeatureExtractor& features) {
  if (model.num_predicates != data.vocab.num_predicates() ||
      model.num_objects != data.vocab.num_objects()) {
    throw DimensionError("model config does not match the dataset vocabulary");
  }
  if (model.visual_dim != features.visual_dim() || model.embedding_dim != features.embedding_dim()) {
    throw DimensionError("model feature dimensions do not match the data");
  }
}

inline TrainResult run_training(const Dataset& data, const FeatureExtractor& features,
                                const RunConfig& config,
                                const std::function<void(const StepLog&)>& on_step = {}) {
  config.model.validate();
  check_compatible(config.model, data, features);
  const std::size_t M = config.model.num_predicates;
  const TrainingPairs pairs =
      build_training_pairs(data.split(Split::Train), M, config.task,
                           config.max_undetermined_per_scene, config.seed);

  BatchSpec spec = config.batch;
  spec.rng_seed = config.seed;
  BatchSampler<PairRef> sampler(pairs.determinate, pairs.undetermined, spec);
  const auto [det_quota, und_quota] = spec.quotas();
  std::size_t steps_per_epoch = config.steps_per_epoch;
  if (steps_per_epoch == 0) {
    steps_per_epoch = det_quota > 0
                          ? (pairs.determinate.size() + det_quota - 1) / det_quota
                          : (pairs.undetermined.size() + und_quota - 1) / und_quota;
  }

  TrainResult result;
  result.model = std::make_unique<Model>(config.model);
  Model& model = *result.model;
  AdamOptimizer adam(config.optimizer);
  auto blocks = model.parameters();

  const auto validation = data.split(Split::Validation);
  const bool select = config.select_on_validation && !validation.empty();
  EvalConfig eval;
  eval.task = config.task == Task::Predicate ? Task::Predicate : Task::Relation;
  eval.recall_at = {config.selection_recall_at};
  std::vector<std::vector<double>> best;
  double best_recall = -1.0;

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = 0; i < steps_per_epoch; ++i, ++step) {
      const auto refs = sampler.next_batch();
      std::vector<FeatureBundle> bundles;
      std::vector<ObjectPair> batch_pairs;
      bundles.reserve(refs.size());
      for (const auto& r : refs) {
        const ObjectPair& p = pairs.at(r);
        bundles.push_back(features.assemble(p, *pairs.scenes[r.scene]));
        batch_pairs.push_back(p);
      }
      const BatchInputs in = make_inputs(bundles, config.model);
      const BatchTargets targets = make_targets(batch_pairs, M);
      StepLog log{step, epoch, adam.current_learning_rate(), model.train_step_gradients(in, targets)};
      if (!std::isfinite(log.loss.total)) {
        throw DivergenceError("non-finite loss at step " + std::to_string(step));
      }
      adam.step(blocks);
      if (on_step) on_step(log);
      result.steps.push_back(log);
    }
    EpochLog elog{epoch, std::nullopt, false};
    if (select) {
      const auto r = evaluate(validation, M, model_scorer(model, features), eval);
      if (!r.all.error) {
        const double recall = r.all.recall.at(config.selection_recall_at);
        elog.validation_recall = recall;
        if (recall > best_recall) {
          best_recall = recall;
          best.clear();
          for (const auto& b : blocks) best.emplace_back(b.value.begin(), b.value.end());
          result.best_epoch = epoch;
          elog.selected = true;
        }
      }
    }
    result.epochs.push_back(elog);
  }
  if (!best.empty()) {
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      std::copy(best[i].begin(), best[i].end(), blocks[i].value.begin());
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Gradient verification on shrunk configurations
// ---------------------------------------------------------------------------

/// Shrunk dimensions, same topology as the full model.
inline ModelConfig toy_model_config() {
  ModelConfig c;
  c.visual_dim = 12;
  c.embedding_dim = 6;
  c.num_predicates = 4;
  c.num_objects = 5;
  c.transform_dim = 7;
  c.dc_hidden_dim = 5;
  c.rel_hidden_dim = 6;
  return c;
}

/// A random batch for the given config: half determinate pairs (random
/// non-empty label sets), half undetermined.
inline std::pair<BatchInputs, BatchTargets> random_toy_batch(const ModelConfig& c,
                                                             std::size_t batch,
                                                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<FeatureBundle> bundles(batch);
  for (auto& b : bundles) {
    auto fill = [&](std::vector<double>& v, std::size_t n) {
      v.resize(n);
      for (auto& x : v) x = normal(rng);
    };
    fill(b.visual_subject, c.visual_dim);
    fill(b.visual_object, c.visual_dim);
    fill(b.visual_union, c.visual_dim);
    fill(b.external_subject, c.embedding_dim);
    fill(b.external_object, c.embedding_dim);
    for (auto& x : b.spatial) x = unit(rng) - 0.5;
    b.internal.resize(c.num_predicates);
    double sum = 0.0;
    for (auto& x : b.internal) sum += (x = unit(rng) + 1e-3);
    for (auto& x : b.internal) x /= sum;
  }
  BatchTargets t;
  t.labels = Matrix::Zero(static_cast<Eigen::Index>(c.num_predicates),
                          static_cast<Eigen::Index>(batch));
  t.determinate.resize(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    t.determinate[i] = i % 2 == 0;
    if (!t.determinate[i]) continue;
    const auto first = std::uniform_int_distribution<std::size_t>(0, c.num_predicates - 1)(rng);
    t.labels(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(i)) = 1.0;
    for (std::size_t k = 0; k < c.num_predicates; ++k) {
      if (unit(rng) < 0.2) t.labels(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = 1.0;
    }
  }
  return {make_inputs(bundles, c), std::move(t)};
}

/// Adds N(0, scale^2) noise to every bias. Zero-initialized biases put units
/// whose inputs are all zero exactly on the ReLU kink, where central
/// differences and the analytic subgradient legitimately disagree.
inline void jitter_biases(Model& model, double scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, scale);
  for (auto& block : model.parameters()) {
    if (!block.name.ends_with(".bias")) continue;
    for (double& v : block.value) v += noise(rng);
  }
}

/// Analytic gradients of the full joint loss versus central differences.
inline GradCheckReport check_model_gradients(Model& model, const BatchInputs& in,
                                             const BatchTargets& targets,
                                             GradCheckOptions options = {}) {
  model.train_step_gradients(in, targets);
  auto blocks = model.parameters();
  return gradient_check(blocks, [&] { return model.loss(in, targets).total; }, options);
}

}  // namespace murln

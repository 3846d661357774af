#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "murln/errors.hpp"
#include "murln/pair_generator.hpp"
#include "murln/scene_model.hpp"

namespace murln {

enum class Task : std::uint8_t { Predicate = 0, Phrase = 1, Relation = 2 };

inline const char* task_name(Task t) {
  switch (t) {
    case Task::Predicate: return "predicate";
    case Task::Phrase: return "phrase";
    case Task::Relation: return "relation";
  }
  return "unknown";
}

inline Task parse_task(const std::string& s) {
  if (s == "predicate") return Task::Predicate;
  if (s == "phrase") return Task::Phrase;
  if (s == "relation") return Task::Relation;
  throw UsageError("unknown task '" + s + "' (expected predicate, phrase or relation)");
}

/// Evaluation IoU threshold; the comparison is inclusive.
inline constexpr double kEvalIouThreshold = 0.5;

struct EvalConfig {
  Task task = Task::Relation;
  std::vector<std::size_t> recall_at = {50, 100};
  std::size_t top_k_predicates = 1;
  double iou_threshold = kEvalIouThreshold;
  bool zero_shot_only = false;
  bool macro_average = false;

  void validate() const {
    if (top_k_predicates == 0) throw ValidationError("k must be at least 1");
    for (auto n : recall_at) {
      if (n == 0) throw ValidationError("recall cut-offs must be positive");
    }
  }
};

struct RankedTriplet {
  BoundingBox subject_box;
  std::size_t subject_category;
  std::size_t predicate;
  BoundingBox object_box;
  std::size_t object_category;
  double score;
  std::size_t pair_index;
};

/// One image's ranked outputs, highest score first.
struct ImagePredictions {
  std::string image_id;
  std::vector<RankedTriplet> triplets;
};

/// Pairs scored at test time: all ordered ground-truth object pairs for the
/// predicate task (confidence 1), otherwise all ordered detection pairs.
inline std::vector<ObjectPair> evaluation_pairs(const SceneRecord& scene, Task task,
                                                std::size_t num_predicates) {
  if (task != Task::Predicate) return generate_for_scene(scene, num_predicates);
  const auto objects = ground_truth_objects(scene);
  std::vector<ObjectPair> out;
  for (const auto& [i, j] : enumerate_pairs(objects)) {
    out.push_back(classify_pair(i, objects[i], j, objects[j], scene.annotations, num_predicates));
  }
  return out;
}

/// Keeps the k best predicates of every pair and ranks everything by score.
/// Ties break by pair index, then predicate index.
inline ImagePredictions rank_predictions(const std::string& image_id,
                                         std::span<const ObjectPair> pairs,
                                         const std::vector<std::vector<double>>& scores,
                                         std::size_t k) {
  if (scores.size() != pairs.size()) throw DimensionError("one score vector per pair expected");
  ImagePredictions out{image_id, {}};
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& s = scores[i];
    std::vector<std::size_t> order(s.size());
    for (std::size_t p = 0; p < order.size(); ++p) order[p] = p;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
    const std::size_t keep = std::min(k, order.size());
    for (std::size_t r = 0; r < keep; ++r) {
      const std::size_t p = order[r];
      if (!std::isfinite(s[p])) throw ValidationError("non-finite relation score");
      out.triplets.push_back(RankedTriplet{pairs[i].subject.box, pairs[i].subject.category, p,
                                           pairs[i].object.box, pairs[i].object.category, s[p],
                                           i});
    }
  }
  std::stable_sort(out.triplets.begin(), out.triplets.end(),
                   [](const RankedTriplet& a, const RankedTriplet& b) {
                     if (a.score != b.score) return a.score > b.score;
                     if (a.pair_index != b.pair_index) return a.pair_index < b.pair_index;
                     return a.predicate < b.predicate;
                   });
  return out;
}

/// Scores every pair of a scene: returns one M-vector per pair.
using PairScorer = std::function<std::vector<std::vector<double>>(
    const SceneRecord&, std::span<const ObjectPair>)>;

inline ImagePredictions predict_scene(const SceneRecord& scene, Task task, std::size_t k,
                                      std::size_t num_predicates, const PairScorer& scorer) {
  const auto pairs = evaluation_pairs(scene, task, num_predicates);
  if (pairs.empty()) return ImagePredictions{scene.image_id, {}};
  return rank_predictions(scene.image_id, pairs, scorer(scene, pairs), k);
}

/// Overlap used to pick among several matchable ground truths: the union-box
/// IoU for phrase detection, the smaller of the two box IoUs otherwise.
/// Returns nullopt when the pair does not meet the task's IoU condition.
inline std::optional<double> localization_overlap(const RankedTriplet& p,
                                                  const AnnotatedTriplet& g, Task task,
                                                  double threshold) {
  if (task == Task::Phrase) {
    const double o = iou(union_box(p.subject_box, p.object_box),
                         union_box(g.subject_box, g.object_box));
    if (o >= threshold) return o;
    return std::nullopt;
  }
  const double os = iou(p.subject_box, g.subject_box);
  const double oo = iou(p.object_box, g.object_box);
  if (os >= threshold && oo >= threshold) return std::min(os, oo);
  return std::nullopt;
}

/// Greedy one-to-one matching in rank order. Each prediction takes the
/// unconsumed ground truth with equal categories and predicate that has the
/// largest overlap (lowest index on ties). Returns one hit flag per prediction.
inline std::vector<bool> match_predictions(std::span<const RankedTriplet> predictions,
                                           std::span<const AnnotatedTriplet> ground_truth,
                                           Task task, double iou_threshold = kEvalIouThreshold) {
  std::vector<bool> hits(predictions.size(), false);
  std::vector<bool> used(ground_truth.size(), false);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& p = predictions[i];
    std::optional<std::size_t> best;
    double best_overlap = -1.0;
    for (std::size_t g = 0; g < ground_truth.size(); ++g) {
      if (used[g]) continue;
      const auto& gt = ground_truth[g];
      if (gt.predicate != p.predicate || gt.subject_category != p.subject_category ||
          gt.object_category != p.object_category) {
        continue;
      }
      const auto overlap = localization_overlap(p, gt, task, iou_threshold);
      if (overlap && *overlap > best_overlap) {
        best_overlap = *overlap;
        best = g;
      }
    }
    if (best) {
      used[*best] = true;
      hits[i] = true;
    }
  }
  return hits;
}

/// Hits and ground-truth totals; merging is associative.
struct RecallCounts {
  std::size_t hits = 0;
  std::size_t ground_truth = 0;

  RecallCounts& operator+=(const RecallCounts& o) {
    hits += o.hits;
    ground_truth += o.ground_truth;
    return *this;
  }
};

struct ImageHits {
  std::vector<bool> hits;  // per ranked prediction
  std::size_t ground_truth = 0;

  RecallCounts at(std::size_t n) const {
    RecallCounts c{0, ground_truth};
    const std::size_t end = std::min(n, hits.size());
    for (std::size_t i = 0; i < end; ++i) c.hits += hits[i] ? 1 : 0;
    return c;
  }
};

/// Micro average (total hits / total ground truth) by default; the macro
/// average is the mean of per-image recalls over images with ground truth.
inline double recall_at_n(std::span<const ImageHits> images, std::size_t n, bool macro = false) {
  if (!macro) {
    RecallCounts total;
    for (const auto& img : images) total += img.at(n);
    if (total.ground_truth == 0) {
      throw UndefinedMetricError("recall is undefined without ground-truth triplets");
    }
    return static_cast<double>(total.hits) / static_cast<double>(total.ground_truth);
  }
  double sum = 0.0;
  std::size_t counted = 0;
  for (const auto& img : images) {
    if (img.ground_truth == 0) continue;
    const auto c = img.at(n);
    sum += static_cast<double>(c.hits) / static_cast<double>(c.ground_truth);
    ++counted;
  }
  if (counted == 0) throw UndefinedMetricError("recall is undefined without ground-truth triplets");
  return sum / static_cast<double>(counted);
}

/// Category-level (subject, predicate, object) types.
using TripletType = std::tuple<std::size_t, std::size_t, std::size_t>;
using TripletTypeSet = std::set<TripletType>;

inline TripletType triplet_type(const AnnotatedTriplet& a) {
  return {a.subject_category, a.predicate, a.object_category};
}

inline TripletTypeSet training_triplet_types(const std::vector<SceneRecord>& scenes) {
  TripletTypeSet types;
  for (const auto& s : scenes) {
    if (s.split != Split::Train) continue;
    for (const auto& a : s.annotations) types.insert(triplet_type(a));
  }
  return types;
}

/// Ground truth whose triplet type never occurs in training.
inline std::vector<AnnotatedTriplet> zero_shot_filter(std::span<const AnnotatedTriplet> ground_truth,
                                                      const TripletTypeSet& training_types) {
  std::vector<AnnotatedTriplet> out;
  for (const auto& a : ground_truth) {
    if (!training_types.count(triplet_type(a))) out.push_back(a);
  }
  return out;
}

/// Recall per cut-off; a block whose recall is undefined carries the error
/// message instead of values.
struct RecallBlock {
  std::map<std::size_t, double> recall;
  std::map<std::size_t, RecallCounts> counts;
  std::optional<std::string> error;
};

struct EvalResult {
  Task task = Task::Relation;
  std::size_t images = 0;
  std::size_t predictions = 0;
  RecallBlock all;
  std::optional<RecallBlock> zero_shot;
};

inline RecallBlock recall_block(std::span<const ImageHits> hits, const EvalConfig& config) {
  RecallBlock block;
  try {
    for (auto n : config.recall_at) {
      block.recall[n] = recall_at_n(hits, n, config.macro_average);
      RecallCounts c;
      for (const auto& h : hits) c += h.at(n);
      block.counts[n] = c;
    }
  } catch (const UndefinedMetricError& e) {
    block.recall.clear();
    block.counts.clear();
    block.error = e.what();
  }
  return block;
}

/// Runs one task over the given scenes. When zero_shot_only is set, the
/// zero-shot block is computed against `training_types`.
inline EvalResult evaluate(const std::vector<const SceneRecord*>& scenes,
                           std::size_t num_predicates, const PairScorer& scorer,
                           const EvalConfig& config, const TripletTypeSet* training_types = nullptr) {
  config.validate();
  EvalResult result;
  result.task = config.task;
  std::vector<ImageHits> all_hits;
  std::vector<ImageHits> zs_hits;
  for (const SceneRecord* scene : scenes) {
    const auto preds =
        predict_scene(*scene, config.task, config.top_k_predicates, num_predicates, scorer);
    ++result.images;
    result.predictions += preds.triplets.size();
    all_hits.push_back(ImageHits{
        match_predictions(preds.triplets, scene->annotations, config.task, config.iou_threshold),
        scene->annotations.size()});
    if (config.zero_shot_only) {
      const auto gt = zero_shot_filter(scene->annotations,
                                       training_types ? *training_types : TripletTypeSet{});
      zs_hits.push_back(
          ImageHits{match_predictions(preds.triplets, gt, config.task, config.iou_threshold),
                    gt.size()});
    }
  }
  result.all = recall_block(all_hits, config);
  if (config.zero_shot_only) result.zero_shot = recall_block(zs_hits, config);
  return result;
}

// ---------------------------------------------------------------------------
// Reference scorers
// ---------------------------------------------------------------------------

/// Scores 1 for predicates annotated on exactly this (box, category) pair, 0 otherwise.
inline PairScorer oracle_scorer(std::size_t num_predicates) {
  return [num_predicates](const SceneRecord& scene, std::span<const ObjectPair> pairs) {
    std::vector<std::vector<double>> out;
    for (const auto& p : pairs) {
      std::vector<double> s(num_predicates, 0.0);
      for (const auto& a : scene.annotations) {
        if (a.subject_category == p.subject.category && a.object_category == p.object.category &&
            a.subject_box == p.subject.box && a.object_box == p.object.box) {
          s[a.predicate] = 1.0;
        }
      }
      out.push_back(std::move(s));
    }
    return out;
  };
}

/// Independent uniform scores, seeded per image so results do not depend on
/// scene order.
inline PairScorer uniform_random_scorer(std::size_t num_predicates, std::uint64_t seed) {
  return [num_predicates, seed](const SceneRecord& scene, std::span<const ObjectPair> pairs) {
    std::seed_seq seq{static_cast<std::uint64_t>(std::hash<std::string>{}(scene.image_id)), seed};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    std::vector<std::vector<double>> out(pairs.size(), std::vector<double>(num_predicates));
    for (auto& s : out) {
      for (auto& v : s) v = dist(rng);
    }
    return out;
  };
}

}  // namespace murln

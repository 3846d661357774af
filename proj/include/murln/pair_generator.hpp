#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "murln/errors.hpp"
#include "murln/scene_model.hpp"

namespace murln {

enum class PairStatus : std::uint8_t { Undetermined = 0, Determinate = 1 };

/// An ordered (subject, object) pair of detected objects together with the
/// outcome of matching it against the human annotations.
struct ObjectPair {
  std::size_t subject_index;
  std::size_t object_index;
  DetectedObject subject;
  DetectedObject object;
  PairStatus status = PairStatus::Undetermined;
  std::vector<std::uint8_t> predicate_labels;  // multi-hot, length M
  std::vector<std::size_t> matched_annotation_indices;

  bool determinate() const noexcept { return status == PairStatus::Determinate; }
};

/// Generator IoU threshold. The comparison is strict.
inline constexpr double kGeneratorIouThreshold = 0.5;

/// True when the annotation confirms the detected pair: equal subject and
/// object categories, and both box IoUs strictly above 0.5.
inline bool annotation_matches(const DetectedObject& subject, const DetectedObject& object,
                               const AnnotatedTriplet& annotation) {
  return subject.category == annotation.subject_category &&
         object.category == annotation.object_category &&
         iou(subject.box, annotation.subject_box) > kGeneratorIouThreshold &&
         iou(object.box, annotation.object_box) > kGeneratorIouThreshold;
}

/// Classifies one ordered pair. Every matching annotation contributes its
/// predicate bit, so a pair confirmed by several annotations is multi-label.
inline ObjectPair classify_pair(std::size_t subject_index, const DetectedObject& subject,
                                std::size_t object_index, const DetectedObject& object,
                                std::span<const AnnotatedTriplet> annotations,
                                std::size_t num_predicates) {
  ObjectPair pair{subject_index, object_index, subject, object, PairStatus::Undetermined,
                  std::vector<std::uint8_t>(num_predicates, 0), {}};
  for (std::size_t k = 0; k < annotations.size(); ++k) {
    if (!annotation_matches(subject, object, annotations[k])) continue;
    if (annotations[k].predicate >= num_predicates) {
      throw ValidationError("annotation predicate index out of range");
    }
    pair.predicate_labels[annotations[k].predicate] = 1;
    pair.matched_annotation_indices.push_back(k);
  }
  if (!pair.matched_annotation_indices.empty()) pair.status = PairStatus::Determinate;
  return pair;
}

inline ObjectPair classify_pair(const DetectedObject& subject, const DetectedObject& object,
                                std::span<const AnnotatedTriplet> annotations,
                                std::size_t num_predicates) {
  return classify_pair(0, subject, 1, object, annotations, num_predicates);
}

/// One classified pair per ordered detection pair, in enumerate_pairs order.
inline std::vector<ObjectPair> generate_for_scene(const SceneRecord& scene,
                                                  std::size_t num_predicates) {
  std::vector<ObjectPair> out;
  const auto index_pairs = enumerate_pairs(scene.detections);
  out.reserve(index_pairs.size());
  for (const auto& [i, j] : index_pairs) {
    out.push_back(classify_pair(i, scene.detections[i], j, scene.detections[j],
                                scene.annotations, num_predicates));
  }
  return out;
}

/// Ground-truth pair mode (predicate detection): each distinct annotated
/// (subject object, object object) pair becomes one determinate pair with the
/// union of its predicates. Indices refer to ground_truth_objects(scene).
inline std::vector<ObjectPair> ground_truth_pairs(const SceneRecord& scene,
                                                  std::size_t num_predicates) {
  const auto objects = ground_truth_objects(scene);
  auto find = [&](const BoundingBox& box, std::size_t category) {
    for (std::size_t i = 0; i < objects.size(); ++i) {
      if (objects[i].category == category && objects[i].box == box) return i;
    }
    throw StateError("ground-truth object not found");
  };
  std::vector<ObjectPair> out;
  for (std::size_t k = 0; k < scene.annotations.size(); ++k) {
    const auto& a = scene.annotations[k];
    if (a.predicate >= num_predicates) {
      throw ValidationError("annotation predicate index out of range");
    }
    const std::size_t s = find(a.subject_box, a.subject_category);
    const std::size_t o = find(a.object_box, a.object_category);
    auto existing = std::find_if(out.begin(), out.end(), [&](const ObjectPair& p) {
      return p.subject_index == s && p.object_index == o;
    });
    if (existing == out.end()) {
      out.push_back(ObjectPair{s, o, objects[s], objects[o], PairStatus::Determinate,
                               std::vector<std::uint8_t>(num_predicates, 0), {}});
      existing = std::prev(out.end());
    }
    existing->predicate_labels[a.predicate] = 1;
    existing->matched_annotation_indices.push_back(k);
  }
  return out;
}

/// Keeps at most `cap` undetermined pairs (a seeded random subset, original
/// order preserved). Determinate pairs are never dropped.
inline std::vector<ObjectPair> cap_undetermined(std::vector<ObjectPair> pairs, std::size_t cap,
                                                std::uint64_t seed) {
  std::vector<std::size_t> undetermined;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!pairs[i].determinate()) undetermined.push_back(i);
  }
  if (undetermined.size() <= cap) return pairs;
  std::mt19937_64 rng(seed);
  std::shuffle(undetermined.begin(), undetermined.end(), rng);
  std::vector<bool> drop(pairs.size(), false);
  for (std::size_t i = cap; i < undetermined.size(); ++i) drop[undetermined[i]] = true;
  std::vector<ObjectPair> kept;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!drop[i]) kept.push_back(std::move(pairs[i]));
  }
  return kept;
}

struct BatchSpec {
  std::size_t batch_size = 32;
  // Undetermined : determinate parts per batch.
  double undetermined_parts = 3.0;
  double determinate_parts = 1.0;
  std::uint64_t rng_seed = 0;

  /// Undetermined count is rounded to nearest; the remainder is determinate.
  std::pair<std::size_t, std::size_t> quotas() const {
    if (batch_size == 0) throw ValidationError("batch_size must be positive");
    if (undetermined_parts < 0.0 || determinate_parts < 0.0 ||
        undetermined_parts + determinate_parts <= 0.0) {
      throw ValidationError("batch ratio parts must be non-negative and not both zero");
    }
    const double share = undetermined_parts / (undetermined_parts + determinate_parts);
    const auto undetermined =
        static_cast<std::size_t>(std::llround(static_cast<double>(batch_size) * share));
    return {batch_size - undetermined, undetermined};  // (determinate, undetermined)
  }
};

/// Draws mixed batches from a determinate and an undetermined pool. Each pool
/// is consumed without replacement in a shuffled order; when it runs out it is
/// reshuffled and drawing continues, so small pools repeat items.
template <typename Item>
class BatchSampler {
 public:
  BatchSampler(std::vector<Item> determinate, std::vector<Item> undetermined, BatchSpec spec)
      : spec_(spec), rng_(spec.rng_seed) {
    const auto [det_quota, und_quota] = spec_.quotas();
    if (det_quota > 0 && determinate.empty()) {
      throw InsufficientDataError("determinate pool is empty but its batch quota is positive");
    }
    if (und_quota > 0 && undetermined.empty()) {
      throw InsufficientDataError("undetermined pool is empty but its batch quota is positive");
    }
    det_.items = std::move(determinate);
    und_.items = std::move(undetermined);
    det_.reset(rng_);
    und_.reset(rng_);
  }

  const BatchSpec& spec() const noexcept { return spec_; }
  std::size_t determinate_pool_size() const noexcept { return det_.items.size(); }
  std::size_t undetermined_pool_size() const noexcept { return und_.items.size(); }

  /// Determinate items first, then undetermined.
  std::vector<Item> next_batch() {
    const auto [det_quota, und_quota] = spec_.quotas();
    std::vector<Item> batch;
    batch.reserve(spec_.batch_size);
    for (std::size_t i = 0; i < det_quota; ++i) batch.push_back(det_.draw(rng_));
    for (std::size_t i = 0; i < und_quota; ++i) batch.push_back(und_.draw(rng_));
    return batch;
  }

 private:
  struct Pool {
    std::vector<Item> items;
    std::vector<std::size_t> order;
    std::size_t cursor = 0;

    void reset(std::mt19937_64& rng) {
      order.resize(items.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    const Item& draw(std::mt19937_64& rng) {
      if (cursor == order.size()) reset(rng);
      return items[order[cursor++]];
    }
  };

  BatchSpec spec_;
  std::mt19937_64 rng_;
  Pool det_;
  Pool und_;
};

}  // namespace murln

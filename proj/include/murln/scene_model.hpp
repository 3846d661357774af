#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "murln/errors.hpp"

namespace murln {

/// Axis-aligned box in continuous pixel coordinates. Area is
/// (x_max - x_min) * (y_max - y_min); there is no +1 pixel convention.
/// Construction rejects non-finite coordinates and zero or negative extent.
class BoundingBox {
 public:
  BoundingBox(double x_min, double y_min, double x_max, double y_max)
      : x_min_(x_min), y_min_(y_min), x_max_(x_max), y_max_(y_max) {
    if (!std::isfinite(x_min) || !std::isfinite(y_min) || !std::isfinite(x_max) ||
        !std::isfinite(y_max)) {
      throw GeometryError("bounding box has a non-finite coordinate");
    }
    if (!(x_max > x_min) || !(y_max > y_min)) {
      throw GeometryError("bounding box has zero or negative extent");
    }
  }

  double x_min() const noexcept { return x_min_; }
  double y_min() const noexcept { return y_min_; }
  double x_max() const noexcept { return x_max_; }
  double y_max() const noexcept { return y_max_; }

  double width() const noexcept { return x_max_ - x_min_; }
  double height() const noexcept { return y_max_ - y_min_; }
  double area() const noexcept { return width() * height(); }

  bool contains(const BoundingBox& other) const noexcept {
    return other.x_min_ >= x_min_ && other.y_min_ >= y_min_ && other.x_max_ <= x_max_ &&
           other.y_max_ <= y_max_;
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;

 private:
  double x_min_, y_min_, x_max_, y_max_;
};

/// Intersection over union. Symmetric, in [0, 1], exactly 1 for identical boxes.
inline double iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min());
  const double iy = std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min());
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  if (a == b) return 1.0;
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  // Rounding must not report a perfect overlap for distinct boxes.
  return std::clamp(inter / uni, 0.0, std::nextafter(1.0, 0.0));
}

/// Smallest axis-aligned box containing both inputs.
inline BoundingBox union_box(const BoundingBox& a, const BoundingBox& b) {
  return BoundingBox(std::min(a.x_min(), b.x_min()), std::min(a.y_min(), b.y_min()),
                     std::max(a.x_max(), b.x_max()), std::max(a.y_max(), b.y_max()));
}

struct DetectedObject {
  BoundingBox box;
  std::size_t category;
  double confidence;  // detector probability P(category | box), in (0, 1]
};

struct AnnotatedTriplet {
  BoundingBox subject_box;
  std::size_t subject_category;
  std::size_t predicate;
  BoundingBox object_box;
  std::size_t object_category;
};

enum class Split { Train, Validation, Test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "unknown";
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "validation" || s == "val") return Split::Validation;
  if (s == "test") return Split::Test;
  throw ValidationError("unknown split '" + s + "'");
}

struct SceneRecord {
  std::string image_id;
  double width = 0.0;
  double height = 0.0;
  std::vector<DetectedObject> detections;
  std::vector<AnnotatedTriplet> annotations;
  Split split = Split::Train;
};

struct Vocabulary {
  std::vector<std::string> object_names;
  std::vector<std::string> predicate_names;

  std::size_t num_objects() const noexcept { return object_names.size(); }
  std::size_t num_predicates() const noexcept { return predicate_names.size(); }
};

inline void validate_vocabulary(const Vocabulary& vocab) {
  if (vocab.object_names.empty()) throw ValidationError("vocabulary has no object categories");
  if (vocab.predicate_names.empty()) throw ValidationError("vocabulary has no predicates");
  auto check_unique = [](std::vector<std::string> names, const char* what) {
    std::sort(names.begin(), names.end());
    auto dup = std::adjacent_find(names.begin(), names.end());
    if (dup != names.end()) {
      throw ValidationError(std::string("duplicate ") + what + " name '" + *dup + "'");
    }
  };
  check_unique(vocab.object_names, "object");
  check_unique(vocab.predicate_names, "predicate");
}

/// Checks category bounds, confidences, and that every box lies inside the image.
inline void validate_scene(const SceneRecord& scene, const Vocabulary& vocab) {
  const std::string where = "scene '" + scene.image_id + "'";
  if (!(scene.width > 0.0) || !(scene.height > 0.0) || !std::isfinite(scene.width) ||
      !std::isfinite(scene.height)) {
    throw ValidationError(where + ": width/height must be positive");
  }
  auto check_box = [&](const BoundingBox& b, const std::string& field) {
    if (b.x_min() < 0.0 || b.y_min() < 0.0 || b.x_max() > scene.width ||
        b.y_max() > scene.height) {
      throw ValidationError(where + ": " + field + " lies outside the image");
    }
  };
  auto check_category = [&](std::size_t c, const std::string& field) {
    if (c >= vocab.num_objects()) {
      throw ValidationError(where + ": " + field + " category " + std::to_string(c) +
                            " out of range");
    }
  };
  for (std::size_t i = 0; i < scene.detections.size(); ++i) {
    const auto& d = scene.detections[i];
    const std::string field = "detections[" + std::to_string(i) + "]";
    check_box(d.box, field);
    check_category(d.category, field);
    if (!(d.confidence > 0.0 && d.confidence <= 1.0)) {
      throw ValidationError(where + ": " + field + " confidence must lie in (0, 1]");
    }
  }
  for (std::size_t i = 0; i < scene.annotations.size(); ++i) {
    const auto& a = scene.annotations[i];
    const std::string field = "annotations[" + std::to_string(i) + "]";
    check_box(a.subject_box, field + ".subject");
    check_box(a.object_box, field + ".object");
    check_category(a.subject_category, field + ".subject");
    check_category(a.object_category, field + ".object");
    if (a.predicate >= vocab.num_predicates()) {
      throw ValidationError(where + ": " + field + " predicate " + std::to_string(a.predicate) +
                            " out of range");
    }
  }
}

/// All ordered pairs (i, j), i != j, in lexicographic order.
inline std::vector<std::pair<std::size_t, std::size_t>> enumerate_pairs(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  if (n < 2) return pairs;
  pairs.reserve(n * (n - 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) pairs.emplace_back(i, j);
    }
  }
  return pairs;
}

inline std::vector<std::pair<std::size_t, std::size_t>> enumerate_pairs(
    const std::vector<DetectedObject>& detections) {
  return enumerate_pairs(detections.size());
}

/// Distinct ground-truth objects of a scene (exact box + category), in order of
/// first appearance across the annotations, each with confidence 1.
inline std::vector<DetectedObject> ground_truth_objects(const SceneRecord& scene) {
  std::vector<DetectedObject> objects;
  auto add = [&](const BoundingBox& box, std::size_t category) {
    for (const auto& o : objects) {
      if (o.category == category && o.box == box) return;
    }
    objects.push_back(DetectedObject{box, category, 1.0});
  };
  for (const auto& a : scene.annotations) {
    add(a.subject_box, a.subject_category);
    add(a.object_box, a.object_category);
  }
  return objects;
}

}  // namespace murln

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "murln/dataset_io.hpp"
#include "murln/features.hpp"
#include "murln/scene_model.hpp"

namespace murln {

/// Knobs for the synthetic benchmark. Predicates are tied to spatial layouts
/// and to per-predicate subject/object category sets, so pair geometry and
/// categories carry the signal a trained model can pick up.
struct SyntheticConfig {
  std::size_t num_objects = 20;
  std::size_t num_predicates = 8;
  std::size_t train_scenes = 400;
  std::size_t validation_scenes = 50;
  std::size_t test_scenes = 100;
  std::size_t visual_dim = 32;
  std::size_t embedding_dim = 16;

  std::size_t min_relations = 3;
  std::size_t max_relations = 5;
  std::size_t min_distractors = 1;
  std::size_t max_distractors = 3;

  double box_jitter = 0.05;       // std-dev of edge noise, relative to box size
  double label_flip_rate = 0.1;   // detections reporting a wrong category
  double spurious_rate = 0.25;    // spurious boxes per real object
  double miss_rate = 0.0;         // real objects the detector misses
  double visual_noise = 0.5;      // std-dev added to category prototypes

  double image_width = 800.0;
  double image_height = 600.0;
  std::uint64_t seed = 7;
};

struct SyntheticDataset {
  Dataset dataset;
  EmbeddingTable embeddings;
};

namespace synth_detail {

inline std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// FNV-1a over the image id and the box coordinate bits, mixed with the seed.
inline std::uint64_t region_hash(const std::string& image_id, const BoundingBox& b,
                                 std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](unsigned char c) {
    h ^= c;
    h *= 0x100000001b3ULL;
  };
  for (char c : image_id) mix(static_cast<unsigned char>(c));
  for (double v : {b.x_min(), b.y_min(), b.x_max(), b.y_max()}) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) mix(static_cast<unsigned char>((bits >> (8 * i)) & 0xff));
  }
  return splitmix(h ^ splitmix(seed));
}

inline const std::vector<std::string>& object_name_pool() {
  static const std::vector<std::string> names = {
      "person", "dog",    "horse", "street", "car",   "table",       "cup",
      "chair",  "tree",   "traffic light", "bag", "hat", "bike", "bench",
      "lamp",   "guitar", "laptop", "sofa", "shelf", "teddy bear"};
  return names;
}

inline const std::vector<std::string>& predicate_name_pool() {
  static const std::vector<std::string> names = {"on",  "under", "left of", "right of",
                                                  "in",  "has",   "wear",    "sit on"};
  return names;
}

struct Object {
  BoundingBox box;
  std::size_t category;
};

}  // namespace synth_detail

/// Seeded, reproducible scenes: annotated relations with planted geometry,
/// unannotated distractor objects, and detector-like noise (box jitter, label
/// flips, spurious boxes). Also fabricates visual vectors for every detection,
/// ground-truth box and pair union box, and word vectors for every name token.
inline SyntheticDataset generate_synthetic(const SyntheticConfig& cfg) {
  using namespace synth_detail;
  if (cfg.num_objects == 0 || cfg.num_predicates == 0 || cfg.visual_dim == 0 ||
      cfg.embedding_dim == 0 || cfg.max_relations < cfg.min_relations ||
      cfg.max_distractors < cfg.min_distractors || cfg.min_relations == 0) {
    throw ValidationError("synthetic config needs positive counts and ordered ranges");
  }
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  auto uniform_index = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };

  SyntheticDataset out;
  Dataset& ds = out.dataset;
  for (std::size_t i = 0; i < cfg.num_objects; ++i) {
    const auto& pool = object_name_pool();
    ds.vocab.object_names.push_back(i < pool.size() ? pool[i] : "object " + std::to_string(i));
  }
  for (std::size_t i = 0; i < cfg.num_predicates; ++i) {
    const auto& pool = predicate_name_pool();
    ds.vocab.predicate_names.push_back(i < pool.size() ? pool[i]
                                                       : "relation " + std::to_string(i));
  }

  // Word vectors: categories fall into four semantic clusters.
  const std::size_t clusters = 4;
  std::vector<std::vector<double>> centers(clusters, std::vector<double>(cfg.embedding_dim));
  for (auto& c : centers) {
    for (auto& v : c) v = normal(rng);
  }
  out.embeddings = EmbeddingTable(cfg.embedding_dim);
  for (std::size_t i = 0; i < cfg.num_objects; ++i) {
    std::istringstream tokens(ds.vocab.object_names[i]);
    std::string token;
    while (tokens >> token) {
      if (out.embeddings.find(token)) continue;
      std::vector<double> v(cfg.embedding_dim);
      for (std::size_t d = 0; d < v.size(); ++d) v[d] = centers[i % clusters][d] + 0.3 * normal(rng);
      out.embeddings.add(token, std::move(v));
    }
  }

  // Category prototypes for visual vectors; a shared background prototype for spurious boxes.
  std::vector<std::vector<double>> prototypes(cfg.num_objects + 1,
                                              std::vector<double>(cfg.visual_dim));
  for (auto& p : prototypes) {
    for (auto& v : p) v = normal(rng);
  }
  const std::size_t background = cfg.num_objects;

  // Each predicate admits a subset of subject and object categories.
  const std::size_t subset = std::max<std::size_t>(2, cfg.num_objects / 4);
  std::vector<std::vector<std::size_t>> allowed_subjects(cfg.num_predicates);
  std::vector<std::vector<std::size_t>> allowed_objects(cfg.num_predicates);
  std::vector<std::size_t> all_categories(cfg.num_objects);
  for (std::size_t i = 0; i < cfg.num_objects; ++i) all_categories[i] = i;
  for (std::size_t p = 0; p < cfg.num_predicates; ++p) {
    std::shuffle(all_categories.begin(), all_categories.end(), rng);
    allowed_subjects[p].assign(all_categories.begin(),
                               all_categories.begin() + std::min(subset, cfg.num_objects));
    std::shuffle(all_categories.begin(), all_categories.end(), rng);
    allowed_objects[p].assign(all_categories.begin(),
                              all_categories.begin() + std::min(subset, cfg.num_objects));
  }

  const double W = cfg.image_width;
  const double H = cfg.image_height;
  auto clamp_box = [&](double x0, double y0, double x1, double y1) {
    x0 = std::clamp(x0, 0.0, W - 2.0);
    y0 = std::clamp(y0, 0.0, H - 2.0);
    x1 = std::clamp(x1, x0 + 2.0, W);
    y1 = std::clamp(y1, y0 + 2.0, H);
    return BoundingBox(x0, y0, x1, y1);
  };

  // Places the subject relative to the object according to the predicate's layout.
  auto place_subject = [&](std::size_t predicate, const BoundingBox& o) {
    const double ow = o.width(), oh = o.height();
    const double cx = 0.5 * (o.x_min() + o.x_max());
    switch (predicate % 8) {
      case 0: {  // above, resting on top
        const double w = ow * uniform(0.4, 0.8), h = oh * uniform(0.5, 0.9);
        const double x = cx + ow * uniform(-0.15, 0.15) - 0.5 * w;
        return clamp_box(x, o.y_min() - h, x + w, o.y_min() + 0.05 * oh);
      }
      case 1: {  // below
        const double w = ow * uniform(1.1, 1.6), h = oh * uniform(0.5, 0.9);
        const double x = cx + ow * uniform(-0.15, 0.15) - 0.5 * w;
        return clamp_box(x, o.y_max() - 0.05 * oh, x + w, o.y_max() + h);
      }
      case 2: {  // to the left
        const double w = ow * uniform(0.6, 1.2), h = oh * uniform(0.7, 1.2);
        const double y = o.y_min() + oh * uniform(-0.1, 0.1);
        const double gap = ow * uniform(0.05, 0.3);
        return clamp_box(o.x_min() - gap - w, y, o.x_min() - gap, y + h);
      }
      case 3: {  // to the right
        const double w = ow * uniform(0.6, 1.2), h = oh * uniform(0.7, 1.2);
        const double y = o.y_min() + oh * uniform(-0.1, 0.1);
        const double gap = ow * uniform(0.05, 0.3);
        return clamp_box(o.x_max() + gap, y, o.x_max() + gap + w, y + h);
      }
      case 4: {  // inside
        const double w = ow * uniform(0.25, 0.5), h = oh * uniform(0.25, 0.5);
        const double x = o.x_min() + (ow - w) * uniform(0.1, 0.9);
        const double y = o.y_min() + (oh - h) * uniform(0.1, 0.9);
        return clamp_box(x, y, x + w, y + h);
      }
      case 5: {  // contains
        const double w = ow * uniform(2.0, 3.0), h = oh * uniform(2.0, 3.0);
        const double x = o.x_min() - (w - ow) * uniform(0.1, 0.9);
        const double y = o.y_min() - (h - oh) * uniform(0.1, 0.9);
        return clamp_box(x, y, x + w, y + h);
      }
      case 6: {  // covers the upper part
        const double w = ow * uniform(0.4, 0.7), h = oh * uniform(0.25, 0.4);
        const double x = cx - 0.5 * w + ow * uniform(-0.1, 0.1);
        const double y = o.y_min() - 0.3 * h;
        return clamp_box(x, y, x + w, y + h);
      }
      default: {  // covers the lower part
        const double w = ow * uniform(0.8, 1.2), h = oh * uniform(0.3, 0.5);
        const double x = cx - 0.5 * w + ow * uniform(-0.1, 0.1);
        const double y = o.y_max() - 0.7 * h;
        return clamp_box(x, y, x + w, y + h);
      }
    }
  };

  auto visual_vector = [&](std::size_t prototype, const std::string& image_id,
                           const BoundingBox& box) {
    std::mt19937_64 local(region_hash(image_id, box, cfg.seed));
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(cfg.visual_dim);
    for (std::size_t d = 0; d < v.size(); ++d) {
      v[d] = prototypes[prototype][d] + cfg.visual_noise * n(local);
    }
    return v;
  };
  auto union_vector = [&](const std::string& image_id, const BoundingBox& box) {
    std::mt19937_64 local(region_hash(image_id, box, cfg.seed ^ 0x5bd1e995ULL));
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(cfg.visual_dim);
    for (auto& x : v) x = n(local);
    return v;
  };

  ds.visual = VisualFeatureStore(cfg.visual_dim);
  const std::size_t total = cfg.train_scenes + cfg.validation_scenes + cfg.test_scenes;
  for (std::size_t si = 0; si < total; ++si) {
    SceneRecord scene;
    char id[32];
    std::snprintf(id, sizeof(id), "synth-%05zu", si);
    scene.image_id = id;
    scene.width = W;
    scene.height = H;
    scene.split = si < cfg.train_scenes                           ? Split::Train
                  : si < cfg.train_scenes + cfg.validation_scenes ? Split::Validation
                                                                  : Split::Test;

    std::vector<Object> real;
    const std::size_t relations = uniform_index(cfg.min_relations, cfg.max_relations);
    for (std::size_t r = 0; r < relations; ++r) {
      const std::size_t p = uniform_index(0, cfg.num_predicates - 1);
      const std::size_t sc = allowed_subjects[p][uniform_index(0, allowed_subjects[p].size() - 1)];
      const std::size_t oc = allowed_objects[p][uniform_index(0, allowed_objects[p].size() - 1)];
      const double ow = uniform(60.0, 150.0), oh = uniform(60.0, 150.0);
      const double ox = uniform(0.15 * W, 0.85 * W - ow), oy = uniform(0.15 * H, 0.85 * H - oh);
      const BoundingBox obox = clamp_box(ox, oy, ox + ow, oy + oh);
      const BoundingBox sbox = place_subject(p, obox);
      real.push_back({sbox, sc});
      real.push_back({obox, oc});
      scene.annotations.push_back(AnnotatedTriplet{sbox, sc, p, obox, oc});
    }
    const std::size_t distractors = uniform_index(cfg.min_distractors, cfg.max_distractors);
    for (std::size_t d = 0; d < distractors; ++d) {
      const double w = uniform(40.0, 180.0), h = uniform(40.0, 180.0);
      const double x = uniform(0.0, W - w), y = uniform(0.0, H - h);
      real.push_back({clamp_box(x, y, x + w, y + h), uniform_index(0, cfg.num_objects - 1)});
    }

    // Ground-truth boxes carry visual vectors for the predicate task.
    for (const auto& o : real) {
      ds.visual.put(scene.image_id, o.box, visual_vector(o.category, scene.image_id, o.box));
    }

    std::bernoulli_distribution miss(cfg.miss_rate);
    std::bernoulli_distribution flip(cfg.label_flip_rate);
    for (const auto& o : real) {
      if (miss(rng)) continue;
      const double jw = cfg.box_jitter * o.box.width(), jh = cfg.box_jitter * o.box.height();
      const BoundingBox box =
          cfg.box_jitter > 0.0
              ? clamp_box(o.box.x_min() + jw * normal(rng), o.box.y_min() + jh * normal(rng),
                          o.box.x_max() + jw * normal(rng), o.box.y_max() + jh * normal(rng))
              : o.box;
      std::size_t category = o.category;
      double confidence = uniform(0.4, 1.0);
      if (cfg.num_objects > 1 && flip(rng)) {
        category = (o.category + uniform_index(1, cfg.num_objects - 1)) % cfg.num_objects;
        confidence = uniform(0.2, 0.8);
      }
      scene.detections.push_back(DetectedObject{box, category, confidence});
      if (!(box == o.box)) {
        ds.visual.put(scene.image_id, box, visual_vector(o.category, scene.image_id, box));
      }
    }
    std::binomial_distribution<std::size_t> spurious_count(real.size(), std::min(1.0, cfg.spurious_rate));
    const std::size_t spurious = cfg.spurious_rate > 0.0 ? spurious_count(rng) : 0;
    for (std::size_t k = 0; k < spurious; ++k) {
      const double w = uniform(40.0, 200.0), h = uniform(40.0, 200.0);
      const double x = uniform(0.0, W - w), y = uniform(0.0, H - h);
      const BoundingBox box = clamp_box(x, y, x + w, y + h);
      scene.detections.push_back(
          DetectedObject{box, uniform_index(0, cfg.num_objects - 1), uniform(0.2, 0.9)});
      ds.visual.put(scene.image_id, box, visual_vector(background, scene.image_id, box));
    }

    // Union regions for every pair that can be scored.
    auto add_unions = [&](const std::vector<BoundingBox>& boxes) {
      for (std::size_t i = 0; i < boxes.size(); ++i) {
        for (std::size_t j = i + 1; j < boxes.size(); ++j) {
          const BoundingBox u = union_box(boxes[i], boxes[j]);
          if (!ds.visual.contains(scene.image_id, u)) {
            ds.visual.put(scene.image_id, u, union_vector(scene.image_id, u));
          }
        }
      }
    };
    std::vector<BoundingBox> det_boxes;
    for (const auto& d : scene.detections) det_boxes.push_back(d.box);
    add_unions(det_boxes);
    std::vector<BoundingBox> gt_boxes;
    for (const auto& o : ground_truth_objects(scene)) gt_boxes.push_back(o.box);
    add_unions(gt_boxes);

    ds.scenes.push_back(std::move(scene));
  }
  return out;
}

}  // namespace murln

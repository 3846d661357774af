#pragma once

// File formats
// ------------
// Dataset (JSON, UTF-8):
//   { "schema": "murln-dataset", "version": 1,
//     "vocabulary": { "objects": [names...], "predicates": [names...] },
//     "visual_features": { "dim": D, "data": "<file>.bin", "index": "<file>.idx" },
//     "scenes": [ { "image_id": str, "width": w, "height": h, "split": "train|validation|test",
//                   "detections": [ { "box": [x0,y0,x1,y1], "category": i, "confidence": p } ],
//                   "annotations": [ { "subject_box": [..], "subject_category": i,
//                                      "predicate": k, "object_box": [..],
//                                      "object_category": j } ] } ] }
//   Feature paths are relative to the dataset file.
//
// Visual feature data: row-major little-endian f64, `count` rows of `dim`.
// Visual feature index (text): header line "murln-visual-index 1 <dim> <count>",
//   then one line per row: "<row>\t<image_id>\t<x0> <y0> <x1> <y1>" (17 significant digits).
//
// Embeddings: "token v1 ... vD" per line, space separated.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "murln/checkpoint.hpp"
#include "murln/errors.hpp"
#include "murln/features.hpp"
#include "murln/inference_eval.hpp"
#include "murln/scene_model.hpp"

namespace murln {

using Json = nlohmann::ordered_json;

inline constexpr int kDatasetVersion = 1;
inline constexpr int kVisualIndexVersion = 1;
inline constexpr int kMetricsVersion = 1;

struct Dataset {
  Vocabulary vocab;
  std::vector<SceneRecord> scenes;
  VisualFeatureStore visual{kDefaultVisualDim};

  std::vector<const SceneRecord*> split(Split s) const {
    std::vector<const SceneRecord*> out;
    for (const auto& scene : scenes) {
      if (scene.split == s) out.push_back(&scene);
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Small text helpers
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IngestionError("failed writing '" + path + "'");
}

/// Line and column (1-based) of a byte offset.
inline std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t offset) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

inline Json parse_json(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = line_col(text, e.byte == 0 ? 0 : e.byte - 1);
    throw IngestionError(source + ":" + std::to_string(line) + ":" + std::to_string(col) +
                         ": parse error: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Visual feature files
// ---------------------------------------------------------------------------

inline void write_visual_features(const VisualFeatureStore& store, const std::string& data_path,
                                  const std::string& index_path) {
  std::ofstream data(data_path, std::ios::binary);
  if (!data) throw IngestionError("cannot open '" + data_path + "' for writing");
  for (double v : store.data()) le::put<double>(data, v);
  if (!data) throw IngestionError("failed writing '" + data_path + "'");

  std::ostringstream idx;
  idx << "murln-visual-index " << kVisualIndexVersion << ' ' << store.dim() << ' '
      << store.size() << '\n';
  for (std::size_t i = 0; i < store.keys().size(); ++i) {
    const auto& k = store.keys()[i];
    idx << i << '\t' << k.image_id << '\t' << format_double(k.box[0]) << ' '
        << format_double(k.box[1]) << ' ' << format_double(k.box[2]) << ' '
        << format_double(k.box[3]) << '\n';
  }
  write_text_file(index_path, idx.str());
}

inline VisualFeatureStore read_visual_features(const std::string& data_path,
                                               const std::string& index_path,
                                               std::size_t expected_dim) {
  std::istringstream idx(read_text_file(index_path));
  std::string magic;
  int version = 0;
  std::size_t dim = 0, count = 0;
  idx >> magic >> version >> dim >> count;
  if (!idx || magic != "murln-visual-index") {
    throw IngestionError(index_path + ":1: not a visual feature index");
  }
  if (version != kVisualIndexVersion) {
    throw IngestionError(index_path + ":1: unsupported index version " + std::to_string(version));
  }
  if (dim != expected_dim) {
    throw IngestionError(index_path + ": feature dimension " + std::to_string(dim) +
                         " differs from the declared " + std::to_string(expected_dim));
  }
  std::ifstream data(data_path, std::ios::binary | std::ios::ate);
  if (!data) throw IngestionError("cannot open '" + data_path + "'");
  const auto bytes = static_cast<std::uint64_t>(data.tellg());
  if (bytes != static_cast<std::uint64_t>(count) * dim * sizeof(double)) {
    throw IngestionError(data_path + ": size " + std::to_string(bytes) + " bytes, expected " +
                         std::to_string(count * dim * sizeof(double)));
  }
  data.seekg(0);
  VisualFeatureStore store(dim);
  std::string line;
  std::getline(idx, line);  // rest of header
  std::vector<double> vec(dim);
  for (std::size_t r = 0; r < count; ++r) {
    if (!std::getline(idx, line)) {
      throw IngestionError(index_path + ": expected " + std::to_string(count) + " rows");
    }
    const std::string where = index_path + ":" + std::to_string(r + 2);
    const auto t1 = line.find('\t');
    const auto t2 = line.find('\t', t1 == std::string::npos ? t1 : t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos) {
      throw IngestionError(where + ": malformed index row");
    }
    const std::size_t row = std::stoull(line.substr(0, t1));
    if (row != r) throw IngestionError(where + ": rows must be listed in order");
    const std::string image_id = line.substr(t1 + 1, t2 - t1 - 1);
    std::istringstream coords(line.substr(t2 + 1));
    double x0, y0, x1, y1;
    if (!(coords >> x0 >> y0 >> x1 >> y1)) throw IngestionError(where + ": malformed box");
    for (auto& v : vec) v = le::get<double>(data);
    try {
      store.put(image_id, BoundingBox(x0, y0, x1, y1), vec);
    } catch (const GeometryError& e) {
      throw IngestionError(where + ": " + e.what());
    }
  }
  return store;
}

// ---------------------------------------------------------------------------
// Dataset JSON
// ---------------------------------------------------------------------------

inline Json box_to_json(const BoundingBox& b) {
  return Json::array({b.x_min(), b.y_min(), b.x_max(), b.y_max()});
}

inline BoundingBox box_from_json(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4) throw ValidationError(where + ": box must be [x0,y0,x1,y1]");
  for (const auto& v : j) {
    if (!v.is_number()) throw ValidationError(where + ": box coordinates must be numbers");
  }
  try {
    return BoundingBox(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                       j[3].get<double>());
  } catch (const GeometryError& e) {
    throw ValidationError(where + ": " + e.what());
  }
}

template <typename T>
T required(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw ValidationError(where + ": missing field '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(where + ": field '" + key + "' has the wrong type");
  }
}

inline Json scene_to_json(const SceneRecord& s) {
  Json j;
  j["image_id"] = s.image_id;
  j["width"] = s.width;
  j["height"] = s.height;
  j["split"] = split_name(s.split);
  Json dets = Json::array();
  for (const auto& d : s.detections) {
    dets.push_back({{"box", box_to_json(d.box)}, {"category", d.category},
                    {"confidence", d.confidence}});
  }
  j["detections"] = std::move(dets);
  Json anns = Json::array();
  for (const auto& a : s.annotations) {
    anns.push_back({{"subject_box", box_to_json(a.subject_box)},
                    {"subject_category", a.subject_category},
                    {"predicate", a.predicate},
                    {"object_box", box_to_json(a.object_box)},
                    {"object_category", a.object_category}});
  }
  j["annotations"] = std::move(anns);
  return j;
}

inline SceneRecord scene_from_json(const Json& j, std::size_t position) {
  std::string where = "scenes[" + std::to_string(position) + "]";
  SceneRecord s;
  s.image_id = required<std::string>(j, "image_id", where);
  where = "scene '" + s.image_id + "'";
  s.width = required<double>(j, "width", where);
  s.height = required<double>(j, "height", where);
  s.split = parse_split(required<std::string>(j, "split", where));
  const Json dets = j.contains("detections") ? j.at("detections") : Json::array();
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const std::string f = where + ": detections[" + std::to_string(i) + "]";
    s.detections.push_back(DetectedObject{box_from_json(dets[i].value("box", Json()), f),
                                          required<std::size_t>(dets[i], "category", f),
                                          required<double>(dets[i], "confidence", f)});
  }
  const Json anns = j.contains("annotations") ? j.at("annotations") : Json::array();
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const std::string f = where + ": annotations[" + std::to_string(i) + "]";
    s.annotations.push_back(
        AnnotatedTriplet{box_from_json(anns[i].value("subject_box", Json()), f + ".subject_box"),
                         required<std::size_t>(anns[i], "subject_category", f),
                         required<std::size_t>(anns[i], "predicate", f),
                         box_from_json(anns[i].value("object_box", Json()), f + ".object_box"),
                         required<std::size_t>(anns[i], "object_category", f)});
  }
  return s;
}

/// Checks ids, categories, bounds, and that every detection and annotation box
/// has a visual feature vector.
inline void validate_dataset(const Dataset& ds) {
  validate_vocabulary(ds.vocab);
  std::set<std::string> ids;
  for (const auto& s : ds.scenes) {
    if (!ids.insert(s.image_id).second) {
      throw ValidationError("duplicate image_id '" + s.image_id + "'");
    }
    validate_scene(s, ds.vocab);
    auto need = [&](const BoundingBox& b, const std::string& field) {
      if (!ds.visual.contains(s.image_id, b)) {
        throw IngestionError("scene '" + s.image_id + "': " + field +
                             " has no visual feature vector");
      }
    };
    for (std::size_t i = 0; i < s.detections.size(); ++i) {
      need(s.detections[i].box, "detections[" + std::to_string(i) + "]");
    }
    for (std::size_t i = 0; i < s.annotations.size(); ++i) {
      need(s.annotations[i].subject_box, "annotations[" + std::to_string(i) + "].subject_box");
      need(s.annotations[i].object_box, "annotations[" + std::to_string(i) + "].object_box");
    }
  }
}

inline Json dataset_to_json(const Dataset& ds, const std::string& data_file,
                            const std::string& index_file) {
  Json j;
  j["schema"] = "murln-dataset";
  j["version"] = kDatasetVersion;
  j["vocabulary"] = {{"objects", ds.vocab.object_names},
                     {"predicates", ds.vocab.predicate_names}};
  j["visual_features"] = {{"dim", ds.visual.dim()}, {"data", data_file}, {"index", index_file}};
  Json scenes = Json::array();
  for (const auto& s : ds.scenes) scenes.push_back(scene_to_json(s));
  j["scenes"] = std::move(scenes);
  return j;
}

/// Writes <stem>.json plus <stem>.features.bin / <stem>.features.idx next to it.
inline void save_dataset(const Dataset& ds, const std::string& json_path) {
  namespace fs = std::filesystem;
  const fs::path p(json_path);
  const std::string stem = p.stem().string();
  const std::string data_file = stem + ".features.bin";
  const std::string index_file = stem + ".features.idx";
  const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
  write_visual_features(ds.visual, (dir / data_file).string(), (dir / index_file).string());
  write_text_file(json_path, dataset_to_json(ds, data_file, index_file).dump(1) + "\n");
}

inline Dataset load_dataset(const std::string& json_path) {
  namespace fs = std::filesystem;
  const std::string text = read_text_file(json_path);
  const Json j = parse_json(text, json_path);
  if (!j.is_object() || j.value("schema", "") != "murln-dataset") {
    throw ValidationError(json_path + ": not a murln-dataset document");
  }
  const int version = j.value("version", 0);
  if (version != kDatasetVersion) {
    throw ValidationError(json_path + ": unsupported dataset version " + std::to_string(version));
  }
  Dataset ds;
  const auto& vocab = j.at("vocabulary");
  ds.vocab.object_names = required<std::vector<std::string>>(vocab, "objects", "vocabulary");
  ds.vocab.predicate_names = required<std::vector<std::string>>(vocab, "predicates", "vocabulary");
  const auto& vf = j.at("visual_features");
  const auto dim = required<std::size_t>(vf, "dim", "visual_features");
  const fs::path dir = fs::path(json_path).has_parent_path() ? fs::path(json_path).parent_path()
                                                             : fs::path(".");
  ds.visual = read_visual_features((dir / required<std::string>(vf, "data", "visual_features")).string(),
                                   (dir / required<std::string>(vf, "index", "visual_features")).string(),
                                   dim);
  const auto& scenes = j.at("scenes");
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    try {
      ds.scenes.push_back(scene_from_json(scenes[i], i));
    } catch (const GeometryError& e) {
      throw ValidationError("scenes[" + std::to_string(i) + "]: " + e.what());
    }
  }
  validate_dataset(ds);
  return ds;
}

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

inline EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open embeddings '" + path + "'");
  try {
    return EmbeddingTable::parse(in);
  } catch (const IngestionError& e) {
    throw IngestionError(path + ": " + e.what());
  }
}

inline void save_embeddings(const EmbeddingTable& table, const std::string& path) {
  std::ostringstream out;
  for (const auto& token : table.tokens()) {
    out << token;
    const double* v = table.find(token);
    for (std::size_t i = 0; i < table.dim(); ++i) out << ' ' << format_double(v[i]);
    out << '\n';
  }
  write_text_file(path, out.str());
}

// ---------------------------------------------------------------------------
// Statistics, pairs, predictions, metrics
// ---------------------------------------------------------------------------

inline Json statistics_to_json(const TripletStatistics& stats, const Vocabulary& vocab) {
  Json j;
  j["schema"] = "murln-triplet-stats";
  j["version"] = 1;
  j["num_objects"] = stats.num_objects();
  j["num_predicates"] = stats.num_predicates();
  j["total"] = stats.total();
  Json triplets = Json::array();
  for (std::size_t s = 0; s < stats.num_objects(); ++s) {
    for (std::size_t p = 0; p < stats.num_predicates(); ++p) {
      for (std::size_t o = 0; o < stats.num_objects(); ++o) {
        if (const auto c = stats.count(s, p, o)) {
          triplets.push_back({{"subject", vocab.object_names[s]},
                              {"predicate", vocab.predicate_names[p]},
                              {"object", vocab.object_names[o]},
                              {"ids", {s, p, o}},
                              {"count", c}});
        }
      }
    }
  }
  j["triplets"] = std::move(triplets);
  return j;
}

inline TripletStatistics statistics_from_json(const Json& j) {
  if (j.value("schema", "") != "murln-triplet-stats") {
    throw ValidationError("not a murln-triplet-stats document");
  }
  TripletStatistics stats(required<std::size_t>(j, "num_objects", "stats"),
                          required<std::size_t>(j, "num_predicates", "stats"));
  for (const auto& t : j.at("triplets")) {
    const auto ids = t.at("ids");
    stats.add(ids[0].get<std::size_t>(), ids[1].get<std::size_t>(), ids[2].get<std::size_t>(),
              t.at("count").get<std::uint64_t>());
  }
  return stats;
}

inline Json pairs_to_json(const SceneRecord& scene, const std::vector<ObjectPair>& pairs) {
  Json out = Json::array();
  for (const auto& p : pairs) {
    Json predicates = Json::array();
    for (std::size_t k = 0; k < p.predicate_labels.size(); ++k) {
      if (p.predicate_labels[k]) predicates.push_back(k);
    }
    out.push_back({{"subject", p.subject_index},
                   {"object", p.object_index},
                   {"status", p.determinate() ? "determinate" : "undetermined"},
                   {"predicates", predicates},
                   {"annotations", p.matched_annotation_indices}});
  }
  return Json{{"image_id", scene.image_id}, {"pairs", std::move(out)}};
}

inline Json predictions_to_json(const ImagePredictions& preds, const Vocabulary& vocab) {
  Json out = Json::array();
  for (const auto& t : preds.triplets) {
    out.push_back({{"subject", vocab.object_names.at(t.subject_category)},
                   {"predicate", vocab.predicate_names.at(t.predicate)},
                   {"object", vocab.object_names.at(t.object_category)},
                   {"subject_box", box_to_json(t.subject_box)},
                   {"object_box", box_to_json(t.object_box)},
                   {"score", t.score}});
  }
  return Json{{"image_id", preds.image_id}, {"triplets", std::move(out)}};
}

inline Json recall_block_to_json(const RecallBlock& b) {
  Json j = Json::object();
  if (b.error) {
    j["error"] = category_name(ErrorCategory::UndefinedMetric);
    j["message"] = *b.error;
    return j;
  }
  for (const auto& [n, r] : b.recall) {
    j["R@" + std::to_string(n)] = r;
    j["hits@" + std::to_string(n)] = b.counts.at(n).hits;
  }
  if (!b.counts.empty()) j["ground_truth"] = b.counts.begin()->second.ground_truth;
  return j;
}

/// Metrics report: per-task blocks plus a flat "summary" map whose keys
/// ("<task>.R@<N>", "<task>.zero_shot.R@<N>") are stable for CI checks.
inline Json metrics_report(const std::vector<EvalResult>& results, const std::string& split) {
  Json j;
  j["schema"] = "murln-metrics";
  j["version"] = kMetricsVersion;
  j["split"] = split;
  Json tasks = Json::object();
  Json summary = Json::object();
  for (const auto& r : results) {
    Json t;
    t["images"] = r.images;
    t["predictions"] = r.predictions;
    t["all"] = recall_block_to_json(r.all);
    for (const auto& [n, v] : r.all.recall) {
      summary[std::string(task_name(r.task)) + ".R@" + std::to_string(n)] = v;
    }
    if (r.zero_shot) {
      t["zero_shot"] = recall_block_to_json(*r.zero_shot);
      for (const auto& [n, v] : r.zero_shot->recall) {
        summary[std::string(task_name(r.task)) + ".zero_shot.R@" + std::to_string(n)] = v;
      }
    }
    tasks[task_name(r.task)] = std::move(t);
  }
  j["tasks"] = std::move(tasks);
  j["summary"] = std::move(summary);
  return j;
}

}  // namespace murln

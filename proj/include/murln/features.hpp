#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <istream>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "murln/errors.hpp"
#include "murln/pair_generator.hpp"
#include "murln/scene_model.hpp"

namespace murln {

inline constexpr std::size_t kSpatialDim = 8;
inline constexpr std::size_t kDefaultVisualDim = 4096;

// ---------------------------------------------------------------------------
// Spatial modal
// ---------------------------------------------------------------------------

/// Offsets of the subject and object box edges from the union box edges,
/// normalized by the union width/height:
/// [sx0, sy0, sx1, sy1, ox0, oy0, ox1, oy1].
inline std::array<double, kSpatialDim> spatial_features(const BoundingBox& subject,
                                                        const BoundingBox& object) {
  const BoundingBox u = union_box(subject, object);
  const double w = u.width();
  const double h = u.height();
  if (!(w > 0.0) || !(h > 0.0)) throw GeometryError("degenerate union box");
  return {(subject.x_min() - u.x_min()) / w, (subject.y_min() - u.y_min()) / h,
          (subject.x_max() - u.x_max()) / w, (subject.y_max() - u.y_max()) / h,
          (object.x_min() - u.x_min()) / w,  (object.y_min() - u.y_min()) / h,
          (object.x_max() - u.x_max()) / w,  (object.y_max() - u.y_max()) / h};
}

// ---------------------------------------------------------------------------
// Internal linguistic modal: triplet counts and Naive Bayes
// ---------------------------------------------------------------------------

/// Raw (subject, predicate, object) occurrence counts from the training split.
/// Duplicate annotations count once per occurrence.
class TripletStatistics {
 public:
  TripletStatistics(std::size_t num_objects, std::size_t num_predicates)
      : n_(num_objects),
        m_(num_predicates),
        counts_(num_objects * num_predicates * num_objects, 0),
        predicate_(num_predicates, 0),
        subject_predicate_(num_objects * num_predicates, 0),
        predicate_object_(num_predicates * num_objects, 0) {}

  std::size_t num_objects() const noexcept { return n_; }
  std::size_t num_predicates() const noexcept { return m_; }
  std::uint64_t total() const noexcept { return total_; }

  void add(std::size_t subject, std::size_t predicate, std::size_t object,
           std::uint64_t times = 1) {
    if (subject >= n_ || object >= n_ || predicate >= m_) {
      throw IngestionError("triplet (" + std::to_string(subject) + ", " +
                           std::to_string(predicate) + ", " + std::to_string(object) +
                           ") is outside the vocabulary");
    }
    counts_[(subject * m_ + predicate) * n_ + object] += times;
    predicate_[predicate] += times;
    subject_predicate_[subject * m_ + predicate] += times;
    predicate_object_[predicate * n_ + object] += times;
    total_ += times;
  }

  std::uint64_t count(std::size_t subject, std::size_t predicate, std::size_t object) const {
    return counts_.at((subject * m_ + predicate) * n_ + object);
  }
  std::uint64_t predicate_count(std::size_t p) const { return predicate_.at(p); }
  std::uint64_t subject_predicate_count(std::size_t s, std::size_t p) const {
    return subject_predicate_.at(s * m_ + p);
  }
  std::uint64_t predicate_object_count(std::size_t p, std::size_t o) const {
    return predicate_object_.at(p * n_ + o);
  }

  /// True when the (subject, predicate, object) type occurs at least once.
  bool seen(std::size_t subject, std::size_t predicate, std::size_t object) const {
    return count(subject, predicate, object) > 0;
  }

  friend bool operator==(const TripletStatistics&, const TripletStatistics&) = default;

 private:
  std::size_t n_;
  std::size_t m_;
  std::vector<std::uint64_t> counts_;
  std::vector<std::uint64_t> predicate_;
  std::vector<std::uint64_t> subject_predicate_;
  std::vector<std::uint64_t> predicate_object_;
  std::uint64_t total_ = 0;
};

/// Counts every annotation of every training-split scene; other splits are skipped.
inline TripletStatistics build_triplet_statistics(const std::vector<SceneRecord>& scenes,
                                                  const Vocabulary& vocab) {
  TripletStatistics stats(vocab.num_objects(), vocab.num_predicates());
  for (const auto& scene : scenes) {
    if (scene.split != Split::Train) continue;
    for (const auto& a : scene.annotations) {
      stats.add(a.subject_category, a.predicate, a.object_category);
    }
  }
  return stats;
}

/// P(p | l_s, l_o) proportional to P(p) P(l_s | p) P(l_o | p), each factor
/// add-one smoothed, renormalized to sum to 1.
inline std::vector<double> internal_linguistic(const TripletStatistics& stats,
                                               std::size_t subject_category,
                                               std::size_t object_category) {
  const std::size_t n = stats.num_objects();
  const std::size_t m = stats.num_predicates();
  if (subject_category >= n || object_category >= n) {
    throw ValidationError("category index outside the vocabulary");
  }
  const double total = static_cast<double>(stats.total());
  std::vector<double> out(m);
  double sum = 0.0;
  for (std::size_t p = 0; p < m; ++p) {
    const double cp = static_cast<double>(stats.predicate_count(p));
    const double prior = (cp + 1.0) / (total + static_cast<double>(m));
    const double given_s =
        (static_cast<double>(stats.subject_predicate_count(subject_category, p)) + 1.0) /
        (cp + static_cast<double>(n));
    const double given_o =
        (static_cast<double>(stats.predicate_object_count(p, object_category)) + 1.0) /
        (cp + static_cast<double>(n));
    out[p] = prior * given_s * given_o;
    sum += out[p];
  }
  for (auto& v : out) v /= sum;
  return out;
}

// ---------------------------------------------------------------------------
// External linguistic modal: pretrained word vectors
// ---------------------------------------------------------------------------

inline std::string to_lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

/// Token -> vector table read from "token v1 ... vD" lines. Tokens are
/// lowercased on load; the first occurrence of a token wins.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return index_.size(); }

  void add(const std::string& token, std::vector<double> vec) {
    if (dim_ == 0) dim_ = vec.size();
    if (vec.size() != dim_) {
      throw DimensionError("embedding for '" + token + "' has dimension " +
                           std::to_string(vec.size()) + ", expected " + std::to_string(dim_));
    }
    const auto key = to_lower(token);
    if (index_.count(key)) return;
    index_.emplace(key, tokens_.size());
    tokens_.push_back(token);
    data_.insert(data_.end(), vec.begin(), vec.end());
  }

  const double* find(const std::string& token) const {
    auto it = index_.find(to_lower(token));
    if (it == index_.end()) return nullptr;
    return data_.data() + it->second * dim_;
  }

  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  static EmbeddingTable parse(std::istream& in) {
    EmbeddingTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      std::istringstream ss(line);
      std::string token;
      ss >> token;
      std::vector<double> vec;
      std::string field;
      while (ss >> field) {
        char* end = nullptr;
        const double v = std::strtod(field.c_str(), &end);
        if (end == field.c_str() || *end != '\0' || !std::isfinite(v)) {
          throw IngestionError("embedding file line " + std::to_string(line_no) +
                               ": bad number '" + field + "'");
        }
        vec.push_back(v);
      }
      if (vec.empty()) {
        throw IngestionError("embedding file line " + std::to_string(line_no) +
                             ": no vector components");
      }
      if (table.dim_ != 0 && vec.size() != table.dim_) {
        throw IngestionError("embedding file line " + std::to_string(line_no) + ": dimension " +
                             std::to_string(vec.size()) + " differs from " +
                             std::to_string(table.dim_));
      }
      table.add(token, std::move(vec));
    }
    if (table.dim_ == 0) throw IngestionError("embedding file is empty");
    return table;
  }

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> tokens_;
  std::vector<double> data_;
};

/// Mean of the whitespace-separated tokens' vectors (lowercased lookup).
/// Unknown tokens contribute zeros; a name with no known token is all zero.
inline std::vector<double> external_linguistic(const EmbeddingTable& table,
                                               const std::string& category_name) {
  std::vector<double> out(table.dim(), 0.0);
  std::istringstream ss(category_name);
  std::string token;
  std::size_t n_tokens = 0;
  while (ss >> token) {
    ++n_tokens;
    if (const double* v = table.find(token)) {
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
    }
  }
  if (n_tokens > 0) {
    for (auto& x : out) x /= static_cast<double>(n_tokens);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Visual modal: ingested per-region vectors
// ---------------------------------------------------------------------------

/// Region feature vectors keyed by (image id, exact box coordinates). Stands
/// in for ROI-pooled CNN features: every detection box and every pair's
/// union box that will be scored needs an entry.
class VisualFeatureStore {
 public:
  explicit VisualFeatureStore(std::size_t dim = kDefaultVisualDim) : dim_(dim) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return keys_.size(); }

  struct Key {
    std::string image_id;
    std::array<double, 4> box;
    auto operator<=>(const Key&) const = default;
  };

  static Key make_key(const std::string& image_id, const BoundingBox& b) {
    return Key{image_id, {b.x_min(), b.y_min(), b.x_max(), b.y_max()}};
  }

  /// Inserts or overwrites the vector for a region.
  void put(const std::string& image_id, const BoundingBox& box, std::span<const double> vec) {
    if (vec.size() != dim_) {
      throw DimensionError("visual vector has dimension " + std::to_string(vec.size()) +
                           ", expected " + std::to_string(dim_));
    }
    for (double v : vec) {
      if (!std::isfinite(v)) throw IngestionError("visual vector has a non-finite entry");
    }
    auto key = make_key(image_id, box);
    auto it = index_.find(key);
    if (it != index_.end()) {
      std::copy(vec.begin(), vec.end(), data_.begin() + it->second * dim_);
      return;
    }
    index_.emplace(key, keys_.size());
    keys_.push_back(std::move(key));
    data_.insert(data_.end(), vec.begin(), vec.end());
  }

  bool contains(const std::string& image_id, const BoundingBox& box) const {
    return index_.count(make_key(image_id, box)) > 0;
  }

  std::span<const double> get(const std::string& image_id, const BoundingBox& box) const {
    auto it = index_.find(make_key(image_id, box));
    if (it == index_.end()) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "missing visual feature for image '" << image_id << "' box [" << box.x_min() << ", "
          << box.y_min() << ", " << box.x_max() << ", " << box.y_max() << "]";
      throw IngestionError(msg.str());
    }
    return {data_.data() + it->second * dim_, dim_};
  }

  /// Entries in insertion order; row i of data() belongs to keys()[i].
  const std::vector<Key>& keys() const noexcept { return keys_; }
  const std::vector<double>& data() const noexcept { return data_; }

 private:
  std::size_t dim_;
  std::map<Key, std::size_t> index_;
  std::vector<Key> keys_;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Bundle assembly
// ---------------------------------------------------------------------------

/// Raw per-pair features of the three modals, before any learned transform.
struct FeatureBundle {
  std::vector<double> visual_subject;
  std::vector<double> visual_object;
  std::vector<double> visual_union;
  std::array<double, kSpatialDim> spatial{};
  std::vector<double> external_subject;
  std::vector<double> external_object;
  std::vector<double> internal;  // probability distribution over predicates
};

/// Pulls the four extractors together. Category embeddings and the internal
/// Naive-Bayes table are precomputed at construction, so the extractor is
/// immutable afterwards and safe to share across threads.
class FeatureExtractor {
 public:
  FeatureExtractor(const Vocabulary& vocab, const TripletStatistics& stats,
                   const EmbeddingTable& embeddings, const VisualFeatureStore& visual)
      : visual_(&visual),
        n_(vocab.num_objects()),
        m_(vocab.num_predicates()),
        embed_dim_(embeddings.dim()) {
    if (stats.num_objects() != n_ || stats.num_predicates() != m_) {
      throw DimensionError("triplet statistics do not match the vocabulary");
    }
    category_embeddings_.reserve(n_);
    for (const auto& name : vocab.object_names) {
      category_embeddings_.push_back(external_linguistic(embeddings, name));
    }
    internal_.reserve(n_ * n_);
    for (std::size_t s = 0; s < n_; ++s) {
      for (std::size_t o = 0; o < n_; ++o) internal_.push_back(internal_linguistic(stats, s, o));
    }
  }

  std::size_t visual_dim() const noexcept { return visual_->dim(); }
  std::size_t embedding_dim() const noexcept { return embed_dim_; }
  std::size_t num_predicates() const noexcept { return m_; }

  const std::vector<double>& internal(std::size_t subject_category,
                                      std::size_t object_category) const {
    return internal_.at(subject_category * n_ + object_category);
  }
  const std::vector<double>& category_embedding(std::size_t category) const {
    return category_embeddings_.at(category);
  }

  FeatureBundle assemble(const ObjectPair& pair, const std::string& image_id) const {
    const auto& s = pair.subject;
    const auto& o = pair.object;
    FeatureBundle b;
    auto vs = visual_->get(image_id, s.box);
    auto vo = visual_->get(image_id, o.box);
    auto vu = visual_->get(image_id, union_box(s.box, o.box));
    b.visual_subject.assign(vs.begin(), vs.end());
    b.visual_object.assign(vo.begin(), vo.end());
    b.visual_union.assign(vu.begin(), vu.end());
    b.spatial = spatial_features(s.box, o.box);
    b.external_subject = category_embedding(s.category);
    b.external_object = category_embedding(o.category);
    b.internal = internal(s.category, o.category);
    return b;
  }

  FeatureBundle assemble(const ObjectPair& pair, const SceneRecord& scene) const {
    return assemble(pair, scene.image_id);
  }

 private:
  const VisualFeatureStore* visual_;
  std::size_t n_;
  std::size_t m_;
  std::size_t embed_dim_;
  std::vector<std::vector<double>> category_embeddings_;
  std::vector<std::vector<double>> internal_;
};

}  // namespace murln

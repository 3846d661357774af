#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "murln/errors.hpp"
#include "murln/features.hpp"
#include "murln/neural_core.hpp"
#include "murln/pair_generator.hpp"

namespace murln {

enum class FusionMode : std::uint8_t { Transforming = 0, Concatenating = 1 };

/// What the determinate-confidence subnetwork hands to the relation subnetwork.
enum class DcSignal : std::uint8_t { Probability = 0, Hidden = 1 };

struct ModelConfig {
  std::size_t transform_dim = 500;
  std::size_t dc_hidden_dim = 100;
  std::size_t rel_hidden_dim = 500;

  bool use_visual = true;
  bool use_spatial = true;
  bool use_external = true;
  bool use_internal = true;

  FusionMode fusion = FusionMode::Transforming;
  DcSignal dc_signal = DcSignal::Probability;
  bool im_mode = false;

  double alpha = 1.0;
  double lambda1 = 0.5;
  double lambda2 = 1.0;

  std::size_t visual_dim = kDefaultVisualDim;
  std::size_t embedding_dim = 300;
  std::size_t num_predicates = 70;
  std::size_t num_objects = 100;

  std::uint64_t init_seed = 0;

  void validate() const {
    if (!use_visual && !use_spatial && !use_external && !use_internal) {
      throw ValidationError("at least one modal feature must be enabled");
    }
    if (transform_dim == 0 || dc_hidden_dim == 0 || rel_hidden_dim == 0 || visual_dim == 0 ||
        embedding_dim == 0 || num_predicates == 0 || num_objects == 0) {
      throw ValidationError("model dimensions must be positive");
    }
    if (alpha < 0.0 || lambda1 < 0.0 || lambda2 < 0.0) {
      throw ValidationError("alpha, lambda1 and lambda2 must be non-negative");
    }
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// ---------------------------------------------------------------------------
// Feature slots and batch inputs
// ---------------------------------------------------------------------------

enum class Slot : std::uint8_t {
  VisualSubject = 0,
  VisualObject,
  VisualUnion,
  Spatial,
  ExternalSubject,
  ExternalObject,
  Internal,
};
inline constexpr std::size_t kNumSlots = 7;

enum class Modality : std::uint8_t { Visual = 0, Spatial = 1, Linguistic = 2 };

inline Modality modality_of(Slot s) {
  switch (s) {
    case Slot::VisualSubject:
    case Slot::VisualObject:
    case Slot::VisualUnion: return Modality::Visual;
    case Slot::Spatial: return Modality::Spatial;
    default: return Modality::Linguistic;
  }
}

inline const char* slot_name(Slot s) {
  static constexpr const char* names[] = {"visual_subject",   "visual_object",   "visual_union",
                                          "spatial",          "external_subject", "external_object",
                                          "internal"};
  return names[static_cast<std::size_t>(s)];
}

inline std::size_t slot_dim(Slot s, const ModelConfig& c) {
  switch (modality_of(s)) {
    case Modality::Visual: return c.visual_dim;
    case Modality::Spatial: return kSpatialDim;
    case Modality::Linguistic: return s == Slot::Internal ? c.num_predicates : c.embedding_dim;
  }
  return 0;
}

/// Which of the three networks a RelationNetwork plays. The subject and
/// object networks only see features that describe one side of the pair.
enum class NetworkRole : std::uint8_t { Union = 0, Subject = 1, Object = 2 };

inline const char* role_name(NetworkRole r) {
  switch (r) {
    case NetworkRole::Union: return "union";
    case NetworkRole::Subject: return "subject";
    case NetworkRole::Object: return "object";
  }
  return "unknown";
}

inline std::vector<Slot> slots_for(const ModelConfig& c, NetworkRole role) {
  std::vector<Slot> out;
  auto add = [&](bool on, Slot s) {
    if (on) out.push_back(s);
  };
  switch (role) {
    case NetworkRole::Union:
      add(c.use_visual, Slot::VisualSubject);
      add(c.use_visual, Slot::VisualObject);
      add(c.use_visual, Slot::VisualUnion);
      add(c.use_spatial, Slot::Spatial);
      add(c.use_external, Slot::ExternalSubject);
      add(c.use_external, Slot::ExternalObject);
      add(c.use_internal, Slot::Internal);
      break;
    case NetworkRole::Subject:
      add(c.use_visual, Slot::VisualSubject);
      add(c.use_spatial, Slot::Spatial);
      add(c.use_external, Slot::ExternalSubject);
      break;
    case NetworkRole::Object:
      add(c.use_visual, Slot::VisualObject);
      add(c.use_spatial, Slot::Spatial);
      add(c.use_external, Slot::ExternalObject);
      break;
  }
  return out;
}

/// Column-per-pair feature matrices, one per slot.
struct BatchInputs {
  std::array<Matrix, kNumSlots> slots;
  std::size_t batch = 0;

  const Matrix& operator[](Slot s) const { return slots[static_cast<std::size_t>(s)]; }
  Matrix& operator[](Slot s) { return slots[static_cast<std::size_t>(s)]; }
};

inline BatchInputs make_inputs(std::span<const FeatureBundle> bundles, const ModelConfig& c) {
  BatchInputs in;
  in.batch = bundles.size();
  const auto B = static_cast<Eigen::Index>(bundles.size());
  for (std::size_t s = 0; s < kNumSlots; ++s) {
    in.slots[s].resize(static_cast<Eigen::Index>(slot_dim(static_cast<Slot>(s), c)), B);
  }
  auto fill = [&](Slot slot, std::size_t col, std::span<const double> v) {
    Matrix& m = in[slot];
    if (static_cast<Eigen::Index>(v.size()) != m.rows()) {
      throw DimensionError(std::string("feature '") + slot_name(slot) + "' has dimension " +
                           std::to_string(v.size()) + ", model expects " +
                           std::to_string(m.rows()));
    }
    for (std::size_t r = 0; r < v.size(); ++r) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col)) = v[r];
    }
  };
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    const auto& b = bundles[i];
    fill(Slot::VisualSubject, i, b.visual_subject);
    fill(Slot::VisualObject, i, b.visual_object);
    fill(Slot::VisualUnion, i, b.visual_union);
    fill(Slot::Spatial, i, b.spatial);
    fill(Slot::ExternalSubject, i, b.external_subject);
    fill(Slot::ExternalObject, i, b.external_object);
    fill(Slot::Internal, i, b.internal);
  }
  return in;
}

// ---------------------------------------------------------------------------
// One relationship learning network: fusion + DC subnetwork + relation subnetwork
// ---------------------------------------------------------------------------

struct NetworkOutput {
  Matrix dc_logit;    // 1 x B
  Matrix dc_prob;     // 1 x B
  Matrix rel_logit;   // M x B
  Matrix rel_prob;    // M x B
};

/// Per-level layer profile of the fusion block: layer count and summed output
/// width at each depth.
struct FusionLevel {
  std::size_t layers = 0;
  std::size_t total_out_dim = 0;
  friend bool operator==(const FusionLevel&, const FusionLevel&) = default;
};

class RelationNetwork {
 public:
  RelationNetwork(const ModelConfig& config, NetworkRole role, std::mt19937_64& rng)
      : config_(config), role_(role), slots_(slots_for(config, role)) {
    if (slots_.empty()) {
      throw ValidationError(std::string("the ") + role_name(role) +
                            " network has no enabled input features");
    }
    for (Slot s : slots_) {
      auto m = static_cast<std::size_t>(modality_of(s));
      if (groups_.empty() || groups_.back().modality != m) groups_.push_back({m, {}});
      groups_.back().slots.push_back(s);
    }
    const std::size_t T = config.transform_dim;
    const std::size_t k = groups_.size();
    if (config.fusion == FusionMode::Transforming) {
      for (Slot s : slots_) {
        slot_layers_.push_back(DenseLayer::glorot(slot_dim(s, config), T, Activation::Relu, rng));
      }
      for (const auto& g : groups_) {
        group_layers_.push_back(
            DenseLayer::glorot(g.slots.size() * T, T, Activation::Relu, rng));
      }
    } else {
      std::size_t raw = 0;
      for (Slot s : slots_) raw += slot_dim(s, config);
      concat_first_ = DenseLayer::glorot(raw, slots_.size() * T, Activation::Relu, rng);
      concat_second_ = DenseLayer::glorot(slots_.size() * T, k * T, Activation::Relu, rng);
    }
    fused_dim_ = k * T;
    dc_hidden_ = DenseLayer::glorot(fused_dim_, config.dc_hidden_dim, Activation::Relu, rng);
    dc_out_ = DenseLayer::glorot(config.dc_hidden_dim, 1, Activation::Identity, rng);
    const std::size_t signal_dim =
        config.dc_signal == DcSignal::Probability ? 1 : config.dc_hidden_dim;
    rel_hidden_ = DenseLayer::glorot(fused_dim_ + signal_dim, config.rel_hidden_dim,
                                     Activation::Relu, rng);
    rel_out_ =
        DenseLayer::glorot(config.rel_hidden_dim, config.num_predicates, Activation::Identity, rng);
  }

  NetworkRole role() const noexcept { return role_; }
  const std::vector<Slot>& slots() const noexcept { return slots_; }
  std::size_t fused_dim() const noexcept { return fused_dim_; }
  std::size_t num_modalities() const noexcept { return groups_.size(); }

  DenseLayer& dc_output_layer() noexcept { return dc_out_; }
  DenseLayer& rel_output_layer() noexcept { return rel_out_; }

  std::vector<FusionLevel> fusion_profile() const {
    std::vector<FusionLevel> levels(2);
    if (config_.fusion == FusionMode::Transforming) {
      for (const auto& l : slot_layers_) {
        ++levels[0].layers;
        levels[0].total_out_dim += l.out_dim();
      }
      for (const auto& l : group_layers_) {
        ++levels[1].layers;
        levels[1].total_out_dim += l.out_dim();
      }
    } else {
      levels[0] = {1, concat_first_.out_dim()};
      levels[1] = {1, concat_second_.out_dim()};
    }
    return levels;
  }

  /// Fused multi-modal vector (k * transform_dim rows).
  Matrix fuse(const BatchInputs& in) {
    const auto B = static_cast<Eigen::Index>(in.batch);
    const auto T = static_cast<Eigen::Index>(config_.transform_dim);
    if (config_.fusion == FusionMode::Transforming) {
      Matrix fused(static_cast<Eigen::Index>(fused_dim_), B);
      std::size_t slot_i = 0;
      for (std::size_t g = 0; g < groups_.size(); ++g) {
        const auto n = static_cast<Eigen::Index>(groups_[g].slots.size());
        Matrix cat(n * T, B);
        for (Eigen::Index j = 0; j < n; ++j, ++slot_i) {
          cat.middleRows(j * T, T) = slot_layers_[slot_i].forward(in[slots_[slot_i]]);
        }
        fused.middleRows(static_cast<Eigen::Index>(g) * T, T) = group_layers_[g].forward(cat);
      }
      return fused;
    }
    std::size_t raw = 0;
    for (Slot s : slots_) raw += slot_dim(s, config_);
    Matrix cat(static_cast<Eigen::Index>(raw), B);
    Eigen::Index row = 0;
    for (Slot s : slots_) {
      cat.middleRows(row, in[s].rows()) = in[s];
      row += in[s].rows();
    }
    return concat_second_.forward(concat_first_.forward(cat));
  }

  NetworkOutput forward(const BatchInputs& in) {
    NetworkOutput out;
    const Matrix fused = fuse(in);
    dc_hidden_act_ = dc_hidden_.forward(fused);
    out.dc_logit = dc_out_.forward(dc_hidden_act_);
    out.dc_prob = out.dc_logit.unaryExpr([](double z) { return sigmoid(z); });
    const Matrix& signal =
        config_.dc_signal == DcSignal::Probability ? out.dc_prob : dc_hidden_act_;
    Matrix rel_in(fused.rows() + signal.rows(), fused.cols());
    rel_in.topRows(fused.rows()) = fused;
    rel_in.bottomRows(signal.rows()) = signal;
    out.rel_logit = rel_out_.forward(rel_hidden_.forward(rel_in));
    out.rel_prob = out.rel_logit.unaryExpr([](double z) { return sigmoid(z); });
    last_dc_prob_ = out.dc_prob;
    forwarded_ = true;
    return out;
  }

  /// Backpropagates loss gradients w.r.t. both subnetworks' output logits.
  /// The relation loss reaches the DC subnetwork through the concatenated signal.
  void backward(const Matrix& grad_dc_logit, const Matrix& grad_rel_logit) {
    if (!forwarded_) throw StateError("backward called before forward");
    const Matrix g_rel_in = rel_hidden_.backward(rel_out_.backward(grad_rel_logit));
    const auto F = static_cast<Eigen::Index>(fused_dim_);
    Matrix g_fused = g_rel_in.topRows(F);
    const Matrix g_signal = g_rel_in.bottomRows(g_rel_in.rows() - F);
    Matrix g_dc_hidden;
    if (config_.dc_signal == DcSignal::Probability) {
      const Matrix dp = last_dc_prob_.array() * (1.0 - last_dc_prob_.array());
      const Matrix g_logit = grad_dc_logit + Matrix(g_signal.array() * dp.array());
      g_dc_hidden = dc_out_.backward(g_logit);
    } else {
      g_dc_hidden = dc_out_.backward(grad_dc_logit) + g_signal;
    }
    g_fused += dc_hidden_.backward(g_dc_hidden);
    unfuse(g_fused);
  }

  void zero_grad() {
    for (auto& l : slot_layers_) l.zero_grad();
    for (auto& l : group_layers_) l.zero_grad();
    concat_first_.zero_grad();
    concat_second_.zero_grad();
    dc_hidden_.zero_grad();
    dc_out_.zero_grad();
    rel_hidden_.zero_grad();
    rel_out_.zero_grad();
  }

  /// Fixed order: fusion layers, DC hidden, DC output, relation hidden, relation output.
  void append_parameters(const std::string& prefix, std::vector<ParameterBlock>& out) {
    if (config_.fusion == FusionMode::Transforming) {
      for (std::size_t i = 0; i < slot_layers_.size(); ++i) {
        slot_layers_[i].append_parameters(prefix + ".transform." + slot_name(slots_[i]), out);
      }
      static constexpr const char* modality_names[] = {"visual", "spatial", "linguistic"};
      for (std::size_t g = 0; g < group_layers_.size(); ++g) {
        group_layers_[g].append_parameters(
            prefix + ".modality." + modality_names[groups_[g].modality], out);
      }
    } else {
      concat_first_.append_parameters(prefix + ".concat.first", out);
      concat_second_.append_parameters(prefix + ".concat.second", out);
    }
    dc_hidden_.append_parameters(prefix + ".dc.hidden", out);
    dc_out_.append_parameters(prefix + ".dc.output", out);
    rel_hidden_.append_parameters(prefix + ".rel.hidden", out);
    rel_out_.append_parameters(prefix + ".rel.output", out);
  }

 private:
  struct Group {
    std::size_t modality;
    std::vector<Slot> slots;
  };

  void unfuse(const Matrix& g_fused) {
    if (config_.fusion == FusionMode::Concatenating) {
      concat_first_.backward(concat_second_.backward(g_fused));
      return;
    }
    const auto T = static_cast<Eigen::Index>(config_.transform_dim);
    std::size_t slot_i = 0;
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      const Matrix g_cat =
          group_layers_[g].backward(g_fused.middleRows(static_cast<Eigen::Index>(g) * T, T));
      for (std::size_t j = 0; j < groups_[g].slots.size(); ++j, ++slot_i) {
        slot_layers_[slot_i].backward(g_cat.middleRows(static_cast<Eigen::Index>(j) * T, T));
      }
    }
  }

  ModelConfig config_;
  NetworkRole role_;
  std::vector<Slot> slots_;
  std::vector<Group> groups_;
  std::vector<DenseLayer> slot_layers_;
  std::vector<DenseLayer> group_layers_;
  DenseLayer concat_first_;
  DenseLayer concat_second_;
  DenseLayer dc_hidden_;
  DenseLayer dc_out_;
  DenseLayer rel_hidden_;
  DenseLayer rel_out_;
  std::size_t fused_dim_ = 0;
  Matrix dc_hidden_act_;
  Matrix last_dc_prob_;
  bool forwarded_ = false;
};

// ---------------------------------------------------------------------------
// Joint loss
// ---------------------------------------------------------------------------

/// Per-batch targets: multi-hot labels (M x B) and determinate flags.
struct BatchTargets {
  Matrix labels;
  std::vector<bool> determinate;
};

inline BatchTargets make_targets(std::span<const ObjectPair> pairs, std::size_t num_predicates) {
  BatchTargets t;
  t.labels = Matrix::Zero(static_cast<Eigen::Index>(num_predicates),
                          static_cast<Eigen::Index>(pairs.size()));
  t.determinate.resize(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].predicate_labels.size() != num_predicates) {
      throw DimensionError("pair label vector length differs from the predicate count");
    }
    for (std::size_t k = 0; k < num_predicates; ++k) {
      t.labels(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) =
          pairs[i].predicate_labels[k];
    }
    t.determinate[i] = pairs[i].determinate();
  }
  return t;
}

/// The four loss terms, each a mean over the pairs of its status, and their
/// weighted total L = rel_d + lambda1 rel_i + lambda2 det_d + lambda2 alpha det_i.
struct LossBreakdown {
  double total = 0.0;
  double rel_determinate = 0.0;
  double rel_undetermined = 0.0;
  double det_determinate = 0.0;
  double det_undetermined = 0.0;

  LossBreakdown& operator+=(const LossBreakdown& o) {
    total += o.total;
    rel_determinate += o.rel_determinate;
    rel_undetermined += o.rel_undetermined;
    det_determinate += o.det_determinate;
    det_undetermined += o.det_undetermined;
    return *this;
  }
};

struct LossWeights {
  double alpha = 1.0;
  double lambda1 = 0.5;
  double lambda2 = 1.0;
};

inline double combine_terms(const LossBreakdown& b, const LossWeights& w) {
  return b.rel_determinate + w.lambda1 * b.rel_undetermined + w.lambda2 * b.det_determinate +
         w.lambda2 * w.alpha * b.det_undetermined;
}

struct LossResult {
  LossBreakdown breakdown;
  Matrix grad_dc_logit;   // 1 x B
  Matrix grad_rel_logit;  // M x B
};

/// Determinate pairs: CE(dc, 1) and sum_k CE(p_k, y_k). Undetermined pairs:
/// CE(dc, 0) and sum_k CE(p_k, 0). Gradients are w.r.t. the output logits.
inline LossResult joint_loss(const NetworkOutput& out, const BatchTargets& targets,
                             const LossWeights& w) {
  const auto B = out.rel_prob.cols();
  const auto M = out.rel_prob.rows();
  if (targets.labels.rows() != M || targets.labels.cols() != B ||
      static_cast<Eigen::Index>(targets.determinate.size()) != B || out.dc_prob.cols() != B) {
    throw DimensionError("loss targets do not match the predictions");
  }
  std::size_t n_det = 0;
  for (bool d : targets.determinate) n_det += d ? 1 : 0;
  const std::size_t n_und = static_cast<std::size_t>(B) - n_det;

  LossResult r;
  r.grad_dc_logit = Matrix::Zero(1, B);
  r.grad_rel_logit = Matrix::Zero(M, B);
  for (Eigen::Index i = 0; i < B; ++i) {
    const bool det = targets.determinate[static_cast<std::size_t>(i)];
    const double dc = out.dc_prob(0, i);
    double rel_sum = 0.0;
    for (Eigen::Index k = 0; k < M; ++k) {
      const double y = det ? targets.labels(k, i) : 0.0;
      rel_sum += sigmoid_ce(out.rel_prob(k, i), y);
    }
    if (det) {
      const double inv = 1.0 / static_cast<double>(n_det);
      r.breakdown.rel_determinate += rel_sum * inv;
      r.breakdown.det_determinate += sigmoid_ce(dc, 1.0) * inv;
      for (Eigen::Index k = 0; k < M; ++k) {
        r.grad_rel_logit(k, i) = (out.rel_prob(k, i) - targets.labels(k, i)) * inv;
      }
      r.grad_dc_logit(0, i) = w.lambda2 * (dc - 1.0) * inv;
    } else {
      const double inv = 1.0 / static_cast<double>(n_und);
      r.breakdown.rel_undetermined += rel_sum * inv;
      r.breakdown.det_undetermined += sigmoid_ce(dc, 0.0) * inv;
      for (Eigen::Index k = 0; k < M; ++k) {
        r.grad_rel_logit(k, i) = w.lambda1 * out.rel_prob(k, i) * inv;
      }
      r.grad_dc_logit(0, i) = w.lambda2 * w.alpha * dc * inv;
    }
  }
  r.breakdown.total = combine_terms(r.breakdown, w);
  return r;
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

struct PairPrediction {
  double determinate_confidence = 0.5;
  std::vector<double> predicate_probabilities;
};

/// P(R) per predicate: P(p|s,o,d) * P(d|s,o) * P(s|B_s) * P(o|B_o).
inline std::vector<double> score_relation(const PairPrediction& p, double subject_conf,
                                          double object_conf) {
  std::vector<double> out(p.predicate_probabilities.size());
  const double scale = p.determinate_confidence * subject_conf * object_conf;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = p.predicate_probabilities[k] * scale;
  return out;
}

/// Elementwise product of per-network relation scores.
inline std::vector<double> combine_network_scores(const std::vector<std::vector<double>>& scores) {
  if (scores.empty()) return {};
  std::vector<double> out = scores.front();
  for (std::size_t n = 1; n < scores.size(); ++n) {
    if (scores[n].size() != out.size()) throw DimensionError("score vectors differ in length");
    for (std::size_t k = 0; k < out.size(); ++k) out[k] *= scores[n][k];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model: one network, or three in IM mode
// ---------------------------------------------------------------------------

class Model {
 public:
  explicit Model(const ModelConfig& config) : config_(config) {
    config_.validate();
    std::mt19937_64 rng(config_.init_seed);
    networks_.emplace_back(config_, NetworkRole::Union, rng);
    if (config_.im_mode) {
      networks_.emplace_back(config_, NetworkRole::Subject, rng);
      networks_.emplace_back(config_, NetworkRole::Object, rng);
    }
  }

  const ModelConfig& config() const noexcept { return config_; }
  std::vector<RelationNetwork>& networks() noexcept { return networks_; }
  LossWeights weights() const { return {config_.alpha, config_.lambda1, config_.lambda2}; }

  std::vector<ParameterBlock> parameters() {
    std::vector<ParameterBlock> out;
    for (auto& n : networks_) n.append_parameters(role_name(n.role()), out);
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (const auto& b : parameters()) n += b.value.size();
    return n;
  }

  void zero_grad() {
    for (auto& n : networks_) n.zero_grad();
  }

  /// Forward + loss + backward. Gradients are reset first. In IM mode the
  /// loss is the sum of the three networks' joint losses.
  LossBreakdown train_step_gradients(const BatchInputs& in, const BatchTargets& targets) {
    zero_grad();
    LossBreakdown total;
    for (auto& net : networks_) {
      const NetworkOutput out = net.forward(in);
      LossResult r = joint_loss(out, targets, weights());
      net.backward(r.grad_dc_logit, r.grad_rel_logit);
      total += r.breakdown;
    }
    return total;
  }

  /// Loss only (forward passes); used by the finite-difference oracle.
  LossBreakdown loss(const BatchInputs& in, const BatchTargets& targets) {
    LossBreakdown total;
    for (auto& net : networks_) total += joint_loss(net.forward(in), targets, weights()).breakdown;
    return total;
  }

  /// Per-network predictions, networks in (union, subject, object) order.
  std::vector<std::vector<PairPrediction>> predict_networks(const BatchInputs& in) {
    std::vector<std::vector<PairPrediction>> out;
    for (auto& net : networks_) {
      const NetworkOutput o = net.forward(in);
      std::vector<PairPrediction> preds(in.batch);
      for (std::size_t i = 0; i < in.batch; ++i) {
        const auto col = static_cast<Eigen::Index>(i);
        preds[i].determinate_confidence = o.dc_prob(0, col);
        preds[i].predicate_probabilities.resize(config_.num_predicates);
        for (std::size_t k = 0; k < config_.num_predicates; ++k) {
          preds[i].predicate_probabilities[k] = o.rel_prob(static_cast<Eigen::Index>(k), col);
        }
      }
      out.push_back(std::move(preds));
    }
    return out;
  }

  /// Union-network predictions.
  std::vector<PairPrediction> predict(const BatchInputs& in) {
    return predict_networks(in).front();
  }

  /// Relation scores per pair (M each). In IM mode, the product of the three
  /// networks' scores.
  std::vector<std::vector<double>> relation_scores(const BatchInputs& in,
                                                   std::span<const double> subject_conf,
                                                   std::span<const double> object_conf) {
    if (subject_conf.size() != in.batch || object_conf.size() != in.batch) {
      throw DimensionError("confidence vectors do not match the batch");
    }
    const auto per_net = predict_networks(in);
    std::vector<std::vector<double>> out(in.batch);
    for (std::size_t i = 0; i < in.batch; ++i) {
      std::vector<std::vector<double>> scores;
      for (const auto& preds : per_net) {
        scores.push_back(score_relation(preds[i], subject_conf[i], object_conf[i]));
      }
      out[i] = combine_network_scores(scores);
    }
    return out;
  }

 private:
  ModelConfig config_;
  std::vector<RelationNetwork> networks_;
};

/// Result of the three-network (IM) forward pass.
struct ImResult {
  std::vector<std::vector<PairPrediction>> predictions;  // union, subject, object
  std::vector<std::vector<double>> combined_scores;      // per pair
  LossBreakdown loss;                                    // summed over networks
  std::vector<LossBreakdown> per_network_loss;
};

inline ImResult im_forward_and_loss(Model& model, const BatchInputs& in,
                                    const BatchTargets& targets,
                                    std::span<const double> subject_conf,
                                    std::span<const double> object_conf) {
  if (!model.config().im_mode) throw ModeError("IM forward requested on a non-IM model");
  ImResult r;
  for (auto& net : model.networks()) {
    const NetworkOutput o = net.forward(in);
    const LossBreakdown b = joint_loss(o, targets, model.weights()).breakdown;
    r.per_network_loss.push_back(b);
    r.loss += b;
  }
  r.predictions = model.predict_networks(in);
  r.combined_scores = model.relation_scores(in, subject_conf, object_conf);
  return r;
}

}  // namespace murln

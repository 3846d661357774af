#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "murln/errors.hpp"

namespace murln {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation : std::uint8_t { Identity = 0, Relu = 1, Sigmoid = 2 };

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline constexpr double kProbabilityClamp = 1e-7;

/// CE(p, y) = -log p for y = 1, -log(1 - p) otherwise, with p clamped to
/// [1e-7, 1 - 1e-7]. Gradients never go through this clamp: callers use the
/// fused sigmoid form d/dz = p - y.
inline double sigmoid_ce(double p, double y) {
  const double q = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  return y > 0.5 ? -std::log(q) : -std::log(1.0 - q);
}

/// A named view over one contiguous parameter array and its gradient.
struct ParameterBlock {
  std::string name;
  std::span<double> value;
  std::span<double> grad;
};

/// Fully connected layer over column batches: output = act(W x + b), x is in_dim x B.
class DenseLayer {
 public:
  DenseLayer() = default;
  DenseLayer(std::size_t in_dim, std::size_t out_dim, Activation activation)
      : weight_(Matrix::Zero(static_cast<Eigen::Index>(out_dim), static_cast<Eigen::Index>(in_dim))),
        bias_(Vector::Zero(static_cast<Eigen::Index>(out_dim))),
        grad_weight_(Matrix::Zero(weight_.rows(), weight_.cols())),
        grad_bias_(Vector::Zero(bias_.size())),
        activation_(activation) {
    if (in_dim == 0 || out_dim == 0) throw DimensionError("dense layer dimensions must be positive");
  }

  /// Uniform in +-sqrt(6 / (fan_in + fan_out)), zero bias.
  static DenseLayer glorot(std::size_t in_dim, std::size_t out_dim, Activation activation,
                           std::mt19937_64& rng) {
    DenseLayer layer(in_dim, out_dim, activation);
    const double limit = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index c = 0; c < layer.weight_.cols(); ++c) {
      for (Eigen::Index r = 0; r < layer.weight_.rows(); ++r) layer.weight_(r, c) = dist(rng);
    }
    return layer;
  }

  std::size_t in_dim() const noexcept { return static_cast<std::size_t>(weight_.cols()); }
  std::size_t out_dim() const noexcept { return static_cast<std::size_t>(weight_.rows()); }
  Activation activation() const noexcept { return activation_; }

  Matrix& weight() noexcept { return weight_; }
  const Matrix& weight() const noexcept { return weight_; }
  Vector& bias() noexcept { return bias_; }
  const Vector& bias() const noexcept { return bias_; }
  const Matrix& grad_weight() const noexcept { return grad_weight_; }
  const Vector& grad_bias() const noexcept { return grad_bias_; }

  /// Forward pass without touching the backward cache.
  Matrix apply(const Matrix& input) const {
    check_input(input);
    Matrix pre = weight_ * input;
    pre.colwise() += bias_;
    return activate(pre);
  }

  /// Forward pass that caches input and pre-activation for backward().
  Matrix forward(const Matrix& input) {
    check_input(input);
    input_ = input;
    pre_ = weight_ * input;
    pre_.colwise() += bias_;
    cached_ = true;
    return activate(pre_);
  }

  /// Accumulates dL/dW and dL/db from dL/d(output); returns dL/d(input).
  Matrix backward(const Matrix& grad_output) {
    if (!cached_) throw StateError("backward called before forward");
    if (grad_output.rows() != pre_.rows() || grad_output.cols() != pre_.cols()) {
      throw DimensionError("upstream gradient shape does not match layer output");
    }
    Matrix grad_pre = grad_output;
    switch (activation_) {
      case Activation::Identity: break;
      case Activation::Relu:
        grad_pre = (pre_.array() > 0.0).select(grad_pre, 0.0);
        break;
      case Activation::Sigmoid: {
        const Matrix s = activate(pre_);
        grad_pre = grad_pre.array() * s.array() * (1.0 - s.array());
        break;
      }
    }
    grad_weight_.noalias() += grad_pre * input_.transpose();
    grad_bias_ += grad_pre.rowwise().sum();
    return weight_.transpose() * grad_pre;
  }

  void zero_grad() {
    grad_weight_.setZero();
    grad_bias_.setZero();
  }

  void clear_cache() {
    cached_ = false;
    input_.resize(0, 0);
    pre_.resize(0, 0);
  }

  /// Weight block (column-major) then bias block.
  void append_parameters(const std::string& prefix, std::vector<ParameterBlock>& out) {
    out.push_back({prefix + ".weight", {weight_.data(), static_cast<std::size_t>(weight_.size())},
                   {grad_weight_.data(), static_cast<std::size_t>(grad_weight_.size())}});
    out.push_back({prefix + ".bias", {bias_.data(), static_cast<std::size_t>(bias_.size())},
                   {grad_bias_.data(), static_cast<std::size_t>(grad_bias_.size())}});
  }

 private:
  void check_input(const Matrix& input) const {
    if (input.rows() != weight_.cols()) {
      throw DimensionError("layer expects input dimension " + std::to_string(weight_.cols()) +
                           ", got " + std::to_string(input.rows()));
    }
  }

  Matrix activate(const Matrix& pre) const {
    switch (activation_) {
      case Activation::Identity: return pre;
      case Activation::Relu: return pre.cwiseMax(0.0);
      case Activation::Sigmoid: return pre.unaryExpr([](double z) { return sigmoid(z); });
    }
    return pre;
  }

  Matrix weight_;
  Vector bias_;
  Matrix grad_weight_;
  Vector grad_bias_;
  Activation activation_ = Activation::Identity;
  Matrix input_;
  Matrix pre_;
  bool cached_ = false;
};

/// A plain stack of dense layers.
class Sequential {
 public:
  Sequential() = default;
  explicit Sequential(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {}

  std::vector<DenseLayer>& layers() noexcept { return layers_; }

  Matrix forward(const Matrix& input) {
    Matrix x = input;
    for (auto& l : layers_) x = l.forward(x);
    return x;
  }

  Matrix backward(const Matrix& grad_output) {
    Matrix g = grad_output;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = it->backward(g);
    return g;
  }

  void zero_grad() {
    for (auto& l : layers_) l.zero_grad();
  }

  std::vector<ParameterBlock> parameters() {
    std::vector<ParameterBlock> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      layers_[i].append_parameters("layer" + std::to_string(i), out);
    }
    return out;
  }

 private:
  std::vector<DenseLayer> layers_;
};

// ---------------------------------------------------------------------------
// Adam with exponential (staircase) learning-rate decay
// ---------------------------------------------------------------------------

struct AdamConfig {
  double base_lr = 0.0003;
  double decay = 0.5;              // gamma
  std::uint64_t decay_interval = 4000;  // steps
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamConfig vrd() { return AdamConfig{0.0003, 0.5, 4000}; }
  static AdamConfig vg() { return AdamConfig{0.0003, 0.7, 35000}; }

  /// base * gamma^floor(step / interval)
  double learning_rate(std::uint64_t step) const {
    const auto k = decay_interval == 0 ? 0 : step / decay_interval;
    return base_lr * std::pow(decay, static_cast<double>(k));
  }
};

class AdamOptimizer {
 public:
  explicit AdamOptimizer(AdamConfig config = {}) : config_(config) {}

  const AdamConfig& config() const noexcept { return config_; }
  std::uint64_t step_count() const noexcept { return step_; }
  double current_learning_rate() const { return config_.learning_rate(step_); }

  /// One update over all blocks. Throws DivergenceError, leaving every
  /// parameter untouched, if any gradient entry is non-finite.
  void step(std::vector<ParameterBlock>& blocks) {
    if (first_.empty()) {
      for (const auto& b : blocks) {
        first_.emplace_back(b.value.size(), 0.0);
        second_.emplace_back(b.value.size(), 0.0);
      }
    }
    if (first_.size() != blocks.size()) throw DimensionError("parameter block count changed");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      if (blocks[i].value.size() != first_[i].size()) {
        throw DimensionError("parameter block '" + blocks[i].name + "' changed shape");
      }
      for (double g : blocks[i].grad) {
        if (!std::isfinite(g)) {
          throw DivergenceError("non-finite gradient in block '" + blocks[i].name + "'");
        }
      }
    }
    const double lr = config_.learning_rate(step_);
    const double t = static_cast<double>(step_ + 1);
    const double c1 = 1.0 - std::pow(config_.beta1, t);
    const double c2 = 1.0 - std::pow(config_.beta2, t);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      auto& m = first_[i];
      auto& v = second_[i];
      auto value = blocks[i].value;
      auto grad = blocks[i].grad;
      for (std::size_t j = 0; j < value.size(); ++j) {
        const double g = grad[j];
        m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g;
        v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g * g;
        const double m_hat = m[j] / c1;
        const double v_hat = v[j] / c2;
        value[j] -= lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
      }
    }
    ++step_;
  }

 private:
  AdamConfig config_;
  std::uint64_t step_ = 0;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
};

// ---------------------------------------------------------------------------
// Finite-difference gradient verification
// ---------------------------------------------------------------------------

struct BlockCheck {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t refined = 0;  // coordinates re-estimated with a smaller step
};

struct GradCheckReport {
  std::vector<BlockCheck> blocks;
  double tolerance = 0.0;
  bool passed = true;

  double max_relative_error() const {
    double m = 0.0;
    for (const auto& b : blocks) m = std::max(m, b.max_relative_error);
    return m;
  }
  /// First block whose error reaches the tolerance, or nullptr.
  const BlockCheck* worst_failing() const {
    const BlockCheck* worst = nullptr;
    for (const auto& b : blocks) {
      if (b.max_relative_error >= tolerance &&
          (!worst || b.max_relative_error > worst->max_relative_error)) {
        worst = &b;
      }
    }
    return worst;
  }
};

struct GradCheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  // Denominator floor: |a - n| / max(|a|, |n|, floor). Central differences at
  // step 1e-5 resolve about 1e-10 in double precision, so smaller gradients are
  // compared in absolute terms.
  double floor = 1e-5;
  // A coordinate that fails is re-estimated at step / 10, step / 100, ... to
  // move the interval off a relu kink. The estimate converges to the true
  // derivative, so a wrong analytic gradient still fails.
  std::size_t refinements = 2;
};

/// Compares the analytic gradients already stored in `blocks` against central
/// differences of `loss`, which must recompute the loss from the current
/// parameter values using forward passes only.
inline GradCheckReport gradient_check(std::vector<ParameterBlock>& blocks,
                                      const std::function<double()>& loss,
                                      GradCheckOptions options = {}) {
  GradCheckReport report;
  report.tolerance = options.tolerance;
  for (auto& b : blocks) {
    BlockCheck check{b.name};
    for (std::size_t j = 0; j < b.value.size(); ++j) {
      const double saved = b.value[j];
      const double analytic = b.grad[j];
      double numeric = 0.0, rel = 0.0, step = options.step;
      for (std::size_t attempt = 0; attempt <= options.refinements; ++attempt, step /= 10.0) {
        b.value[j] = saved + step;
        const double plus = loss();
        b.value[j] = saved - step;
        const double minus = loss();
        b.value[j] = saved;
        numeric = (plus - minus) / (2.0 * step);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), options.floor});
        rel = std::abs(analytic - numeric) / denom;
        if (rel < options.tolerance) {
          check.refined += attempt > 0 ? 1 : 0;
          break;
        }
      }
      if (rel > check.max_relative_error || !std::isfinite(rel)) {
        check.max_relative_error = std::isfinite(rel) ? rel : std::numeric_limits<double>::infinity();
        check.worst_index = j;
        check.analytic = analytic;
        check.numeric = numeric;
      }
    }
    if (!(check.max_relative_error < options.tolerance)) report.passed = false;
    report.blocks.push_back(std::move(check));
  }
  return report;
}

}  // namespace murln

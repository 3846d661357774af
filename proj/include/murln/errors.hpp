#pragma once

#include <stdexcept>
#include <string>

namespace murln {

/// Machine-readable error categories. The CLI maps each one to a distinct
/// exit code and prints the category name on stderr.
enum class ErrorCategory {
  InvalidGeometry,
  Ingestion,
  Validation,
  InsufficientData,
  Dimension,
  State,
  Divergence,
  UndefinedMetric,
  Mode,
  Checkpoint,
  Usage,
};

inline const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::InvalidGeometry: return "invalid-geometry";
    case ErrorCategory::Ingestion: return "ingestion";
    case ErrorCategory::Validation: return "validation";
    case ErrorCategory::InsufficientData: return "insufficient-data";
    case ErrorCategory::Dimension: return "dimension";
    case ErrorCategory::State: return "state";
    case ErrorCategory::Divergence: return "divergence";
    case ErrorCategory::UndefinedMetric: return "undefined-metric";
    case ErrorCategory::Mode: return "mode";
    case ErrorCategory::Checkpoint: return "checkpoint";
    case ErrorCategory::Usage: return "usage";
  }
  return "unknown";
}

inline int exit_code(ErrorCategory c) {
  return 2 + static_cast<int>(c);
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

namespace detail {
template <ErrorCategory C>
class TaggedError : public Error {
 public:
  explicit TaggedError(const std::string& what) : Error(C, what) {}
};
}  // namespace detail

using GeometryError = detail::TaggedError<ErrorCategory::InvalidGeometry>;
using IngestionError = detail::TaggedError<ErrorCategory::Ingestion>;
using ValidationError = detail::TaggedError<ErrorCategory::Validation>;
using InsufficientDataError = detail::TaggedError<ErrorCategory::InsufficientData>;
using DimensionError = detail::TaggedError<ErrorCategory::Dimension>;
using StateError = detail::TaggedError<ErrorCategory::State>;
using DivergenceError = detail::TaggedError<ErrorCategory::Divergence>;
using UndefinedMetricError = detail::TaggedError<ErrorCategory::UndefinedMetric>;
using ModeError = detail::TaggedError<ErrorCategory::Mode>;
using CheckpointError = detail::TaggedError<ErrorCategory::Checkpoint>;
using UsageError = detail::TaggedError<ErrorCategory::Usage>;

}  // namespace murln

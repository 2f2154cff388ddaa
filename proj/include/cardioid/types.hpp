#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>

namespace cardioid {

/// Domain error codes. Every failure mode of the public API maps to one of
/// these so callers (and the CLI) can react without string matching.
enum class Err {
  MalformedInput,
  TooShort,
  NonMonotonicTime,
  EmptyFrameSequence,
  DimensionMismatch,
  InvalidSpec,
  SignalTooShort,
  BandOutOfRange,
  F1hOutOfRange,
  NoPeriodsFound,
  TooFewPeriods,
  HMorphologyMismatch,
  DegenerateGap,
  InsufficientData,
  SingularScatter,
  NonFiniteLoss,
  UnknownMorphology,
  TooFewPoints,
  NotPositiveDefinite,
  EmptyInput,
  UndefinedRate,
  InvalidCounts,
  EmptySubset,
  TooFewSubjects,
};

const char* to_string(Err kind);

class Error : public std::runtime_error {
 public:
  Error(Err kind, const std::string& msg)
      : std::runtime_error(std::string(to_string(kind)) + ": " + msg), kind_(kind) {}

  Err kind() const noexcept { return kind_; }

 private:
  Err kind_;
};

/// Uniformly sampled scalar PPG trace. Immutable by convention: operations
/// return new signals instead of mutating in place.
struct PpgSignal {
  Eigen::VectorXd samples;
  double sample_rate_hz = 0.0;
  std::string subject_id;        // empty = unset
  std::optional<double> t0;      // epoch seconds of samples[0]

  double duration_s() const { return (static_cast<double>(samples.size()) - 1.0) / sample_rate_hz; }

  /// Throws Error{TooShort|MalformedInput} when the basic invariants fail.
  void validate() const;
};

/// One decoded camera frame, pixels row-major, columns = (red, green, blue).
struct RgbFrame {
  int width = 0;
  int height = 0;
  Eigen::MatrixX3d pixels;

  void validate() const;
};

}  // namespace cardioid

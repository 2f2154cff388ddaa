#include "cardioid/types.hpp"

#include <cmath>

namespace cardioid {

const char* to_string(Err kind) {
  switch (kind) {
    case Err::MalformedInput: return "MalformedInput";
    case Err::TooShort: return "TooShort";
    case Err::NonMonotonicTime: return "NonMonotonicTime";
    case Err::EmptyFrameSequence: return "EmptyFrameSequence";
    case Err::DimensionMismatch: return "DimensionMismatch";
    case Err::InvalidSpec: return "InvalidSpec";
    case Err::SignalTooShort: return "SignalTooShort";
    case Err::BandOutOfRange: return "BandOutOfRange";
    case Err::F1hOutOfRange: return "F1hOutOfRange";
    case Err::NoPeriodsFound: return "NoPeriodsFound";
    case Err::TooFewPeriods: return "TooFewPeriods";
    case Err::HMorphologyMismatch: return "HMorphologyMismatch";
    case Err::DegenerateGap: return "DegenerateGap";
    case Err::InsufficientData: return "InsufficientData";
    case Err::SingularScatter: return "SingularScatter";
    case Err::NonFiniteLoss: return "NonFiniteLoss";
    case Err::UnknownMorphology: return "UnknownMorphology";
    case Err::TooFewPoints: return "TooFewPoints";
    case Err::NotPositiveDefinite: return "NotPositiveDefinite";
    case Err::EmptyInput: return "EmptyInput";
    case Err::UndefinedRate: return "UndefinedRate";
    case Err::InvalidCounts: return "InvalidCounts";
    case Err::EmptySubset: return "EmptySubset";
    case Err::TooFewSubjects: return "TooFewSubjects";
  }
  return "UnknownError";
}

void PpgSignal::validate() const {
  if (samples.size() < 2) throw Error(Err::TooShort, "signal needs at least 2 samples");
  if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz))
    throw Error(Err::MalformedInput, "sample_rate_hz must be positive and finite");
  if (!samples.allFinite()) throw Error(Err::MalformedInput, "signal contains non-finite samples");
}

void RgbFrame::validate() const {
  if (width <= 0 || height <= 0)
    throw Error(Err::MalformedInput, "frame dimensions must be positive");
  if (pixels.rows() != static_cast<Eigen::Index>(width) * height)
    throw Error(Err::DimensionMismatch, "pixel count does not match width*height");
  if ((pixels.array() < 0.0).any())
    throw Error(Err::MalformedInput, "negative channel intensity");
}

}  // namespace cardioid

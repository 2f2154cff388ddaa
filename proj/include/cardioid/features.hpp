#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "cardioid/segmentation.hpp"
#include "cardioid/types.hpp"

namespace cardioid {

enum class FiducialKind { Peak, Valley };

/// Extremum of a normalized period, time in period units, amplitude in the
/// min-max normalized range.
struct FiducialPoint {
  double t_norm = 0.0;  // index / (L - 1)
  double a_norm = 0.0;
  FiducialKind kind = FiducialKind::Valley;
};

struct FeatureVector {
  MorphologyClass morphology = MorphologyClass::Discard;
  Eigen::VectorXd values;
  std::string subject_id;
};

/// 32 for M1, 38 for M2, 44 for M3.
int feature_dims(MorphologyClass m);

/// The five fiducials of an accepted h(t) period, in order
/// [valley, systolic peak, dicrotic notch, second wave, valley].
/// Throws HMorphologyMismatch unless h has exactly 2 peaks and 3 valleys.
std::vector<FiducialPoint> fiducials_h(const CardiacPeriod& period,
                                       double prominence_frac = 0.01);

/// Concatenated h-part (period duration, systolic area ratio, consecutive
/// fiducial-pair triples) and h''-part (triples over its own fiducials).
FeatureVector extract_features(const CardiacPeriod& period, double prominence_frac = 0.01);

/// One CSV per morphology: header `subject,morphology,f0..f{d-1}`.
void write_features_csv(const std::vector<FeatureVector>& fvs, const std::string& path);
std::vector<FeatureVector> read_features_csv(const std::string& path);

}  // namespace cardioid

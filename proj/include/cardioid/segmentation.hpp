#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "cardioid/filters.hpp"
#include "cardioid/types.hpp"

namespace cardioid {

/// One cardiac cycle, valley-to-valley, resampled to a fixed length and
/// min-max normalized. h2 uses the same raw boundaries as h.
struct CardiacPeriod {
  Eigen::VectorXd h_samples;   // length L, normalized to [0, 1]
  Eigen::VectorXd h2_samples;  // length L, normalized to [0, 1]
  double duration_s = 0.0;
  Eigen::Index raw_start_idx = 0;
  Eigen::Index raw_end_idx = 0;  // exclusive
  std::string subject_id;
  double h_scale = 0.0;   // raw peak-to-peak before normalization
  double h2_scale = 0.0;
};

struct Extrema {
  std::vector<std::pair<Eigen::Index, double>> peaks;
  std::vector<std::pair<Eigen::Index, double>> valleys;
};

enum class MorphologyClass { M1, M2, M3, Discard };

std::string to_string(MorphologyClass m);

struct CteReport {
  std::vector<double> per_period_cte;
  double signal_variance = 0.0;
  Eigen::VectorXd mean_period;
};

enum class PeriodChannel { H, H2 };

struct SegmentationOptions {
  int period_len = 100;
  double min_duration_s = 1.0 / 3.0;
  double max_duration_s = 2.0;
  double prominence_frac = 0.01;
};

/// Valley-to-valley segmentation: the next boundary is the deepest sample of
/// h within [prev + 0.75 T, prev + 1.25 T], T = 1/f1h of the nearest window.
/// Segments are cubically resampled to period_len and min-max normalized;
/// durations outside [min, max] and constant segments are dropped.
std::vector<CardiacPeriod> segment_periods(const PpgSignal& h, const PpgSignal& h2,
                                           const std::vector<HarmonicEstimate>& f1h_per_window,
                                           const WindowPlan& plan = {},
                                           const SegmentationOptions& opts = {});

/// Sign-change extrema with plateau tolerance, pruned to topographic
/// prominence >= prominence_frac * (max - min); boundary samples count as
/// valleys; same-type neighbours collapse to the more extreme one.
Extrema detect_extrema(const Eigen::Ref<const Eigen::VectorXd>& samples,
                       double prominence_frac = 0.01);

MorphologyClass classify_morphology(const Extrema& ext);

/// Cross-track error of each period against the pointwise mean period:
/// mean perpendicular point-to-polyline distance in (t_index/L, amplitude)
/// coordinates, with the amplitude axis rescaled by the mean raw
/// peak-to-peak so values are comparable across subjects.
CteReport cte_variance(const std::vector<CardiacPeriod>& periods, PeriodChannel which);

}  // namespace cardioid

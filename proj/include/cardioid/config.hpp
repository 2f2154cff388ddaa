#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "cardioid/filters.hpp"
#include "cardioid/identification.hpp"
#include "cardioid/segmentation.hpp"

namespace cardioid {

/// Flat pipeline configuration: every tunable of the processing stages plus
/// run-level settings. JSON loading rejects unknown keys.
struct PipelineConfig {
  WindowPlan plan;             // window_s, stride_s
  FilterOptions filter;        // fl_multiplier, fh_multiplier, butterworth_order
  SegmentationOptions seg;     // period_len, prominence_frac, duration_bounds_s
  int knn_k = 3;
  NnOptions nn;                // nn_* keys
  double tau_percentile = 95.0;
  int grid_cells_per_dim = 32;
  double density_threshold = 0.0;  // <= 0 selects the data-driven default
  int min_subset_periods = 20;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  std::string out_dir = ".";

  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig load(const std::string& path);
  nlohmann::json to_json() const;
};

}  // namespace cardioid

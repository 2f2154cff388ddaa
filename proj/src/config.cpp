#include "cardioid/config.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

namespace cardioid {

namespace {
using json = nlohmann::json;
}

PipelineConfig PipelineConfig::from_json(const json& j) {
  if (!j.is_object()) throw Error(Err::InvalidSpec, "config must be a JSON object");
  PipelineConfig c;
  for (const auto& [k, v] : j.items()) {
    if (k == "window_s") c.plan.window_s = v.get<double>();
    else if (k == "stride_s") c.plan.stride_s = v.get<double>();
    else if (k == "fl_multiplier") c.filter.fl_multiplier = v.get<double>();
    else if (k == "fh_multiplier") c.filter.fh_multiplier = v.get<double>();
    else if (k == "butterworth_order") c.filter.butterworth_order = v.get<int>();
    else if (k == "period_len") c.seg.period_len = v.get<int>();
    else if (k == "prominence_frac") c.seg.prominence_frac = v.get<double>();
    else if (k == "duration_bounds_s") {
      if (!v.is_array() || v.size() != 2)
        throw Error(Err::InvalidSpec, "duration_bounds_s must be [min, max]");
      c.seg.min_duration_s = v[0].get<double>();
      c.seg.max_duration_s = v[1].get<double>();
    }
    else if (k == "knn_k") c.knn_k = v.get<int>();
    else if (k == "nn_epochs") c.nn.epochs = v.get<int>();
    else if (k == "nn_pretrain_epochs") c.nn.pretrain_epochs = v.get<int>();
    else if (k == "nn_lr") c.nn.lr = v.get<double>();
    else if (k == "nn_batch") c.nn.batch = v.get<int>();
    else if (k == "nn_l2") c.nn.l2 = v.get<double>();
    else if (k == "nn_rho") c.nn.rho = v.get<double>();
    else if (k == "nn_beta") c.nn.beta = v.get<double>();
    else if (k == "tau_percentile") c.tau_percentile = v.get<double>();
    else if (k == "grid_cells_per_dim") c.grid_cells_per_dim = v.get<int>();
    else if (k == "density_threshold") c.density_threshold = v.get<double>();
    else if (k == "min_subset_periods") c.min_subset_periods = v.get<int>();
    else if (k == "train_fraction") c.train_fraction = v.get<double>();
    else if (k == "seed") c.seed = v.get<std::uint64_t>();
    else if (k == "out_dir") c.out_dir = v.get<std::string>();
    else throw Error(Err::InvalidSpec, "unknown config key: " + k);
  }
  if (c.plan.stride_s <= 0.0 || c.plan.stride_s > c.plan.window_s)
    throw Error(Err::InvalidSpec, "need 0 < stride_s <= window_s");
  if (c.train_fraction <= 0.0 || c.train_fraction >= 1.0)
    throw Error(Err::InvalidSpec, "train_fraction must lie in (0, 1)");
  return c;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Err::InvalidSpec, "cannot open config " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(Err::InvalidSpec, "invalid JSON in " + path);
  return from_json(j);
}

nlohmann::json PipelineConfig::to_json() const {
  return {{"window_s", plan.window_s},
          {"stride_s", plan.stride_s},
          {"fl_multiplier", filter.fl_multiplier},
          {"fh_multiplier", filter.fh_multiplier},
          {"butterworth_order", filter.butterworth_order},
          {"period_len", seg.period_len},
          {"prominence_frac", seg.prominence_frac},
          {"duration_bounds_s", {seg.min_duration_s, seg.max_duration_s}},
          {"knn_k", knn_k},
          {"nn_epochs", nn.epochs},
          {"nn_pretrain_epochs", nn.pretrain_epochs},
          {"nn_lr", nn.lr},
          {"nn_batch", nn.batch},
          {"nn_l2", nn.l2},
          {"nn_rho", nn.rho},
          {"nn_beta", nn.beta},
          {"tau_percentile", tau_percentile},
          {"grid_cells_per_dim", grid_cells_per_dim},
          {"density_threshold", density_threshold},
          {"min_subset_periods", min_subset_periods},
          {"train_fraction", train_fraction},
          {"seed", seed},
          {"out_dir", out_dir}};
}

}  // namespace cardioid

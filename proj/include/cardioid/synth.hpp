#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cardioid/types.hpp"

namespace cardioid::synth {

struct GaussianBump {
  double center = 0.5;  // relative position within a period, in [0, 1]
  double amplitude = 1.0;
  double width = 0.1;  // Gaussian sigma, in period units
};

struct HeartRate {
  double mean_hz = 1.2;
  double jitter_std = 0.0;  // per-beat std of the instantaneous rate, Hz
};

struct Respiration {
  double amplitude = 0.0;
  double freq_hz = 0.25;
};

struct SyntheticSpec {
  int n_subjects = 1;
  std::vector<HeartRate> heart_rate_hz;                   // one entry per subject
  std::vector<std::vector<GaussianBump>> pulse_template;  // one template per subject
  Respiration respiration;
  double pressure_drift_std = 0.0;  // random-walk std per second
  double noise_std = 0.0;
  double duration_s = 60.0;
  double sample_rate_hz = 100.0;
  std::uint64_t seed = 0;

  void validate() const;  // throws Error(Err::InvalidSpec)

  static SyntheticSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  static SyntheticSpec load(const std::string& path);
};

std::vector<PpgSignal> generate_synthetic(const SyntheticSpec& spec);

// Pulse templates tuned so the full pipeline (adaptive filter + second
// derivative + extrema count) lands each one in the named class; the
// two-bump shape falls outside all three and gets discarded.
std::vector<GaussianBump> template_m1();
std::vector<GaussianBump> template_m2();
std::vector<GaussianBump> template_m3();
std::vector<GaussianBump> template_two_bump();

// Uniform spec over n subjects cycling through the three templates;
// convenient starting point for benchmarks and tests.
SyntheticSpec default_spec(int n_subjects, double duration_s, std::uint64_t seed);

}  // namespace cardioid::synth

#pragma once

#include <Eigen/Dense>

#include <vector>

#include "cardioid/types.hpp"

namespace cardioid {

struct WindowPlan {
  double window_s = 5.0;
  double stride_s = 1.0;
};

struct BandSpec {
  double f_low_hz = 0.0;
  double f_high_hz = 0.0;
};

struct HarmonicEstimate {
  double f1h_hz = 0.0;        // heart-rate fundamental, clamped to [0.5, 3.0] Hz
  double window_start_s = 0.0;
  Eigen::VectorXd spec_freq_hz;
  Eigen::VectorXd spec_power;
};

struct FilterOptions {
  double fl_multiplier = 2.0;
  double fh_multiplier = 5.5;
  int butterworth_order = 2;
};

/// Digital IIR transfer function, a[0] normalized to 1.
struct IirCoeffs {
  Eigen::VectorXd b;
  Eigen::VectorXd a;
};

/// Band-pass Butterworth of the given analog prototype order, discretized by
/// bilinear transform with frequency pre-warping. The digital filter has
/// order 2*order.
IirCoeffs butterworth_bandpass_design(const BandSpec& band, double sample_rate_hz, int order = 2);

/// Single forward pass from zero initial state.
Eigen::VectorXd iir_filter(const IirCoeffs& c, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Forward-backward (zero-phase) filtering with odd-reflection edge padding
/// and steady-state initial conditions.
Eigen::VectorXd filtfilt(const IirCoeffs& c, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Zero-phase Butterworth band-pass. Output has the same length and rate.
PpgSignal butterworth_bandpass(const PpgSignal& sig, const BandSpec& band, int order = 2);

/// Fixed-band baseline filter, 0.5-12.5 Hz; the f(t) reference signal.
PpgSignal soa_filter(const PpgSignal& sig);

/// Per-subject band derived from the first harmonic.
BandSpec adaptive_band(double f1h_hz, const FilterOptions& opts = {});

/// First-harmonic estimate per sliding window (one per stride position).
std::vector<HarmonicEstimate> estimate_f1h(const PpgSignal& sig, const WindowPlan& plan = {});

/// Adaptive per-window band-pass producing h(t): each stride-aligned output
/// segment is filtered with the band of its enclosing window; segments are
/// cross-faded over 0.1 s.
PpgSignal harmonic_filter(const PpgSignal& sig, const WindowPlan& plan = {},
                          const FilterOptions& opts = {});
PpgSignal harmonic_filter(const PpgSignal& sig, const std::vector<HarmonicEstimate>& estimates,
                          const WindowPlan& plan = {}, const FilterOptions& opts = {});

/// Central second difference scaled by rate^2; endpoints replicated.
PpgSignal second_derivative(const PpgSignal& sig);

}  // namespace cardioid

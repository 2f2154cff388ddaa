#pragma once

#include <string>
#include <vector>

#include "cardioid/types.hpp"

namespace cardioid {

enum class SignalFormat { Csv, Jsonl };

/// Load a signal from disk.
///
/// CSV: either a first line `sample_rate_hz=<float>` followed by one value
/// per row, or two columns `t_seconds,value`. JSONL: one {"t":..., "v":...}
/// object per line. Non-uniform timestamps are resampled to the median rate
/// by linear interpolation.
PpgSignal load_signal(const std::string& path, SignalFormat fmt);

/// Infer the format from the file extension (.jsonl -> Jsonl, else Csv).
SignalFormat format_from_path(const std::string& path);

void save_signal_csv(const PpgSignal& sig, const std::string& path);

struct FrameIngestResult {
  PpgSignal signal;
  int dropout_frames = 0;  // frames with zero selected pixels (held last value)
};

/// Collapse decoded camera frames into a PPG trace: per frame, average the
/// red channel over pixels with red > 0.8*(red+green+blue).
FrameIngestResult frames_to_signal(const std::vector<RgbFrame>& frames, double fps);

}  // namespace cardioid

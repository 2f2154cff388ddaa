#include "cardioid/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cardioid {

namespace {

// Catmull-Rom interpolation at fractional position p into x.
double cubic_at(const Eigen::Ref<const Eigen::VectorXd>& x, double p) {
  const auto n = x.size();
  const auto i = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor(p)), 0, n - 1);
  const double t = p - static_cast<double>(i);
  auto at = [&](Eigen::Index k) { return x[std::clamp<Eigen::Index>(k, 0, n - 1)]; };
  const double p0 = at(i - 1), p1 = at(i), p2 = at(i + 1), p3 = at(i + 2);
  return 0.5 * (2.0 * p1 + (-p0 + p2) * t + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t +
                (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t * t * t);
}

Eigen::VectorXd resample_segment(const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Index from,
                                 Eigen::Index to_inclusive, int out_len) {
  const double span = static_cast<double>(to_inclusive - from);
  Eigen::VectorXd out(out_len);
  for (int u = 0; u < out_len; ++u) {
    const double p =
        static_cast<double>(from) + span * static_cast<double>(u) / static_cast<double>(out_len - 1);
    out[u] = cubic_at(x, p);
  }
  return out;
}

// Topographic prominence of a local maximum: height above the higher of the
// two key saddles, where each saddle is the lowest sample between the peak
// and the nearest higher ground (or the signal edge).
double prominence_at(const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Index peak) {
  const auto n = x.size();
  double left_min = x[peak];
  for (Eigen::Index i = peak - 1; i >= 0; --i) {
    if (x[i] > x[peak]) break;
    left_min = std::min(left_min, x[i]);
  }
  double right_min = x[peak];
  for (Eigen::Index i = peak + 1; i < n; ++i) {
    if (x[i] > x[peak]) break;
    right_min = std::min(right_min, x[i]);
  }
  return x[peak] - std::max(left_min, right_min);
}

struct Candidate {
  Eigen::Index idx;
  double value;
  bool is_peak;
  bool boundary;
};

}  // namespace

std::string to_string(MorphologyClass m) {
  switch (m) {
    case MorphologyClass::M1: return "M1";
    case MorphologyClass::M2: return "M2";
    case MorphologyClass::M3: return "M3";
    case MorphologyClass::Discard: return "discard";
  }
  return "discard";
}

Extrema detect_extrema(const Eigen::Ref<const Eigen::VectorXd>& samples, double prominence_frac) {
  const auto n = samples.size();
  if (n < 5) throw Error(Err::MalformedInput, "segment too short for extrema detection");

  const double range = samples.maxCoeff() - samples.minCoeff();
  const double min_prom = prominence_frac * range;

  std::vector<Candidate> cand;
  cand.push_back({0, samples[0], false, true});

  // interior sign-change extrema; plateaus resolve to their midpoint
  Eigen::Index i = 1;
  while (i + 1 < n) {
    if (samples[i] == samples[i + 1]) {
      Eigen::Index j = i;
      while (j + 1 < n && samples[j + 1] == samples[j]) ++j;
      if (j + 1 < n) {
        const double before = samples[i - 1], after = samples[j + 1];
        const Eigen::Index mid = (i + j) / 2;
        if (before < samples[i] && after < samples[i]) cand.push_back({mid, samples[mid], true, false});
        if (before > samples[i] && after > samples[i]) cand.push_back({mid, samples[mid], false, false});
      }
      i = j + 1;
      continue;
    }
    const double d0 = samples[i] - samples[i - 1];
    const double d1 = samples[i + 1] - samples[i];
    if (d0 > 0.0 && d1 < 0.0) cand.push_back({i, samples[i], true, false});
    if (d0 < 0.0 && d1 > 0.0) cand.push_back({i, samples[i], false, false});
    ++i;
  }
  cand.push_back({n - 1, samples[n - 1], false, true});

  // prune by prominence (valleys measured on the flipped signal)
  if (range > 0.0) {
    const Eigen::VectorXd flipped = -samples;
    std::erase_if(cand, [&](const Candidate& c) {
      if (c.boundary) return false;
      const double prom =
          c.is_peak ? prominence_at(samples, c.idx) : prominence_at(flipped, c.idx);
      return prom < min_prom;
    });
  } else {
    std::erase_if(cand, [](const Candidate& c) { return !c.boundary; });
  }

  // collapse same-type neighbours to the more extreme one until the
  // sequence strictly interleaves; boundary valleys always survive
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t k = 0; k + 1 < cand.size(); ++k) {
      if (cand[k].is_peak != cand[k + 1].is_peak) continue;
      std::size_t drop;
      if (cand[k].boundary) {
        drop = k + 1;
      } else if (cand[k + 1].boundary) {
        drop = k;
      } else if (cand[k].is_peak) {
        drop = cand[k].value >= cand[k + 1].value ? k + 1 : k;
      } else {
        drop = cand[k].value <= cand[k + 1].value ? k + 1 : k;
      }
      cand.erase(cand.begin() + static_cast<std::ptrdiff_t>(drop));
      changed = true;
      break;
    }
  }

  Extrema ext;
  for (const auto& c : cand) {
    if (c.is_peak) ext.peaks.emplace_back(c.idx, c.value);
    else ext.valleys.emplace_back(c.idx, c.value);
  }
  return ext;
}

MorphologyClass classify_morphology(const Extrema& ext) {
  const auto p = ext.peaks.size(), v = ext.valleys.size();
  if (p == 3 && v == 4) return MorphologyClass::M1;
  if (p == 4 && v == 5) return MorphologyClass::M2;
  if (p == 5 && v == 6) return MorphologyClass::M3;
  return MorphologyClass::Discard;
}

std::vector<CardiacPeriod> segment_periods(const PpgSignal& h, const PpgSignal& h2,
                                           const std::vector<HarmonicEstimate>& f1h_per_window,
                                           const WindowPlan& plan,
                                           const SegmentationOptions& opts) {
  h.validate();
  h2.validate();
  if (h.samples.size() != h2.samples.size() || h.sample_rate_hz != h2.sample_rate_hz)
    throw Error(Err::DimensionMismatch, "h and h'' must share length and rate");
  if (f1h_per_window.empty())
    throw Error(Err::MalformedInput, "need at least one harmonic estimate");
  if (opts.period_len < 5) throw Error(Err::MalformedInput, "period_len too small");

  const auto n = h.samples.size();
  const double rate = h.sample_rate_hz;

  auto expected_period = [&](Eigen::Index at) {
    const double t = static_cast<double>(at) / rate;
    double best = std::numeric_limits<double>::max();
    double f1h = f1h_per_window.front().f1h_hz;
    for (const auto& est : f1h_per_window) {
      const double d = std::abs(est.window_start_s + 0.5 * plan.window_s - t);
      if (d < best) {
        best = d;
        f1h = est.f1h_hz;
      }
    }
    return 1.0 / f1h;
  };

  auto deepest_in = [&](Eigen::Index lo, Eigen::Index hi) {  // inclusive range
    Eigen::Index best = lo;
    for (Eigen::Index i = lo + 1; i <= hi; ++i)
      if (h.samples[i] < h.samples[best]) best = i;
    return best;
  };

  std::vector<Eigen::Index> bounds;
  {
    const double te = expected_period(0);
    const auto hi = std::min<Eigen::Index>(static_cast<Eigen::Index>(1.25 * te * rate), n - 1);
    bounds.push_back(deepest_in(0, hi));
  }
  while (true) {
    const Eigen::Index prev = bounds.back();
    const double te = expected_period(prev);
    const auto lo = prev + static_cast<Eigen::Index>(0.75 * te * rate);
    const auto hi = prev + static_cast<Eigen::Index>(1.25 * te * rate);
    if (lo >= n - 1) break;
    bounds.push_back(deepest_in(lo, std::min(hi, n - 1)));
  }

  std::vector<CardiacPeriod> periods;
  for (std::size_t k = 0; k + 1 < bounds.size(); ++k) {
    const Eigen::Index a = bounds[k], b = bounds[k + 1];
    const double dur = static_cast<double>(b - a) / rate;
    if (dur < opts.min_duration_s || dur > opts.max_duration_s) continue;

    CardiacPeriod p;
    p.raw_start_idx = a;
    p.raw_end_idx = b;
    p.duration_s = dur;
    p.subject_id = h.subject_id;
    p.h_samples = resample_segment(h.samples, a, b, opts.period_len);
    p.h2_samples = resample_segment(h2.samples, a, b, opts.period_len);

    p.h_scale = p.h_samples.maxCoeff() - p.h_samples.minCoeff();
    p.h2_scale = p.h2_samples.maxCoeff() - p.h2_samples.minCoeff();
    if (p.h_scale <= 0.0 || p.h2_scale <= 0.0) continue;  // constant segment
    p.h_samples = (p.h_samples.array() - p.h_samples.minCoeff()) / p.h_scale;
    p.h2_samples = (p.h2_samples.array() - p.h2_samples.minCoeff()) / p.h2_scale;
    periods.push_back(std::move(p));
  }

  if (periods.empty()) throw Error(Err::NoPeriodsFound, "no cardiac periods detected");
  return periods;
}

CteReport cte_variance(const std::vector<CardiacPeriod>& periods, PeriodChannel which) {
  if (periods.size() < 2) throw Error(Err::TooFewPeriods, "need at least 2 periods");

  auto arr = [&](const CardiacPeriod& p) -> const Eigen::VectorXd& {
    return which == PeriodChannel::H ? p.h_samples : p.h2_samples;
  };
  auto scale_of = [&](const CardiacPeriod& p) {
    return which == PeriodChannel::H ? p.h_scale : p.h2_scale;
  };

  const auto L = arr(periods.front()).size();
  for (const auto& p : periods)
    if (arr(p).size() != L) throw Error(Err::DimensionMismatch, "period lengths differ");

  CteReport rep;
  rep.mean_period = Eigen::VectorXd::Zero(L);
  double scale = 0.0;
  for (const auto& p : periods) {
    rep.mean_period += arr(p);
    scale += scale_of(p);
  }
  rep.mean_period /= static_cast<double>(periods.size());
  scale /= static_cast<double>(periods.size());

  // polyline of the mean period in (t, amplitude) coordinates
  const double dx = 1.0 / static_cast<double>(L);
  Eigen::VectorXd my = rep.mean_period * scale;

  auto seg_dist = [&](double px, double py, Eigen::Index s) {
    const double ax = static_cast<double>(s) * dx, ay = my[s];
    const double bx = static_cast<double>(s + 1) * dx, by = my[s + 1];
    const double vx = bx - ax, vy = by - ay;
    const double t = std::clamp(((px - ax) * vx + (py - ay) * vy) / (vx * vx + vy * vy), 0.0, 1.0);
    const double ex = ax + t * vx - px, ey = ay + t * vy - py;
    return std::sqrt(ex * ex + ey * ey);
  };

  for (const auto& p : periods) {
    const Eigen::VectorXd y = arr(p) * scale;
    double acc = 0.0;
    for (Eigen::Index j = 0; j < L; ++j) {
      const double px = static_cast<double>(j) * dx, py = y[j];
      double best = std::numeric_limits<double>::max();
      for (Eigen::Index s = 0; s + 1 < L; ++s) best = std::min(best, seg_dist(px, py, s));
      acc += best;
    }
    rep.per_period_cte.push_back(acc / static_cast<double>(L));
  }

  double sum = 0.0;
  for (double e : rep.per_period_cte) sum += std::abs(e);
  rep.signal_variance = sum / static_cast<double>(rep.per_period_cte.size());
  return rep;
}

}  // namespace cardioid

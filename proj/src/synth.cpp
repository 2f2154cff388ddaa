#include "cardioid/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>

#include "cardioid/rng.hpp"

namespace cardioid::synth {

namespace {

using json = nlohmann::json;

double template_value(const std::vector<GaussianBump>& bumps, double phase) {
  double v = 0.0;
  for (const auto& b : bumps) {
    const double z = (phase - b.center) / b.width;
    v += b.amplitude * std::exp(-0.5 * z * z);
  }
  return v;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(Err::InvalidSpec, what);
}

GaussianBump bump_from_json(const json& j) {
  GaussianBump b;
  if (j.is_array() && j.size() == 3) {
    b.center = j[0].get<double>();
    b.amplitude = j[1].get<double>();
    b.width = j[2].get<double>();
    return b;
  }
  require(j.is_object(), "pulse_template bump must be an object or [center,amplitude,width]");
  for (const auto& [k, v] : j.items()) {
    if (k == "center") b.center = v.get<double>();
    else if (k == "amplitude") b.amplitude = v.get<double>();
    else if (k == "width") b.width = v.get<double>();
    else require(false, "unknown bump key: " + k);
  }
  return b;
}

std::vector<GaussianBump> bumps_from_json(const json& j) {
  require(j.is_array() && !j.empty(), "pulse_template entry must be a non-empty array");
  std::vector<GaussianBump> out;
  out.reserve(j.size());
  for (const auto& e : j) out.push_back(bump_from_json(e));
  return out;
}

}  // namespace

void SyntheticSpec::validate() const {
  require(n_subjects >= 1, "n_subjects must be positive");
  require(heart_rate_hz.size() == static_cast<std::size_t>(n_subjects),
          "heart_rate_hz needs one entry per subject");
  require(pulse_template.size() == static_cast<std::size_t>(n_subjects),
          "pulse_template needs one entry per subject");
  for (const auto& hr : heart_rate_hz) {
    require(hr.mean_hz >= 0.5 && hr.mean_hz <= 3.0, "heart rate mean must lie in [0.5, 3.0] Hz");
    require(hr.jitter_std >= 0.0, "jitter std must be non-negative");
  }
  for (const auto& bumps : pulse_template) {
    require(!bumps.empty(), "each pulse template needs at least one bump");
    for (const auto& b : bumps) {
      require(b.center >= 0.0 && b.center <= 1.0, "bump center must lie in [0, 1]");
      require(b.width > 0.0 && std::isfinite(b.width), "bump width must be positive");
      require(std::isfinite(b.amplitude), "bump amplitude must be finite");
    }
  }
  require(respiration.amplitude >= 0.0, "respiration amplitude must be non-negative");
  require(respiration.freq_hz >= 0.0, "respiration frequency must be non-negative");
  require(pressure_drift_std >= 0.0, "pressure drift std must be non-negative");
  require(noise_std >= 0.0, "noise std must be non-negative");
  require(duration_s > 0.0, "duration must be positive");
  require(sample_rate_hz > 0.0, "sample rate must be positive");
}

SyntheticSpec SyntheticSpec::from_json(const json& j) {
  require(j.is_object(), "spec must be a JSON object");
  SyntheticSpec s;
  for (const auto& [k, v] : j.items()) {
    if (k == "n_subjects") {
      s.n_subjects = v.get<int>();
    } else if (k == "heart_rate_hz") {
      auto one = [&](const json& e) {
        HeartRate hr;
        require(e.is_object(), "heart_rate_hz entries must be objects");
        for (const auto& [hk, hv] : e.items()) {
          if (hk == "mean") hr.mean_hz = hv.get<double>();
          else if (hk == "jitter_std") hr.jitter_std = hv.get<double>();
          else require(false, "unknown heart_rate_hz key: " + hk);
        }
        return hr;
      };
      if (v.is_array()) {
        for (const auto& e : v) s.heart_rate_hz.push_back(one(e));
      } else {
        s.heart_rate_hz.push_back(one(v));  // shared across subjects
      }
    } else if (k == "pulse_template") {
      require(v.is_array() && !v.empty(), "pulse_template must be a non-empty array");
      if (v.front().is_array() && !v.front().empty() && !v.front().front().is_number()) {
        for (const auto& e : v) s.pulse_template.push_back(bumps_from_json(e));
      } else if (v.front().is_array() || v.front().is_object()) {
        s.pulse_template.push_back(bumps_from_json(v));  // shared across subjects
      } else {
        require(false, "pulse_template must be bumps or a per-subject list of bumps");
      }
    } else if (k == "respiration") {
      require(v.is_object(), "respiration must be an object");
      for (const auto& [rk, rv] : v.items()) {
        if (rk == "amplitude") s.respiration.amplitude = rv.get<double>();
        else if (rk == "freq_hz") s.respiration.freq_hz = rv.get<double>();
        else require(false, "unknown respiration key: " + rk);
      }
    } else if (k == "pressure_drift_std") {
      s.pressure_drift_std = v.get<double>();
    } else if (k == "noise_std") {
      s.noise_std = v.get<double>();
    } else if (k == "duration_s") {
      s.duration_s = v.get<double>();
    } else if (k == "sample_rate_hz") {
      s.sample_rate_hz = v.get<double>();
    } else if (k == "seed") {
      s.seed = v.get<std::uint64_t>();
    } else {
      require(false, "unknown spec key: " + k);
    }
  }
  // broadcast shared entries to every subject
  if (s.heart_rate_hz.size() == 1 && s.n_subjects > 1)
    s.heart_rate_hz.resize(static_cast<std::size_t>(s.n_subjects), s.heart_rate_hz.front());
  if (s.pulse_template.size() == 1 && s.n_subjects > 1)
    s.pulse_template.resize(static_cast<std::size_t>(s.n_subjects), s.pulse_template.front());
  s.validate();
  return s;
}

json SyntheticSpec::to_json() const {
  json hr = json::array();
  for (const auto& h : heart_rate_hz)
    hr.push_back({{"mean", h.mean_hz}, {"jitter_std", h.jitter_std}});
  json tmpl = json::array();
  for (const auto& bumps : pulse_template) {
    json bl = json::array();
    for (const auto& b : bumps)
      bl.push_back({{"center", b.center}, {"amplitude", b.amplitude}, {"width", b.width}});
    tmpl.push_back(bl);
  }
  return {{"n_subjects", n_subjects},
          {"heart_rate_hz", hr},
          {"pulse_template", tmpl},
          {"respiration", {{"amplitude", respiration.amplitude}, {"freq_hz", respiration.freq_hz}}},
          {"pressure_drift_std", pressure_drift_std},
          {"noise_std", noise_std},
          {"duration_s", duration_s},
          {"sample_rate_hz", sample_rate_hz},
          {"seed", seed}};
}

SyntheticSpec SyntheticSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Err::InvalidSpec, "cannot open " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(Err::InvalidSpec, "invalid JSON in " + path);
  return from_json(j);
}

std::vector<PpgSignal> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();

  const double rate = spec.sample_rate_hz;
  const auto n = static_cast<Eigen::Index>(std::llround(spec.duration_s * rate));
  if (n < 2) throw Error(Err::InvalidSpec, "duration too short for the sample rate");

  int id_width = 2;
  for (int v = spec.n_subjects; v >= 100; v /= 10) ++id_width;

  std::vector<PpgSignal> out;
  out.reserve(static_cast<std::size_t>(spec.n_subjects));

  for (int subj = 0; subj < spec.n_subjects; ++subj) {
    // independent per-subject substream so adding subjects never perturbs
    // earlier ones
    std::seed_seq seq{static_cast<std::uint64_t>(spec.seed),
                      static_cast<std::uint64_t>(subj) + 1};
    std::mt19937_64 gen(seq);
    auto gauss = [&gen] { return rng::gaussian(gen); };

    const HeartRate& hr = spec.heart_rate_hz[static_cast<std::size_t>(subj)];
    const auto& bumps = spec.pulse_template[static_cast<std::size_t>(subj)];

    // beat onsets from one beat before t=0 (edge bumps would otherwise be
    // truncated at the first boundary) to one past the end
    std::vector<double> onset, period;
    auto draw_period = [&] {
      const double f = std::clamp(hr.mean_hz + hr.jitter_std * gauss(), 0.4, 3.5);
      return 1.0 / f;
    };
    period.push_back(draw_period());
    onset.push_back(-period.front());
    while (onset.back() + period.back() < spec.duration_s + 1.0) {
      onset.push_back(onset.back() + period.back());
      period.push_back(draw_period());
    }

    const double drift_step = spec.pressure_drift_std / std::sqrt(rate);
    double drift = 0.0;
    std::size_t beat = 0;

    Eigen::VectorXd x(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / rate;
      while (beat + 1 < onset.size() && onset[beat + 1] <= t) ++beat;

      // sum the current beat and its neighbours so bump tails overlap
      // smoothly across boundaries
      double v = 0.0;
      for (std::size_t b = (beat == 0 ? 0 : beat - 1);
           b < std::min(beat + 2, onset.size()); ++b) {
        const double phase = (t - onset[b]) / period[b];
        if (phase > -0.5 && phase < 1.5) v += template_value(bumps, phase);
      }

      if (spec.respiration.amplitude > 0.0)
        v += spec.respiration.amplitude *
             std::sin(2.0 * std::numbers::pi * spec.respiration.freq_hz * t);
      if (spec.pressure_drift_std > 0.0) {
        drift += drift_step * gauss();
        v += drift;
      }
      if (spec.noise_std > 0.0) v += spec.noise_std * gauss();
      x[i] = v;
    }

    PpgSignal sig;
    sig.samples = std::move(x);
    sig.sample_rate_hz = rate;
    std::string id = std::to_string(subj + 1);
    if (static_cast<int>(id.size()) < id_width)
      id.insert(0, static_cast<std::size_t>(id_width) - id.size(), '0');
    sig.subject_id = "s" + id;
    out.push_back(std::move(sig));
  }
  return out;
}

// The template shapes below are tuned through the actual filter chain: the
// adaptive band keeps harmonics 2..5 of the pulse train, and the second
// derivative weighs harmonic k by k^2, so the number of curvature bumps per
// period is controlled by which harmonics the bump layout feeds. A full comb
// of k equal bumps spaced 1/k apart contributes only harmonics that are
// multiples of k (the partial sums cancel by symmetry), which makes the comb
// amplitude a clean dial for one target harmonic without disturbing the
// fundamental that the per-window rate estimator locks onto.

std::vector<GaussianBump> template_m1() {
  // systolic + dicrotic pair; the pair spacing leaves harmonic 3 dominant
  // after filtering, giving three curvature bumps per period
  return {{0.28, 1.00, 0.10}, {0.66, 0.38, 0.13}};
}

std::vector<GaussianBump> template_m2() {
  // same pair plus a 4-comb that plants the fourth harmonic
  return {{0.28, 1.00, 0.11}, {0.64, 0.30, 0.15},
          {0.04, 0.06, 0.05}, {0.29, 0.06, 0.05},
          {0.54, 0.06, 0.05}, {0.79, 0.06, 0.05}};
}

std::vector<GaussianBump> template_m3() {
  // steeper pair plus a thin 5-comb for the fifth harmonic
  return {{0.25, 1.00, 0.12},  {0.66, 0.38, 0.14},  {0.08, 0.05, 0.032},
          {0.28, 0.05, 0.032}, {0.48, 0.05, 0.032}, {0.68, 0.05, 0.032},
          {0.88, 0.05, 0.032}};
}

std::vector<GaussianBump> template_two_bump() {
  // a subject whose second derivative shows only two bumps, so every period
  // should be discarded: the width/amplitude ratio of the main pair cancels
  // harmonic 3 exactly (0.15*exp(-18*pi^2*0.15^2) = 0.491*0.13*exp(-18*pi^2
  // *0.13^2)), and the half-period twin pair reinforces harmonic 2 without
  // touching odd harmonics, burying noise below the extrema-prominence gate
  return {{0.30, 1.00, 0.15}, {0.82, 0.491, 0.13},
          {0.15, 0.40, 0.13}, {0.65, 0.40, 0.13}};
}

SyntheticSpec default_spec(int n_subjects, double duration_s, std::uint64_t seed) {
  SyntheticSpec s;
  s.n_subjects = n_subjects;
  s.duration_s = duration_s;
  s.sample_rate_hz = 100.0;
  s.seed = seed;
  const std::vector<std::vector<GaussianBump>> tmpl = {template_m1(), template_m2(),
                                                       template_m3()};
  for (int i = 0; i < n_subjects; ++i) {
    // spread heart rates so subjects are separable and bands differ
    HeartRate hr;
    hr.mean_hz = 0.9 + 0.13 * static_cast<double>(i % 9);
    hr.jitter_std = 0.01;
    s.heart_rate_hz.push_back(hr);
    // rotate the three morphology templates; subjects beyond the first three
    // get the dicrotic bump slightly scaled (and, where the class tolerates
    // it, shifted) so every subject has a distinct waveform while keeping its
    // morphology class — the 5-harmonic comb is phase-sensitive, so the
    // third template only takes the amplitude change
    auto bumps = tmpl[static_cast<std::size_t>(i) % tmpl.size()];
    const double tier = static_cast<double>(i / 3 % 3);
    bumps[1].amplitude *= 1.0 - 0.12 * tier;
    if (i % 3 != 2) bumps[1].center += 0.015 * tier;
    s.pulse_template.push_back(std::move(bumps));
  }
  s.respiration = {0.03, 0.25};
  s.pressure_drift_std = 0.005;
  s.noise_std = 0.002;
  s.validate();
  return s;
}

}  // namespace cardioid::synth

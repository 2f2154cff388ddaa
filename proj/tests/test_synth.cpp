#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include <nlohmann/json.hpp>

#include "cardioid/fft.hpp"
#include "cardioid/synth.hpp"

using namespace cardioid;
using namespace cardioid::synth;

namespace {

// Single-subject spec with everything stochastic switched off.
SyntheticSpec clean_spec(double hr, std::uint64_t seed = 0) {
  SyntheticSpec s;
  s.n_subjects = 1;
  s.heart_rate_hz = {{hr, 0.0}};
  s.pulse_template = {template_m1()};
  s.duration_s = 30.0;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("spec validation rejects inconsistent generators") {
  SyntheticSpec ok = clean_spec(1.2);
  CHECK_NOTHROW(ok.validate());

  SyntheticSpec s = ok;
  s.n_subjects = 0;
  CHECK_THROWS_AS(s.validate(), Error);

  s = ok;
  s.heart_rate_hz.push_back({1.0, 0.0});  // one entry too many
  CHECK_THROWS_AS(s.validate(), Error);

  s = ok;
  s.heart_rate_hz[0].mean_hz = 4.0;  // outside the estimator's range
  CHECK_THROWS_AS(s.validate(), Error);

  s = ok;
  s.pulse_template[0].clear();
  CHECK_THROWS_AS(s.validate(), Error);

  s = ok;
  s.pulse_template[0][0].width = 0.0;
  CHECK_THROWS_AS(s.validate(), Error);

  s = ok;
  s.noise_std = -0.1;
  CHECK_THROWS_AS(s.validate(), Error);

  s = ok;
  s.duration_s = 0.0;
  CHECK_THROWS_AS(s.validate(), Error);
}

TEST_CASE("generation is deterministic in the seed") {
  SyntheticSpec spec = default_spec(3, 20.0, 99);
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  REQUIRE(a.size() == 3);
  REQUIRE(b.size() == 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].subject_id == b[i].subject_id);
    CHECK((a[i].samples - b[i].samples).cwiseAbs().maxCoeff() == 0.0);
  }

  spec.seed = 100;
  const auto c = generate_synthetic(spec);
  CHECK((a[0].samples - c[0].samples).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("subjects get distinct ids, the requested length and rate") {
  const auto sigs = generate_synthetic(default_spec(5, 12.5, 4));
  REQUIRE(sigs.size() == 5);
  std::set<std::string> ids;
  for (const auto& s : sigs) {
    CHECK_FALSE(s.subject_id.empty());
    ids.insert(s.subject_id);
    CHECK(s.sample_rate_hz == doctest::Approx(100.0));
    CHECK(s.duration_s() == doctest::Approx(12.5).epsilon(0.01));
    CHECK(s.samples.allFinite());
  }
  CHECK(ids.size() == 5);  // no collisions
}

TEST_CASE("a jitter-free subject repeats its beat exactly") {
  // HR 1.25 Hz at 100 Hz sampling: the beat spans exactly 80 samples, so the
  // noiseless trace must be 80-periodic away from the boundary
  const auto sigs = generate_synthetic(clean_spec(1.25));
  const auto& x = sigs[0].samples;
  double max_diff = 0.0;
  for (Eigen::Index i = 200; i + 80 < x.size() - 200; ++i)
    max_diff = std::max(max_diff, std::abs(x[i + 80] - x[i]));
  CHECK(max_diff < 1e-9 * (x.maxCoeff() - x.minCoeff()));
}

TEST_CASE("the spectral fundamental sits at the configured heart rate") {
  for (const double hr : {0.9, 1.3, 1.8, 2.4}) {
    const auto sigs = generate_synthetic(clean_spec(hr));
    const auto p = dsp::periodogram(sigs[0].samples, 100.0);
    Eigen::Index peak = 0;
    p.power.maxCoeff(&peak);
    CHECK(p.freq_hz[peak] == doctest::Approx(hr).epsilon(0.05));
  }
}

TEST_CASE("respiration adds low-frequency power where requested") {
  SyntheticSpec base = clean_spec(1.2, 7);
  SyntheticSpec resp = base;
  resp.respiration = {0.5, 0.3};

  const auto quiet = generate_synthetic(base)[0];
  const auto breathing = generate_synthetic(resp)[0];

  const auto pq = dsp::periodogram(quiet.samples, 100.0);
  const auto pb = dsp::periodogram(breathing.samples, 100.0);
  CHECK(dsp::band_power(pb, 0.2, 0.4) > 100.0 * dsp::band_power(pq, 0.2, 0.4) + 1e-12);
}

TEST_CASE("heart-rate jitter perturbs beat spacing") {
  SyntheticSpec jit = clean_spec(1.25, 3);
  jit.heart_rate_hz[0].jitter_std = 0.05;
  const auto sigs = generate_synthetic(jit);
  const auto& x = sigs[0].samples;
  // the exact 80-sample periodicity of the clean trace must now be broken
  double max_diff = 0.0;
  for (Eigen::Index i = 200; i + 80 < x.size() - 200; ++i)
    max_diff = std::max(max_diff, std::abs(x[i + 80] - x[i]));
  CHECK(max_diff > 1e-3 * (x.maxCoeff() - x.minCoeff()));
}

TEST_CASE("noise and drift raise out-of-template variance") {
  SyntheticSpec noisy = clean_spec(1.2, 5);
  noisy.noise_std = 0.05;
  const auto clean = generate_synthetic(clean_spec(1.2, 5))[0];
  const auto dirty = generate_synthetic(noisy)[0];
  const Eigen::VectorXd resid = dirty.samples - clean.samples;
  const double sd = std::sqrt(resid.squaredNorm() / static_cast<double>(resid.size()));
  CHECK(sd == doctest::Approx(0.05).epsilon(0.1));
}

TEST_CASE("bundled templates describe plausible pulses") {
  for (const auto& tpl : {template_m1(), template_m2(), template_m3(), template_two_bump()}) {
    REQUIRE_FALSE(tpl.empty());
    for (const auto& b : tpl) {
      CHECK(b.center >= 0.0);
      CHECK(b.center <= 1.0);
      CHECK(b.width > 0.0);
      CHECK(std::isfinite(b.amplitude));
    }
    // the main wave dominates
    CHECK(tpl.front().amplitude == doctest::Approx(1.0));
  }
}

TEST_CASE("default spec covers the three morphologies and validates") {
  const SyntheticSpec spec = default_spec(9, 45.0, 17);
  CHECK_NOTHROW(spec.validate());
  CHECK(spec.n_subjects == 9);
  CHECK(spec.duration_s == doctest::Approx(45.0));
  CHECK(spec.seed == 17);
  // heart rates spread out so subjects are separable by rate alone
  std::set<double> rates;
  for (const auto& hr : spec.heart_rate_hz) {
    rates.insert(hr.mean_hz);
    CHECK(hr.mean_hz >= 0.5);
    CHECK(hr.mean_hz <= 3.0);
  }
  CHECK(rates.size() == 9);
}

TEST_CASE("spec JSON round-trip preserves every field") {
  SyntheticSpec spec = default_spec(2, 15.0, 123);
  spec.respiration = {0.04, 0.21};
  spec.pressure_drift_std = 0.007;
  spec.noise_std = 0.003;
  const SyntheticSpec back = SyntheticSpec::from_json(spec.to_json());
  CHECK(back.to_json() == spec.to_json());
  CHECK(back.n_subjects == 2);
  CHECK(back.heart_rate_hz[1].mean_hz == doctest::Approx(spec.heart_rate_hz[1].mean_hz));
  CHECK(back.pulse_template[1].size() == spec.pulse_template[1].size());
  CHECK(back.respiration.amplitude == doctest::Approx(0.04));
  CHECK(back.pressure_drift_std == doctest::Approx(0.007));
  CHECK(back.seed == 123);
}

TEST_CASE("unknown spec keys are rejected") {
  nlohmann::json j = default_spec(1, 10.0, 0).to_json();
  j["n_subject"] = 1;  // typo'd key
  CHECK_THROWS_AS(SyntheticSpec::from_json(j), Error);
}

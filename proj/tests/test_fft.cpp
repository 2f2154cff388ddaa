#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "cardioid/fft.hpp"
#include "cardioid/rng.hpp"

using namespace cardioid;

namespace {

// O(n^2) discrete Fourier transform, written independently of the radix-2
// code so the two can disagree.
std::vector<std::complex<double>> naive_dft(const std::vector<std::complex<double>>& x,
                                            bool inverse) {
  const std::size_t n = x.size();
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double ang = sign * 2.0 * std::numbers::pi * static_cast<double>(k * j) /
                         static_cast<double>(n);
      acc += x[j] * std::polar(1.0, ang);
    }
    out[k] = inverse ? acc / static_cast<double>(n) : acc;
  }
  return out;
}

std::vector<std::complex<double>> random_complex(std::size_t n, std::mt19937_64& g) {
  std::vector<std::complex<double>> v(n);
  for (auto& z : v) z = {2.0 * rng::uniform01(g) - 1.0, 2.0 * rng::uniform01(g) - 1.0};
  return v;
}

}  // namespace

TEST_CASE("next_pow2 rounds up to the nearest power of two") {
  CHECK(dsp::next_pow2(0) == 1);
  CHECK(dsp::next_pow2(1) == 1);
  CHECK(dsp::next_pow2(2) == 2);
  CHECK(dsp::next_pow2(3) == 4);
  CHECK(dsp::next_pow2(4) == 4);
  CHECK(dsp::next_pow2(1023) == 1024);
  CHECK(dsp::next_pow2(1025) == 2048);
}

TEST_CASE("radix-2 transform matches the quadratic DFT") {
  std::mt19937_64 g(31);
  for (const std::size_t n : {std::size_t{1}, std::size_t{2}, std::size_t{8},
                              std::size_t{64}, std::size_t{256}}) {
    auto x = random_complex(n, g);
    const auto want = naive_dft(x, false);
    auto got = x;
    dsp::fft_inplace(got);
    double max_err = 0.0;
    for (std::size_t k = 0; k < n; ++k) max_err = std::max(max_err, std::abs(got[k] - want[k]));
    CHECK(max_err < 1e-9 * static_cast<double>(n));
  }
}

TEST_CASE("inverse transform matches the quadratic inverse DFT and round-trips") {
  std::mt19937_64 g(77);
  auto x = random_complex(128, g);

  auto inv = x;
  dsp::fft_inplace(inv, true);
  const auto want = naive_dft(x, true);
  for (std::size_t k = 0; k < x.size(); ++k) CHECK(std::abs(inv[k] - want[k]) < 1e-10);

  auto round = x;
  dsp::fft_inplace(round, false);
  dsp::fft_inplace(round, true);
  for (std::size_t k = 0; k < x.size(); ++k) CHECK(std::abs(round[k] - x[k]) < 1e-10);
}

TEST_CASE("periodogram finds a pure tone at the right bin") {
  const double rate = 100.0;
  const double f0 = 1.3;
  Eigen::VectorXd x(1000);
  for (Eigen::Index i = 0; i < x.size(); ++i)
    x[i] = std::sin(2.0 * std::numbers::pi * f0 * static_cast<double>(i) / rate) + 5.0;

  const dsp::Periodogram p = dsp::periodogram(x, rate);

  // requested resolution
  CHECK(p.freq_hz[1] - p.freq_hz[0] <= 0.05 + 1e-12);
  CHECK(p.freq_hz[0] == doctest::Approx(0.0));
  CHECK(p.freq_hz[p.freq_hz.size() - 1] == doctest::Approx(rate / 2.0));

  Eigen::Index peak = 0;
  p.power.maxCoeff(&peak);
  CHECK(p.freq_hz[peak] == doctest::Approx(f0).epsilon(0.04));

  // the constant offset must not leak into the peak: power at DC stays tiny
  CHECK(p.power[0] < 1e-6 * p.power[peak]);
}

TEST_CASE("band power concentrates around the tone") {
  const double rate = 100.0;
  Eigen::VectorXd x(2000);
  for (Eigen::Index i = 0; i < x.size(); ++i)
    x[i] = std::cos(2.0 * std::numbers::pi * 2.5 * static_cast<double>(i) / rate);
  const dsp::Periodogram p = dsp::periodogram(x, rate);
  const double inside = dsp::band_power(p, 2.0, 3.0);
  const double outside = dsp::band_power(p, 5.0, 50.0);
  CHECK(inside > 1e3 * outside);
  // band edges are inclusive; an empty band carries no power
  CHECK(dsp::band_power(p, 40.0, 30.0) == 0.0);
}

TEST_CASE("DTFT magnitude matches its definition on a random sequence") {
  std::mt19937_64 g(5);
  Eigen::VectorXd x(257);  // deliberately not a power of two
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = 2.0 * rng::uniform01(g) - 1.0;

  const double rate = 60.0;
  for (const double f : {0.7, 3.3, 11.0, 29.9}) {
    std::complex<double> acc = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i)
      acc += x[i] * std::polar(1.0, -2.0 * std::numbers::pi * f * static_cast<double>(i) / rate);
    CHECK(dsp::dtft_magnitude(x, rate, f) == doctest::Approx(std::abs(acc)).epsilon(1e-10));
  }
}

TEST_CASE("tone frequency is recovered across the heart-rate range") {
  // periodogram resolution must be fine enough for every plausible f1h
  const double rate = 100.0;
  for (double f0 = 0.6; f0 <= 3.0; f0 += 0.3) {
    Eigen::VectorXd x(500);  // a 5 s estimation window
    for (Eigen::Index i = 0; i < x.size(); ++i)
      x[i] = std::sin(2.0 * std::numbers::pi * f0 * static_cast<double>(i) / rate);
    const dsp::Periodogram p = dsp::periodogram(x, rate);
    Eigen::Index peak = 0;
    p.power.maxCoeff(&peak);
    CHECK(std::abs(p.freq_hz[peak] - f0) < 0.06);
  }
}

#include "cardioid/fft.hpp"

#include <algorithm>
#include <cmath>

namespace cardioid::dsp {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n < 2) return;
  // bit-reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    for (auto& v : a) v /= static_cast<double>(n);
  }
}

Periodogram periodogram(const Eigen::Ref<const Eigen::VectorXd>& x, double sample_rate_hz,
                        double max_bin_hz) {
  const auto n = static_cast<std::size_t>(x.size());
  std::size_t nfft = next_pow2(n);
  if (max_bin_hz > 0.0) {
    const auto min_len = static_cast<std::size_t>(std::ceil(sample_rate_hz / max_bin_hz));
    nfft = std::max(nfft, next_pow2(min_len));
  }

  const double mean = x.mean();
  std::vector<std::complex<double>> buf(nfft, {0.0, 0.0});
  double win_norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w =
        n > 1 ? 0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n - 1)))
              : 1.0;
    buf[i] = (x[static_cast<Eigen::Index>(i)] - mean) * w;
    win_norm += w * w;
  }
  if (win_norm <= 0.0) win_norm = 1.0;
  fft_inplace(buf);

  const std::size_t half = nfft / 2 + 1;
  Periodogram out;
  out.freq_hz.resize(static_cast<Eigen::Index>(half));
  out.power.resize(static_cast<Eigen::Index>(half));
  for (std::size_t k = 0; k < half; ++k) {
    out.freq_hz[static_cast<Eigen::Index>(k)] =
        sample_rate_hz * static_cast<double>(k) / static_cast<double>(nfft);
    out.power[static_cast<Eigen::Index>(k)] = std::norm(buf[k]) / win_norm;
  }
  return out;
}

double band_power(const Periodogram& p, double f_lo, double f_hi) {
  double total = 0.0;
  for (Eigen::Index k = 0; k < p.freq_hz.size(); ++k) {
    if (p.freq_hz[k] >= f_lo && p.freq_hz[k] <= f_hi) total += p.power[k];
  }
  return total;
}

double dtft_magnitude(const Eigen::Ref<const Eigen::VectorXd>& x, double sample_rate_hz,
                      double freq_hz) {
  const double w = 2.0 * kPi * freq_hz / sample_rate_hz;
  std::complex<double> acc(0.0, 0.0);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    acc += x[i] * std::complex<double>(std::cos(w * static_cast<double>(i)),
                                       -std::sin(w * static_cast<double>(i)));
  }
  return std::abs(acc);
}

}  // namespace cardioid::dsp

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <vector>

namespace cardioid::dsp {

std::size_t next_pow2(std::size_t n);

/// In-place radix-2 Cooley-Tukey transform. a.size() must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse = false);

struct Periodogram {
  Eigen::VectorXd freq_hz;  // one-sided bins, DC..Nyquist
  Eigen::VectorXd power;
};

/// Zero-mean, Hann-tapered periodogram, zero-padded to a power of two large
/// enough that the bin spacing is at most max_bin_hz.
Periodogram periodogram(const Eigen::Ref<const Eigen::VectorXd>& x, double sample_rate_hz,
                        double max_bin_hz = 0.05);

/// Total periodogram power over [f_lo, f_hi] (inclusive bin centers).
double band_power(const Periodogram& p, double f_lo, double f_hi);

/// Single-sided DTFT magnitude of a real sequence at one frequency.
double dtft_magnitude(const Eigen::Ref<const Eigen::VectorXd>& x, double sample_rate_hz,
                      double freq_hz);

}  // namespace cardioid::dsp

#include "cardioid/filters.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "cardioid/fft.hpp"

namespace cardioid {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kF1hMin = 0.5;
constexpr double kF1hMax = 3.0;

using cplx = std::complex<double>;

// Expand a monic polynomial from its roots; roots come in conjugate pairs so
// the imaginary parts cancel.
Eigen::VectorXd poly_from_roots(const std::vector<cplx>& roots) {
  std::vector<cplx> coeffs{cplx(1.0, 0.0)};
  for (const cplx& r : roots) {
    std::vector<cplx> next(coeffs.size() + 1, cplx(0.0, 0.0));
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
      next[i] += coeffs[i];
      next[i + 1] -= coeffs[i] * r;
    }
    coeffs = std::move(next);
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(coeffs.size()));
  for (std::size_t i = 0; i < coeffs.size(); ++i) out[static_cast<Eigen::Index>(i)] = coeffs[i].real();
  return out;
}

cplx eval_poly(const Eigen::VectorXd& p, const cplx& z) {
  cplx acc(0.0, 0.0);
  for (Eigen::Index i = 0; i < p.size(); ++i) acc = acc * z + p[i];
  return acc;
}

void check_band(const BandSpec& band, double rate) {
  const double nyq = rate / 2.0;
  if (!(band.f_low_hz > 0.0) || !(band.f_low_hz < band.f_high_hz) || !(band.f_high_hz < nyq))
    throw Error(Err::BandOutOfRange, "need 0 < f_low < f_high < Nyquist (" + std::to_string(nyq) +
                                         " Hz), got [" + std::to_string(band.f_low_hz) + ", " +
                                         std::to_string(band.f_high_hz) + "]");
}

// Steady-state filter state for a unit step, scipy lfilter_zi style. Used to
// suppress start-up transients in filtfilt.
Eigen::VectorXd lfilter_zi(const IirCoeffs& c) {
  const Eigen::Index n = c.a.size() - 1;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  // companion matrix of a, transposed
  for (Eigen::Index i = 0; i < n; ++i) {
    A(i, 0) = -c.a[i + 1];
    if (i + 1 < n) A(i, i + 1) = 1.0;
  }
  Eigen::VectorXd B(n);
  for (Eigen::Index i = 0; i < n; ++i) B[i] = c.b[i + 1] - c.a[i + 1] * c.b[0];
  const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n) - A;
  return M.partialPivLu().solve(B);
}

Eigen::VectorXd iir_filter_zi(const IirCoeffs& c, const Eigen::Ref<const Eigen::VectorXd>& x,
                              const Eigen::VectorXd& zi) {
  const Eigen::Index n = x.size();
  const Eigen::Index order = c.a.size() - 1;
  Eigen::VectorXd z = zi;
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double xi = x[i];
    const double yi = c.b[0] * xi + (order > 0 ? z[0] : 0.0);
    for (Eigen::Index k = 0; k < order - 1; ++k)
      z[k] = c.b[k + 1] * xi + z[k + 1] - c.a[k + 1] * yi;
    if (order > 0) z[order - 1] = c.b[order] * xi - c.a[order] * yi;
    y[i] = yi;
  }
  return y;
}

}  // namespace

IirCoeffs butterworth_bandpass_design(const BandSpec& band, double sample_rate_hz, int order) {
  check_band(band, sample_rate_hz);
  if (order < 1 || order > 8)
    throw Error(Err::BandOutOfRange, "butterworth order must be in [1, 8]");

  const double fs2 = 2.0 * sample_rate_hz;
  // pre-warped analog edges
  const double w1 = fs2 * std::tan(kPi * band.f_low_hz / sample_rate_hz);
  const double w2 = fs2 * std::tan(kPi * band.f_high_hz / sample_rate_hz);
  const double w0 = std::sqrt(w1 * w2);
  const double bw = w2 - w1;

  // analog low-pass prototype poles on the unit circle, left half plane
  std::vector<cplx> lp_poles;
  for (int k = 1; k <= order; ++k) {
    const double theta = kPi * (2.0 * k + order - 1.0) / (2.0 * order);
    lp_poles.emplace_back(std::cos(theta), std::sin(theta));
  }

  // low-pass -> band-pass: each prototype pole p yields the two roots of
  // s^2 - (bw*p) s + w0^2 = 0
  std::vector<cplx> bp_poles;
  for (const cplx& p : lp_poles) {
    const cplx bp = p * bw;
    const cplx disc = std::sqrt(bp * bp - 4.0 * w0 * w0);
    bp_poles.push_back((bp + disc) / 2.0);
    bp_poles.push_back((bp - disc) / 2.0);
  }

  // bilinear transform; the N zeros at s=0 map to z=+1 and the N zeros at
  // s=infinity map to z=-1
  std::vector<cplx> z_poles;
  z_poles.reserve(bp_poles.size());
  for (const cplx& s : bp_poles) z_poles.push_back((fs2 + s) / (fs2 - s));
  std::vector<cplx> z_zeros;
  for (int k = 0; k < order; ++k) {
    z_zeros.emplace_back(1.0, 0.0);
    z_zeros.emplace_back(-1.0, 0.0);
  }

  IirCoeffs c;
  c.a = poly_from_roots(z_poles);
  c.b = poly_from_roots(z_zeros);

  // normalize to unit gain at the (warped) center frequency
  const double wc = 2.0 * std::atan(w0 / fs2);
  const cplx zc(std::cos(wc), std::sin(wc));
  const double gain = std::abs(eval_poly(c.b, zc) / eval_poly(c.a, zc));
  c.b /= gain;
  return c;
}

Eigen::VectorXd iir_filter(const IirCoeffs& c, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return iir_filter_zi(c, x, Eigen::VectorXd::Zero(c.a.size() - 1));
}

Eigen::VectorXd filtfilt(const IirCoeffs& c, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const Eigen::Index n = x.size();
  Eigen::Index pad = 3 * (c.a.size() - 1);
  if (pad >= n) pad = n - 1;

  Eigen::VectorXd ext(n + 2 * pad);
  for (Eigen::Index i = 0; i < pad; ++i) ext[i] = 2.0 * x[0] - x[pad - i];
  ext.segment(pad, n) = x;
  for (Eigen::Index i = 0; i < pad; ++i) ext[pad + n + i] = 2.0 * x[n - 1] - x[n - 2 - i];

  const Eigen::VectorXd zi = lfilter_zi(c);
  Eigen::VectorXd fwd = iir_filter_zi(c, ext, zi * ext[0]);
  fwd.reverseInPlace();
  Eigen::VectorXd bwd = iir_filter_zi(c, fwd, zi * fwd[0]);
  bwd.reverseInPlace();
  return bwd.segment(pad, n);
}

PpgSignal butterworth_bandpass(const PpgSignal& sig, const BandSpec& band, int order) {
  sig.validate();
  const IirCoeffs c = butterworth_bandpass_design(band, sig.sample_rate_hz, order);
  PpgSignal out = sig;
  out.samples = filtfilt(c, sig.samples);
  return out;
}

PpgSignal soa_filter(const PpgSignal& sig) {
  return butterworth_bandpass(sig, BandSpec{0.5, 12.5}, 2);
}

BandSpec adaptive_band(double f1h_hz, const FilterOptions& opts) {
  if (!(f1h_hz >= kF1hMin && f1h_hz <= kF1hMax))
    throw Error(Err::F1hOutOfRange,
                "f1h " + std::to_string(f1h_hz) + " outside [0.5, 3.0] Hz");
  return BandSpec{opts.fl_multiplier * f1h_hz, opts.fh_multiplier * f1h_hz};
}

std::vector<HarmonicEstimate> estimate_f1h(const PpgSignal& sig, const WindowPlan& plan) {
  sig.validate();
  const double rate = sig.sample_rate_hz;
  const auto win = static_cast<Eigen::Index>(std::lround(plan.window_s * rate));
  const auto stride = static_cast<Eigen::Index>(std::lround(plan.stride_s * rate));
  if (stride <= 0 || win < stride)
    throw Error(Err::InvalidSpec, "window plan requires 0 < stride <= window");
  if (sig.samples.size() < win)
    throw Error(Err::SignalTooShort, "signal shorter than the analysis window");

  std::vector<HarmonicEstimate> out;
  for (Eigen::Index start = 0; start + win <= sig.samples.size(); start += stride) {
    const auto spec = dsp::periodogram(sig.samples.segment(start, win), rate);
    Eigen::Index best = -1;
    for (Eigen::Index k = 0; k < spec.freq_hz.size(); ++k) {
      if (spec.freq_hz[k] < kF1hMin || spec.freq_hz[k] > kF1hMax) continue;
      if (best < 0 || spec.power[k] > spec.power[best]) best = k;
    }
    if (best < 0) throw Error(Err::SignalTooShort, "no spectral bins inside [0.5, 3.0] Hz");

    // parabolic refinement of the peak bin
    double f = spec.freq_hz[best];
    if (best > 0 && best + 1 < spec.power.size()) {
      const double p0 = spec.power[best - 1], p1 = spec.power[best], p2 = spec.power[best + 1];
      const double denom = p0 - 2.0 * p1 + p2;
      if (std::abs(denom) > 1e-30) {
        const double delta = 0.5 * (p0 - p2) / denom;
        if (std::abs(delta) <= 1.0) f += delta * (spec.freq_hz[1] - spec.freq_hz[0]);
      }
    }

    HarmonicEstimate est;
    est.f1h_hz = std::clamp(f, kF1hMin, kF1hMax);
    est.window_start_s = static_cast<double>(start) / rate;
    est.spec_freq_hz = spec.freq_hz;
    est.spec_power = spec.power;
    out.push_back(std::move(est));
  }
  return out;
}

PpgSignal harmonic_filter(const PpgSignal& sig, const WindowPlan& plan, const FilterOptions& opts) {
  return harmonic_filter(sig, estimate_f1h(sig, plan), plan, opts);
}

PpgSignal harmonic_filter(const PpgSignal& sig, const std::vector<HarmonicEstimate>& estimates,
                          const WindowPlan& plan, const FilterOptions& opts) {
  sig.validate();
  if (estimates.empty()) throw Error(Err::SignalTooShort, "no harmonic estimates");
  const double rate = sig.sample_rate_hz;
  const Eigen::Index n = sig.samples.size();
  const auto win = static_cast<Eigen::Index>(std::lround(plan.window_s * rate));
  const auto stride = static_cast<Eigen::Index>(std::lround(plan.stride_s * rate));
  const auto n_win = static_cast<Eigen::Index>(estimates.size());

  // Filter each analysis window with its own adaptive band. Window k covers
  // samples [k*stride, k*stride + win).
  std::vector<Eigen::VectorXd> filtered(static_cast<std::size_t>(n_win));
  for (Eigen::Index k = 0; k < n_win; ++k) {
    const BandSpec band = adaptive_band(estimates[static_cast<std::size_t>(k)].f1h_hz, opts);
    const IirCoeffs c = butterworth_bandpass_design(band, rate, opts.butterworth_order);
    const Eigen::Index start = k * stride;
    const Eigen::Index len = std::min(win, n - start);
    filtered[static_cast<std::size_t>(k)] = filtfilt(c, sig.samples.segment(start, len));
  }

  // Each stride-aligned output segment m keeps the central stride of its
  // enclosing window (k = m - (win/stride - 1)/2 for the 5s/1s default);
  // edges reuse the nearest window.
  const Eigen::Index center_off = (win / stride - 1) / 2;
  const auto window_of_segment = [&](Eigen::Index m) {
    return std::clamp(m - center_off, Eigen::Index{0}, n_win - 1);
  };
  const auto value_from_window = [&](Eigen::Index k, Eigen::Index i) {
    const Eigen::Index off =
        std::clamp(i - k * stride, Eigen::Index{0},
                   static_cast<Eigen::Index>(filtered[static_cast<std::size_t>(k)].size()) - 1);
    return filtered[static_cast<std::size_t>(k)][off];
  };

  const auto fade = static_cast<Eigen::Index>(std::lround(0.1 * rate));
  const Eigen::Index last_seg = (n - 1) / stride;
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index m = i / stride;
    const Eigen::Index k = window_of_segment(m);
    double v = value_from_window(k, i);
    if (fade > 1) {
      // linear cross-fade over `fade` samples centered on each segment
      // boundary; weight of the neighboring window ramps 0.5 -> 0
      const Eigen::Index dist_left = i - m * stride;
      const Eigen::Index dist_right = (m + 1) * stride - 1 - i;
      if (m > 0 && dist_left < fade / 2) {
        const Eigen::Index kp = window_of_segment(m - 1);
        if (kp != k) {
          const double w = 0.5 - (static_cast<double>(dist_left) + 0.5) / static_cast<double>(fade);
          v = (1.0 - w) * v + w * value_from_window(kp, i);
        }
      } else if (m < last_seg && dist_right < fade / 2) {
        const Eigen::Index kn = window_of_segment(m + 1);
        if (kn != k) {
          const double w = 0.5 - (static_cast<double>(dist_right) + 0.5) / static_cast<double>(fade);
          v = (1.0 - w) * v + w * value_from_window(kn, i);
        }
      }
    }
    out[i] = v;
  }

  PpgSignal res = sig;
  res.samples = std::move(out);
  return res;
}

PpgSignal second_derivative(const PpgSignal& sig) {
  sig.validate();
  if (sig.samples.size() < 5) throw Error(Err::SignalTooShort, "need at least 5 samples");
  const Eigen::Index n = sig.samples.size();
  const double r2 = sig.sample_rate_hz * sig.sample_rate_hz;
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 1; i + 1 < n; ++i)
    y[i] = (sig.samples[i + 1] - 2.0 * sig.samples[i] + sig.samples[i - 1]) * r2;
  y[0] = y[1];
  y[n - 1] = y[n - 2];
  PpgSignal out = sig;
  out.samples = std::move(y);
  return out;
}

}  // namespace cardioid

#pragma once

// LFM chirp synthesis, Tukey windowing, analytic signals, and replica
// correlation (matched filtering).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "sasinr/error.hpp"
#include "sasinr/fft.hpp"

namespace sasinr {

using cplx = std::complex<double>;

struct WaveformSpec {
  double f_start = 30000.0;     // Hz
  double f_stop = 10000.0;      // Hz
  double duration = 0.01;       // s
  double sample_rate = 100000.0; // Hz
  double taper_fraction = 0.1;

  double bandwidth() const noexcept { return std::abs(f_stop - f_start); }
  double chirp_rate() const noexcept { return (f_stop - f_start) / duration; }
  std::size_t num_samples() const noexcept {
    return static_cast<std::size_t>(std::llround(duration * sample_rate));
  }

  void validate() const {
    if (!(duration > 0.0)) throw ConfigError("waveform duration must be > 0");
    if (!(sample_rate > 0.0)) throw ConfigError("waveform sample_rate must be > 0");
    if (!(taper_fraction >= 0.0 && taper_fraction <= 1.0))
      throw ConfigError("waveform taper_fraction must lie in [0, 1]");
    if (std::max(std::abs(f_start), std::abs(f_stop)) >= 0.5 * sample_rate)
      throw ConfigError("waveform frequencies must stay below sample_rate/2");
  }

  bool operator==(const WaveformSpec&) const = default;
};

/// Uniformly sampled time series; sample i is taken at start_time + i/sample_rate.
template <typename T>
struct SampledSignal {
  double sample_rate = 0.0;
  double start_time = 0.0;
  std::vector<T> samples;

  std::size_t size() const noexcept { return samples.size(); }
  double time_of(std::size_t i) const noexcept {
    return start_time + static_cast<double>(i) / sample_rate;
  }
  bool operator==(const SampledSignal&) const = default;
};

using RealSignal = SampledSignal<double>;
using ComplexSignal = SampledSignal<cplx>;

/// Symmetric Tukey (tapered cosine) window: cosine ramps over
/// taper_fraction/2 of the length at each end, flat in between.
inline std::vector<double> make_tukey(std::size_t n, double taper_fraction) {
  if (n < 2) throw ConfigError("make_tukey: n must be >= 2");
  if (!(taper_fraction >= 0.0 && taper_fraction <= 1.0))
    throw ConfigError("make_tukey: taper_fraction must lie in [0, 1]");
  std::vector<double> w(n, 1.0);
  if (taper_fraction == 0.0) return w;
  const double last = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    // Evaluate on the nearer edge so w[i] == w[n-1-i] exactly.
    const double x = static_cast<double>(std::min(i, n - 1 - i)) / last;
    if (x < 0.5 * taper_fraction)
      w[i] = 0.5 * (1.0 + std::cos(std::numbers::pi * (2.0 * x / taper_fraction - 1.0)));
  }
  return w;
}

/// Unwindowed chirp phase in radians at time t.
inline double lfm_phase(const WaveformSpec& spec, double t) {
  return 2.0 * std::numbers::pi * (spec.f_start * t + 0.5 * spec.chirp_rate() * t * t);
}

/// Tukey-windowed real LFM chirp starting at t = 0.
inline RealSignal make_lfm(const WaveformSpec& spec) {
  spec.validate();
  const std::size_t n = spec.num_samples();
  if (n < 2) throw ConfigError("make_lfm: waveform has fewer than 2 samples");
  const auto window = make_tukey(n, spec.taper_fraction);
  RealSignal s{spec.sample_rate, 0.0, std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / spec.sample_rate;
    s.samples[i] = window[i] * std::cos(lfm_phase(spec, t));
  }
  return s;
}

/// The same chirp evaluated on a grid `factor` times finer than
/// spec.sample_rate, covering the same span [0, (N-1)/sample_rate]. Every
/// factor-th sample equals make_lfm(spec) up to rounding.
inline RealSignal make_lfm_oversampled(const WaveformSpec& spec, std::size_t factor) {
  spec.validate();
  if (factor < 1) throw ConfigError("make_lfm_oversampled: factor must be >= 1");
  const std::size_t n = spec.num_samples();
  if (n < 2) throw ConfigError("make_lfm: waveform has fewer than 2 samples");
  const double fine_rate = spec.sample_rate * static_cast<double>(factor);
  const std::size_t fine_n = (n - 1) * factor + 1;
  const double span = static_cast<double>(n - 1);
  const double alpha = spec.taper_fraction;
  RealSignal s{fine_rate, 0.0, std::vector<double>(fine_n)};
  for (std::size_t j = 0; j < fine_n; ++j) {
    const double t = static_cast<double>(j) / fine_rate;
    const double x = std::min(static_cast<double>(j), static_cast<double>(fine_n - 1 - j)) /
                     static_cast<double>(factor) / span;
    double w = 1.0;
    if (alpha > 0.0 && x < 0.5 * alpha)
      w = 0.5 * (1.0 + std::cos(std::numbers::pi * (2.0 * x / alpha - 1.0)));
    s.samples[j] = w * std::cos(lfm_phase(spec, t));
  }
  return s;
}

/// FFT-based analytic signal: negative frequencies zeroed, positive doubled,
/// DC and Nyquist kept.
inline ComplexSignal analytic_signal(const RealSignal& s) {
  const std::size_t n = s.size();
  if (n < 2) throw ConfigError("analytic_signal: need at least 2 samples");
  auto& tf = fft::cached_1d(n);
  auto buf = tf.data();
  for (std::size_t i = 0; i < n; ++i) buf[i] = cplx(s.samples[i], 0.0);
  tf.forward();
  const std::size_t half = n / 2;
  for (std::size_t k = 1; k < n; ++k) {
    if (k < half || (k == half && n % 2 == 1))
      buf[k] *= 2.0;
    else if (k > half)
      buf[k] = 0.0;
  }
  tf.inverse();
  ComplexSignal out{s.sample_rate, s.start_time, std::vector<cplx>(buf.begin(), buf.end())};
  return out;
}

/// Matched filter against a fixed transmit replica. The replica spectrum is
/// precomputed for one receive length, so filtering many equal-length records
/// is cheap; other lengths still work but recompute it per call.
///
/// Output sample k holds lag k - (len(tx) - 1); start_time is set so that an
/// echo equal to tx delayed by t_d peaks at output time t_d.
///
/// With upsample > 1 the output is band-limited interpolated onto a grid
/// upsample times finer (spectral zero padding), which keeps later linear
/// interpolation of the complex output accurate near the carrier.
class ReplicaCorrelator {
 public:
  ReplicaCorrelator(const RealSignal& tx, std::size_t rx_length, std::size_t upsample = 1)
      : tx_(tx), tx_analytic_(analytic_signal(tx)), upsample_(upsample) {
    if (upsample_ < 1) throw ConfigError("replica_correlate: upsample factor must be >= 1");
    if (rx_length > 0) {
      padded_ = fft::next_pow2(rx_length + tx_.size() - 1);
      spectrum_ = replica_spectrum(padded_);
    }
  }

  ComplexSignal operator()(const RealSignal& rx) const {
    if (rx.sample_rate != tx_.sample_rate)
      throw ConfigError("replica_correlate: sample rate mismatch (" +
                        std::to_string(rx.sample_rate) + " vs " +
                        std::to_string(tx_.sample_rate) + ")");
    const std::size_t nrx = rx.size();
    const std::size_t ntx = tx_.size();
    const std::size_t out_len = nrx + ntx - 1;
    const std::size_t padded = fft::next_pow2(out_len);
    std::vector<cplx> local;
    if (padded != padded_) local = replica_spectrum(padded);
    const auto& tx_spec = padded == padded_ ? spectrum_ : local;

    const auto rx_a = analytic_signal(rx);
    auto& tf = fft::cached_1d(padded);
    auto buf = tf.data();
    tf.fill_zero();
    for (std::size_t i = 0; i < nrx; ++i) buf[i] = rx_a.samples[i];
    tf.forward();
    for (std::size_t k = 0; k < padded; ++k) buf[k] *= std::conj(tx_spec[k]);

    ComplexSignal out;
    out.sample_rate = rx.sample_rate * static_cast<double>(upsample_);
    out.start_time =
        rx.start_time - tx_.start_time - static_cast<double>(ntx - 1) / rx.sample_rate;
    const std::size_t lead = (ntx - 1) * upsample_;
    out.samples.resize((out_len - 1) * upsample_ + 1);
    auto emit = [&](std::span<const cplx> circ, std::size_t period) {
      // Negative lags wrap to the top of the circular result.
      for (std::size_t k = 0; k < out.samples.size(); ++k)
        out.samples[k] = circ[(k + period - lead) % period];
    };
    if (upsample_ == 1) {
      tf.inverse();
      emit(buf, padded);
      return out;
    }
    const std::size_t fine = padded * upsample_;
    auto& up = fft::cached_1d(fine);
    auto ubuf = up.data();
    up.fill_zero();
    const std::size_t half = padded / 2;
    for (std::size_t k = 0; k < half; ++k) ubuf[k] = buf[k];
    // Split the Nyquist bin so the interpolant stays symmetric.
    ubuf[half] = 0.5 * buf[half];
    ubuf[fine - half] = 0.5 * buf[half];
    for (std::size_t k = half + 1; k < padded; ++k) ubuf[fine - padded + k] = buf[k];
    up.inverse();
    for (auto& v : ubuf) v *= static_cast<double>(upsample_);
    emit(ubuf, fine);
    return out;
  }

  const RealSignal& replica() const noexcept { return tx_; }

 private:
  std::vector<cplx> replica_spectrum(std::size_t padded) const {
    auto& tf = fft::cached_1d(padded);
    auto buf = tf.data();
    tf.fill_zero();
    for (std::size_t i = 0; i < tx_analytic_.size(); ++i) buf[i] = tx_analytic_.samples[i];
    tf.forward();
    return {buf.begin(), buf.end()};
  }

  RealSignal tx_;
  ComplexSignal tx_analytic_;
  std::size_t upsample_ = 1;
  std::size_t padded_ = 0;
  std::vector<cplx> spectrum_;
};

/// Complex matched-filter output of rx against the transmitted replica tx.
inline ComplexSignal replica_correlate(const RealSignal& rx, const RealSignal& tx,
                                       std::size_t upsample = 1) {
  return ReplicaCorrelator(tx, rx.size(), upsample)(rx);
}

}  // namespace sasinr

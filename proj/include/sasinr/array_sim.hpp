#pragma once

// Point-scattering forward model for a circular monostatic array: every
// nonzero pixel of the scatterer grid returns a copy of the transmitted chirp,
// delayed by its two-way travel time and weighted by its amplitude.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sasinr/error.hpp"
#include "sasinr/parallel.hpp"
#include "sasinr/scene_grid.hpp"
#include "sasinr/waveform.hpp"

namespace sasinr {

struct MeasurementSet {
  ArrayGeometry geom;
  WaveformSpec spec;
  std::vector<RealSignal> signals;  // one record per transducer, equal lengths
  double record_window = 0.0;       // s

  std::size_t record_length() const noexcept {
    return signals.empty() ? 0 : signals.front().size();
  }
  bool operator==(const MeasurementSet&) const = default;
};

struct SimulationOptions {
  /// Displacement of every scatterer from its pixel center, in meters. Each
  /// component must stay below one pixel spacing; nonzero values break the
  /// phase alignment between the simulated scene and the pixel-center PSF.
  Point2 offset{};
  /// Record length in seconds; 0 picks max travel time + pulse + 10%.
  double record_window = 0.0;
  /// The delayed chirp is linearly interpolated from a copy sampled this many
  /// times finer than the record. 1 interpolates the record-rate samples.
  std::size_t chirp_oversample = 16;
};

/// Two-way monostatic travel time between a transducer and a scene-plane point.
inline double time_of_flight(const Point3& transducer, const Point2& point, double sound_speed) {
  const double dx = transducer.x - point.x;
  const double dy = transducer.y - point.y;
  const double dz = transducer.z;
  return 2.0 * std::sqrt(dx * dx + dy * dy + dz * dz) / sound_speed;
}

/// Longest travel time from any transducer to the (offset) scene square.
/// Distance is convex, so the maximum over the square sits at a corner.
inline double max_scene_time_of_flight(const ArrayGeometry& geom, Point2 offset = {}) {
  const double h = 0.5 * geom.scene_extent;
  double best = 0.0;
  for (const auto& t : transducer_positions(geom))
    for (double sx : {-h, h})
      for (double sy : {-h, h})
        best = std::max(best, time_of_flight(t, {sx + offset.x, sy + offset.y}, geom.sound_speed));
  return best;
}

inline double default_record_window(const ArrayGeometry& geom, const WaveformSpec& spec,
                                    Point2 offset = {}) {
  return 1.1 * (max_scene_time_of_flight(geom, offset) + spec.duration);
}

namespace detail {

// Adds amplitude * chirp(t - delay) into record. The chirp is sampled
// `stride` times finer than the record, treated as zero outside its support,
// and interpolated linearly. delay is in record samples.
inline void add_delayed(std::vector<double>& record, const std::vector<double>& chirp,
                        std::size_t stride, double delay_samples, double amplitude) {
  const auto n = static_cast<std::ptrdiff_t>(chirp.size());
  const auto len = static_cast<std::ptrdiff_t>(record.size());
  const auto k = static_cast<double>(stride);
  auto at = [&](std::ptrdiff_t j) { return (j >= 0 && j < n) ? chirp[j] : 0.0; };
  // Record sample i sits at fine chirp position (i - delay) * stride.
  const auto first = static_cast<std::ptrdiff_t>(std::floor(delay_samples));
  const auto last = static_cast<std::ptrdiff_t>(std::ceil(delay_samples + (n - 1) / k));
  for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(first, 0); i <= last && i < len; ++i) {
    const double u = (static_cast<double>(i) - delay_samples) * k;
    const double lo = std::floor(u);
    const double frac = u - lo;
    const auto j = static_cast<std::ptrdiff_t>(lo);
    record[i] += amplitude * ((1.0 - frac) * at(j) + frac * at(j + 1));
  }
}

}  // namespace detail

/// Received records for every transducer given scatterer amplitudes sigma
/// laid out on the pixel grid of geom.
inline MeasurementSet simulate(const RealGrid& sigma, const ArrayGeometry& geom,
                               const WaveformSpec& spec, const SimulationOptions& opts = {}) {
  geom.validate();
  spec.validate();
  if (sigma.height() != geom.grid_size || sigma.width() != geom.grid_size)
    throw ConfigError("simulate: scene is " + std::to_string(sigma.height()) + "x" +
                      std::to_string(sigma.width()) + " but grid_size is " +
                      std::to_string(geom.grid_size));
  const double spacing = geom.pixel_spacing();
  if (std::abs(opts.offset.x) >= spacing || std::abs(opts.offset.y) >= spacing)
    throw ConfigError("simulate: scatterer offset must be smaller than one pixel spacing");

  MeasurementSet out;
  out.geom = geom;
  out.spec = spec;
  out.record_window = opts.record_window > 0.0 ? opts.record_window
                                               : default_record_window(geom, spec, opts.offset);
  const double worst = max_scene_time_of_flight(geom, opts.offset) + spec.duration;
  if (worst > out.record_window)
    throw ConfigError("simulate: echoes end at " + std::to_string(worst) +
                      " s, beyond the record window of " + std::to_string(out.record_window) +
                      " s");

  if (opts.chirp_oversample < 1) throw ConfigError("simulate: chirp_oversample must be >= 1");
  const auto chirp = make_lfm_oversampled(spec, opts.chirp_oversample);
  const auto record_len =
      static_cast<std::size_t>(std::ceil(out.record_window * spec.sample_rate));
  const auto centers = pixel_centers(geom);
  const auto transducers = transducer_positions(geom);

  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < sigma.size(); ++i)
    if (sigma[i] != 0.0) active.push_back(i);

  out.signals.assign(geom.num_transducers,
                     RealSignal{spec.sample_rate, 0.0, std::vector<double>(record_len, 0.0)});
  parallel_for(geom.num_transducers, [&](std::size_t n) {
    auto& record = out.signals[n].samples;
    for (std::size_t idx : active) {
      const Point2 p{centers[idx].x + opts.offset.x, centers[idx].y + opts.offset.y};
      const double tof = time_of_flight(transducers[n], p, geom.sound_speed);
      detail::add_delayed(record, chirp.samples, opts.chirp_oversample, tof * spec.sample_rate,
                          sigma[idx]);
    }
  });
  return out;
}

/// Largest absolute sample over all records.
inline double peak_amplitude(const MeasurementSet& m) {
  double peak = 0.0;
  for (const auto& s : m.signals)
    for (double v : s.samples) peak = std::max(peak, std::abs(v));
  return peak;
}

/// Adds white Gaussian noise of the given standard deviation to every sample.
inline void add_noise(MeasurementSet& m, double stddev, std::uint64_t seed) {
  if (stddev < 0.0) throw ConfigError("add_noise: stddev must be >= 0");
  if (stddev == 0.0) return;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& s : m.signals)
    for (double& v : s.samples) v += dist(rng);
}

}  // namespace sasinr

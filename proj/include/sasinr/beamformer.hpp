#pragma once

// Time-domain delay-and-sum backprojection of matched-filtered records.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "sasinr/array_sim.hpp"
#include "sasinr/error.hpp"
#include "sasinr/parallel.hpp"
#include "sasinr/scene_grid.hpp"
#include "sasinr/waveform.hpp"

namespace sasinr {

enum class Interpolation { linear, nearest };

/// Default band-limited upsampling applied to matched-filter outputs before
/// backprojection.
inline constexpr std::size_t kDefaultUpsample = 8;

/// Replica-correlates every record against the chirp described by m.spec.
inline std::vector<ComplexSignal> matched_filter_all(const MeasurementSet& m,
                                                     std::size_t upsample = kDefaultUpsample) {
  const auto chirp = make_lfm(m.spec);
  const ReplicaCorrelator correlate(chirp, m.record_length(), upsample);
  std::vector<ComplexSignal> out(m.signals.size());
  parallel_for(m.signals.size(), [&](std::size_t n) { out[n] = correlate(m.signals[n]); });
  return out;
}

namespace detail {

inline cplx sample_at(const ComplexSignal& s, double t, Interpolation mode) {
  const double u = (t - s.start_time) * s.sample_rate;
  const auto n = static_cast<double>(s.size());
  if (mode == Interpolation::nearest) {
    const double k = std::round(u);
    if (k < 0.0 || k > n - 1.0) return {};
    return s.samples[static_cast<std::size_t>(k)];
  }
  const double lo = std::floor(u);
  if (lo < 0.0 || lo + 1.0 > n - 1.0) return {};
  const auto i = static_cast<std::size_t>(lo);
  const double frac = u - lo;
  return (1.0 - frac) * s.samples[i] + frac * s.samples[i + 1];
}

}  // namespace detail

/// Delay-and-sum image: each pixel sums, over transducers in index order, the
/// filtered record sampled at that pixel's two-way travel time. Unnormalized.
inline ComplexGrid backproject(const std::vector<ComplexSignal>& filtered,
                               const ArrayGeometry& geom,
                               Interpolation mode = Interpolation::linear) {
  geom.validate();
  if (filtered.size() != geom.num_transducers)
    throw ConfigError("backproject: got " + std::to_string(filtered.size()) +
                      " records for " + std::to_string(geom.num_transducers) + " transducers");
  const auto transducers = transducer_positions(geom);
  const auto centers = pixel_centers(geom);
  const std::size_t n = geom.grid_size;
  ComplexGrid image(n, n);
  parallel_for(n, [&](std::size_t row) {
    for (std::size_t col = 0; col < n; ++col) {
      const Point2 p = centers[row * n + col];
      cplx acc{};
      for (std::size_t k = 0; k < transducers.size(); ++k)
        acc += detail::sample_at(filtered[k], time_of_flight(transducers[k], p, geom.sound_speed),
                                 mode);
      image(row, col) = acc;
    }
  });
  return image;
}

struct BeamformOptions {
  Interpolation interpolation = Interpolation::linear;
  std::size_t upsample = kDefaultUpsample;
};

/// Matched filter followed by backprojection onto m.geom.
inline ComplexGrid beamform(const MeasurementSet& m, const BeamformOptions& opts = {}) {
  return backproject(matched_filter_all(m, opts.upsample), m.geom, opts.interpolation);
}

/// Scales g so its largest magnitude is 1; phases are untouched.
inline ComplexGrid normalize_peak(const ComplexGrid& g) {
  const double peak = grid_stats(g).max_magnitude;
  if (!(peak > 0.0)) throw NumericError("normalize_peak: grid is all zero");
  ComplexGrid out = g;
  for (auto& v : out.values()) v /= peak;
  return out;
}

}  // namespace sasinr

#pragma once

// Core image and geometry types shared by the simulator, beamformer, PSF
// convolution, and deconvolution code.
//
// Conventions: row-major storage, row index increases with y, column index
// increases with x. Pixel centers span [-extent/2, +extent/2] inclusively on
// both axes, so an odd grid has an exact center pixel. The scene plane is
// z = 0.

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "sasinr/error.hpp"

namespace sasinr {

using cplx = std::complex<double>;

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

struct PixelIndex {
  std::size_t row = 0;
  std::size_t col = 0;
  bool operator==(const PixelIndex&) const = default;
};

namespace detail {

template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(std::size_t height, std::size_t width, T fill = T{})
      : height_(height), width_(width), data_(height * width, fill) {}
  Grid(std::size_t height, std::size_t width, std::vector<T> data)
      : height_(height), width_(width), data_(std::move(data)) {
    if (data_.size() != height_ * width_)
      throw ConfigError("grid data length " + std::to_string(data_.size()) +
                        " does not match " + std::to_string(height_) + "x" +
                        std::to_string(width_));
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * width_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * width_ + c];
  }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  bool same_shape(const Grid& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  bool operator==(const Grid&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<T> data_;
};

}  // namespace detail

/// Real amplitudes; scatterer distributions and network outputs live in [0,1].
using RealGrid = detail::Grid<double>;

/// Complex image: beamformed scene, PSF, or PSF-convolved estimate.
/// std::complex<double> storage is interleaved (re, im).
using ComplexGrid = detail::Grid<cplx>;

inline ComplexGrid to_complex(const RealGrid& g) {
  ComplexGrid out(g.height(), g.width());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = cplx(g[i], 0.0);
  return out;
}

inline RealGrid magnitude(const ComplexGrid& g) {
  RealGrid out(g.height(), g.width());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = std::abs(g[i]);
  return out;
}

inline RealGrid real_part(const ComplexGrid& g) {
  RealGrid out(g.height(), g.width());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i].real();
  return out;
}

inline bool all_finite(const ComplexGrid& g) {
  for (const auto& v : g.values())
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  return true;
}

inline bool all_finite(const RealGrid& g) {
  for (double v : g.values())
    if (!std::isfinite(v)) return false;
  return true;
}

/// Circular track of monostatic transducers around a square scene.
struct ArrayGeometry {
  std::size_t num_transducers = 360;
  double ring_radius = 0.85;   // m
  double ring_height = 0.2;    // m above the scene plane
  double scene_extent = 0.4;   // m, square, pixel center to pixel center
  std::size_t grid_size = 129; // pixels per side
  double sound_speed = 343.0;  // m/s

  void validate() const {
    if (num_transducers < 1) throw ConfigError("num_transducers must be >= 1");
    if (!(ring_radius > 0.0)) throw ConfigError("ring_radius must be > 0");
    if (!(scene_extent > 0.0)) throw ConfigError("scene_extent must be > 0");
    if (grid_size < 2) throw ConfigError("grid_size must be >= 2");
    if (!(sound_speed > 0.0)) throw ConfigError("sound_speed must be > 0");
    if (!std::isfinite(ring_height)) throw ConfigError("ring_height must be finite");
  }

  double pixel_spacing() const noexcept {
    return scene_extent / static_cast<double>(grid_size - 1);
  }

  /// Coordinate of pixel index i along either axis.
  double axis_coordinate(std::size_t i) const noexcept {
    return -0.5 * scene_extent + static_cast<double>(i) * pixel_spacing();
  }

  bool operator==(const ArrayGeometry&) const = default;
};

/// Row-major pixel centers; entry r*grid_size + c is (x_c, y_r).
inline std::vector<Point2> pixel_centers(const ArrayGeometry& geom) {
  geom.validate();
  const std::size_t n = geom.grid_size;
  std::vector<double> axis(n);
  for (std::size_t i = 0; i < n; ++i) axis[i] = geom.axis_coordinate(i);
  // Pin the far endpoint exactly; the product above can land one ulp short.
  axis[n - 1] = 0.5 * geom.scene_extent;
  std::vector<Point2> out;
  out.reserve(n * n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) out.push_back({axis[c], axis[r]});
  return out;
}

/// Transducer n sits at angle 2*pi*n/N on the ring, starting on +x.
inline std::vector<Point3> transducer_positions(const ArrayGeometry& geom) {
  geom.validate();
  std::vector<Point3> out;
  out.reserve(geom.num_transducers);
  for (std::size_t n = 0; n < geom.num_transducers; ++n) {
    const double theta =
        2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(geom.num_transducers);
    out.push_back({geom.ring_radius * std::cos(theta), geom.ring_radius * std::sin(theta),
                   geom.ring_height});
  }
  return out;
}

struct GridStats {
  double max_magnitude = 0.0;
  PixelIndex argmax;
};

/// Largest magnitude and its first row-major location.
inline GridStats grid_stats(const ComplexGrid& g) {
  if (g.empty()) throw ConfigError("grid_stats: empty grid");
  GridStats s;
  s.max_magnitude = std::abs(g[0]);
  std::size_t best = 0;
  for (std::size_t i = 1; i < g.size(); ++i) {
    const double m = std::abs(g[i]);
    if (m > s.max_magnitude) {
      s.max_magnitude = m;
      best = i;
    }
  }
  s.argmax = {best / g.width(), best % g.width()};
  return s;
}

inline GridStats grid_stats(const RealGrid& g) {
  if (g.empty()) throw ConfigError("grid_stats: empty grid");
  GridStats s;
  s.max_magnitude = std::abs(g[0]);
  std::size_t best = 0;
  for (std::size_t i = 1; i < g.size(); ++i) {
    if (std::abs(g[i]) > s.max_magnitude) {
      s.max_magnitude = std::abs(g[i]);
      best = i;
    }
  }
  s.argmax = {best / g.width(), best % g.width()};
  return s;
}

}  // namespace sasinr

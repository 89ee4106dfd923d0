#pragma once

// Scene PSF construction and zero-padded FFT convolution with it.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <string>

#include "sasinr/array_sim.hpp"
#include "sasinr/beamformer.hpp"
#include "sasinr/error.hpp"
#include "sasinr/fft.hpp"
#include "sasinr/scene_grid.hpp"
#include "sasinr/waveform.hpp"

namespace sasinr {

/// Peak-normalized complex PSF; peak_index is the pixel treated as the
/// kernel origin by every convolution and deconvolution routine.
struct Psf {
  ComplexGrid grid;
  PixelIndex peak_index;

  /// Wraps an arbitrary kernel (e.g. loaded from disk): normalizes it to
  /// unit peak and records where the peak sits.
  static Psf from_grid(const ComplexGrid& g) {
    const auto stats = grid_stats(g);
    if (!(stats.max_magnitude > 0.0)) throw NumericError("PSF grid is all zero");
    return {normalize_peak(g), stats.argmax};
  }
};

/// Beamformed image of one unit scatterer at the exact scene center.
inline Psf build_psf(const ArrayGeometry& geom, const WaveformSpec& spec,
                     const BeamformOptions& opts = {}) {
  geom.validate();
  if (geom.grid_size % 2 == 0)
    throw ConfigError("build_psf: grid_size must be odd so a center pixel exists (got " +
                      std::to_string(geom.grid_size) + ")");
  const std::size_t c = (geom.grid_size - 1) / 2;
  RealGrid delta(geom.grid_size, geom.grid_size, 0.0);
  delta(c, c) = 1.0;
  const auto lambda = beamform(simulate(delta, geom, spec), opts);
  Psf psf = Psf::from_grid(lambda);
  if (psf.peak_index != PixelIndex{c, c})
    throw NumericError("build_psf: PSF peak at (" + std::to_string(psf.peak_index.row) + ", " +
                       std::to_string(psf.peak_index.col) + ") instead of the center pixel");
  psf.peak_index = {c, c};
  return psf;
}

/// Radius (pixels) beyond which every |PSF| value stays below threshold.
inline double support_radius(const Psf& psf, double threshold) {
  double radius = 0.0;
  for (std::size_t r = 0; r < psf.grid.height(); ++r)
    for (std::size_t c = 0; c < psf.grid.width(); ++c) {
      if (std::abs(psf.grid(r, c)) < threshold) continue;
      const double dr = static_cast<double>(r) - static_cast<double>(psf.peak_index.row);
      const double dc = static_cast<double>(c) - static_cast<double>(psf.peak_index.col);
      radius = std::max(radius, std::hypot(dr, dc));
    }
  return radius;
}

/// Linear 2-D convolution with a fixed PSF on a zero-padded FFT grid.
///
/// apply():   y[p] = sum_q x[q] K[p - q + c]          (c = PSF origin)
/// adjoint(): x[q] = sum_p g[p] conj(K[p - q + c])
///
/// A delta at pixel p maps to the PSF translated so its origin lands on p.
/// Optionally the kernel is cropped to the bounding box of
/// |K| > crop_threshold * peak before use. Not thread-safe: each instance
/// owns its FFT buffer.
class Convolver {
 public:
  explicit Convolver(const Psf& psf, double crop_threshold = 0.0)
      : height_(psf.grid.height()), width_(psf.grid.width()) {
    if (psf.grid.empty()) throw ConfigError("Convolver: empty PSF");
    std::size_t r0 = 0, r1 = height_ - 1, c0 = 0, c1 = width_ - 1;
    if (crop_threshold > 0.0) {
      const double cut = crop_threshold * grid_stats(psf.grid).max_magnitude;
      r0 = c0 = std::max(height_, width_);
      r1 = c1 = 0;
      for (std::size_t r = 0; r < height_; ++r)
        for (std::size_t c = 0; c < width_; ++c)
          if (std::abs(psf.grid(r, c)) > cut) {
            r0 = std::min(r0, r);
            r1 = std::max(r1, r);
            c0 = std::min(c0, c);
            c1 = std::max(c1, c);
          }
      r0 = std::min(r0, psf.peak_index.row);
      c0 = std::min(c0, psf.peak_index.col);
      r1 = std::max(r1, psf.peak_index.row);
      c1 = std::max(c1, psf.peak_index.col);
    }
    const std::size_t kh = r1 - r0 + 1;
    const std::size_t kw = c1 - c0 + 1;
    origin_ = {psf.peak_index.row - r0, psf.peak_index.col - c0};
    tf_ = std::make_unique<fft::Transform>(fft::good_size(height_ + kh - 1),
                                           fft::good_size(width_ + kw - 1));
    tf_->fill_zero();
    for (std::size_t r = 0; r < kh; ++r)
      for (std::size_t c = 0; c < kw; ++c) (*tf_)(r, c) = psf.grid(r0 + r, c0 + c);
    tf_->forward();
    spectrum_.assign(tf_->data().begin(), tf_->data().end());
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t padded_rows() const noexcept { return tf_->rows(); }
  std::size_t padded_cols() const noexcept { return tf_->cols(); }
  std::span<const cplx> kernel_spectrum() const noexcept { return spectrum_; }

  ComplexGrid apply(const ComplexGrid& x) {
    check(x.height(), x.width());
    load(x, 0, 0);
    tf_->forward();
    multiply([](cplx k) { return k; });
    tf_->inverse();
    return read(origin_.row, origin_.col);
  }

  ComplexGrid apply(const RealGrid& x) { return apply(to_complex(x)); }

  ComplexGrid adjoint(const ComplexGrid& g) {
    check(g.height(), g.width());
    load(g, origin_.row, origin_.col);
    tf_->forward();
    multiply([](cplx k) { return std::conj(k); });
    tf_->inverse();
    return read(0, 0);
  }

  /// Spectral inverse of apply() with a caller-chosen per-bin filter of the
  /// kernel spectrum (1/K for the inverse filter, a Wiener gain, ...).
  template <typename Filter>
  ComplexGrid spectral_deconvolve(const ComplexGrid& b, Filter&& filter) {
    check(b.height(), b.width());
    load(b, origin_.row, origin_.col);
    tf_->forward();
    multiply(filter);
    tf_->inverse();
    return read(0, 0);
  }

 private:
  void check(std::size_t h, std::size_t w) const {
    if (h != height_ || w != width_)
      throw ConfigError("convolution input is " + std::to_string(h) + "x" + std::to_string(w) +
                        " but the PSF is " + std::to_string(height_) + "x" +
                        std::to_string(width_));
  }

  void load(const ComplexGrid& g, std::size_t dr, std::size_t dc) {
    tf_->fill_zero();
    for (std::size_t r = 0; r < height_; ++r)
      for (std::size_t c = 0; c < width_; ++c) (*tf_)(r + dr, c + dc) = g(r, c);
  }

  template <typename Fn>
  void multiply(Fn&& fn) {
    auto buf = tf_->data();
    for (std::size_t k = 0; k < buf.size(); ++k) buf[k] *= fn(spectrum_[k]);
  }

  ComplexGrid read(std::size_t dr, std::size_t dc) const {
    ComplexGrid out(height_, width_);
    for (std::size_t r = 0; r < height_; ++r)
      for (std::size_t c = 0; c < width_; ++c) out(r, c) = (*tf_)(r + dr, c + dc);
    return out;
  }

  std::size_t height_;
  std::size_t width_;
  PixelIndex origin_;
  std::unique_ptr<fft::Transform> tf_;
  std::vector<cplx> spectrum_;
};

inline ComplexGrid convolve2d(const ComplexGrid& x, const Psf& psf) {
  return Convolver(psf).apply(x);
}

inline ComplexGrid convolve2d(const RealGrid& x, const Psf& psf) {
  return Convolver(psf).apply(x);
}

}  // namespace sasinr

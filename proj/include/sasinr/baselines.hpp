#pragma once

// Classical frequency-domain deconvolution baselines.

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "sasinr/error.hpp"
#include "sasinr/psf_conv.hpp"
#include "sasinr/scene_grid.hpp"

namespace sasinr {

/// |K| below this fraction of max |K| is raised to it before dividing.
inline constexpr double kInverseFilterFloor = 1e-8;

struct InverseFilterResult {
  ComplexGrid image;
  std::size_t floored_bins = 0;
};

/// b / K in the frequency domain, with the PSF origin at its peak (the same
/// convention as Convolver::apply). Bins with tiny |K| keep K's phase but use
/// the floored magnitude.
inline InverseFilterResult inverse_filter(const ComplexGrid& b, const Psf& psf) {
  Convolver conv(psf);
  double kmax = 0.0;
  for (const auto& k : conv.kernel_spectrum()) kmax = std::max(kmax, std::abs(k));
  const double floor = kInverseFilterFloor * kmax;
  InverseFilterResult out;
  for (const auto& k : conv.kernel_spectrum())
    if (std::abs(k) < floor) ++out.floored_bins;
  out.image = conv.spectral_deconvolve(b, [floor](cplx k) {
    const double mag = std::abs(k);
    if (mag >= floor) return 1.0 / k;
    const cplx phase = mag > 0.0 ? k / mag : cplx(1.0, 0.0);
    return 1.0 / (floor * phase);
  });
  return out;
}

struct WienerConfig {
  double noise_to_signal = 1e-2;  // K

  void validate() const {
    if (!(noise_to_signal >= 0.0)) throw ConfigError("wiener.noise_to_signal must be >= 0");
  }
};

/// conj(K) / (|K|^2 + NSR) in the frequency domain.
inline ComplexGrid wiener_filter(const ComplexGrid& b, const Psf& psf, const WienerConfig& cfg) {
  cfg.validate();
  Convolver conv(psf);
  const double nsr = cfg.noise_to_signal;
  return conv.spectral_deconvolve(b, [nsr](cplx k) {
    const double denom = std::norm(k) + nsr;
    return denom > 0.0 ? std::conj(k) / denom : cplx{};
  });
}

}  // namespace sasinr

#pragma once

// Analysis-by-synthesis deconvolution: the coordinate network proposes a
// scatterer map, the map is convolved with the PSF, and the network is fitted
// so that convolution matches the beamformed image under a complex L1 loss.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "sasinr/error.hpp"
#include "sasinr/inr_engine.hpp"
#include "sasinr/psf_conv.hpp"
#include "sasinr/scene_grid.hpp"

namespace sasinr {

enum class LossMode {
  complex,    // residual of the complex values
  magnitude,  // residual of |values| only
};

struct DeconvConfig {
  std::size_t iterations = 2000;
  double learning_rate = 1e-4;
  double kappa = 20.0;
  std::uint64_t seed = 0;
  double loss_smoothing_eps = 1e-12;
  std::size_t snapshot_every = 0;  // 0 disables snapshots
  double convergence_threshold = 1e-5;
  std::size_t convergence_window = 100;
  std::size_t num_features = 256;
  std::size_t hidden_width = 256;
  LossMode loss = LossMode::complex;

  void validate() const {
    if (iterations < 1) throw ConfigError("deconv.iterations must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("deconv.learning_rate must be > 0");
    if (!(loss_smoothing_eps > 0.0)) throw ConfigError("deconv.loss_smoothing_eps must be > 0");
    if (!(convergence_threshold > 0.0))
      throw ConfigError("deconv.convergence_threshold must be > 0");
    if (convergence_window < 1) throw ConfigError("deconv.convergence_window must be >= 1");
    if (num_features < 1 || hidden_width < 1)
      throw ConfigError("deconv.num_features and deconv.hidden_width must be >= 1");
  }
};

/// sum over pixels of sqrt(|a - b|^2 + eps).
inline double complex_l1(const ComplexGrid& a, const ComplexGrid& b, double eps) {
  if (!a.same_shape(b)) throw ConfigError("complex_l1: grid shapes differ");
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += std::sqrt(std::norm(a[i] - b[i]) + eps);
  return total;
}

struct LossAndGradient {
  double loss = 0.0;
  /// dL/dRe(estimate) + i dL/dIm(estimate), per pixel.
  ComplexGrid gradient;
};

inline LossAndGradient smoothed_l1_with_gradient(const ComplexGrid& estimate,
                                                 const ComplexGrid& target, double eps,
                                                 LossMode mode) {
  if (!estimate.same_shape(target)) throw ConfigError("loss: grid shapes differ");
  LossAndGradient out{0.0, ComplexGrid(estimate.height(), estimate.width())};
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    if (mode == LossMode::complex) {
      const cplx r = estimate[i] - target[i];
      const double s = std::sqrt(std::norm(r) + eps);
      out.loss += s;
      out.gradient[i] = r / s;
    } else {
      const double mag = std::abs(estimate[i]);
      const double r = mag - std::abs(target[i]);
      const double s = std::sqrt(r * r + eps);
      out.loss += s;
      out.gradient[i] = mag > 0.0 ? (r / s) * (estimate[i] / mag) : cplx{};
    }
  }
  return out;
}

struct DeconvResult {
  RealGrid sigma_hat;
  ComplexGrid b_estimated;
  std::vector<double> loss_history;
  bool converged = false;
  InrModel model;
};

/// Called every snapshot_every iterations with the 1-based iteration count
/// and the network output at that point.
using SnapshotFn = std::function<void(std::size_t, const RealGrid&)>;

/// Called after every loss evaluation with the 1-based iteration count.
using IterationFn = std::function<void(std::size_t, double)>;

namespace detail {

inline bool plateaued(const std::vector<double>& history, std::size_t window, double threshold) {
  if (history.size() < 2 * window) return false;
  const auto end = history.end();
  const double recent = std::accumulate(end - static_cast<std::ptrdiff_t>(window), end, 0.0);
  const double before = std::accumulate(end - static_cast<std::ptrdiff_t>(2 * window),
                                        end - static_cast<std::ptrdiff_t>(window), 0.0);
  if (before == 0.0) return recent == 0.0;
  return std::abs(recent - before) / std::abs(before) < threshold;
}

}  // namespace detail

/// Fits the network so that (network output) * PSF reproduces lambda_img.
/// Stops after cfg.iterations or when the mean loss over the last
/// convergence_window iterations changes by less than convergence_threshold
/// (relative) from the window before. Throws NonFiniteLossError on NaN/Inf.
inline DeconvResult run_deconv(const ComplexGrid& lambda_img, const Psf& psf,
                               const DeconvConfig& cfg, const SnapshotFn& on_snapshot = {},
                               const IterationFn& on_iteration = {}) {
  cfg.validate();
  if (!lambda_img.same_shape(psf.grid))
    throw ConfigError("run_deconv: image and PSF dimensions differ");
  const std::size_t h = lambda_img.height();
  const std::size_t w = lambda_img.width();

  DeconvResult result;
  result.model =
      init_seeded(cfg.seed, cfg.num_features, cfg.hidden_width, cfg.kappa, cfg.learning_rate);
  auto& model = result.model;
  Convolver conv(psf);
  const auto coords = normalized_grid_coords(h, w);
  const Matrix features = encode(coords, model.encoder);

  ForwardCache cache;
  RealGrid sigma(h, w);
  result.loss_history.reserve(cfg.iterations);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    sigma.storage() = forward(features, model.net, &cache);
    const auto estimate = conv.apply(sigma);
    const auto lg = smoothed_l1_with_gradient(estimate, lambda_img, cfg.loss_smoothing_eps, cfg.loss);
    if (on_iteration) on_iteration(it + 1, lg.loss);
    if (!std::isfinite(lg.loss)) throw NonFiniteLossError(it + 1, lg.loss);
    result.loss_history.push_back(lg.loss);

    if (on_snapshot && cfg.snapshot_every > 0 && (it + 1) % cfg.snapshot_every == 0)
      on_snapshot(it + 1, sigma);

    const auto back = conv.adjoint(lg.gradient);
    std::vector<double> output_grad(back.size());
    for (std::size_t i = 0; i < back.size(); ++i) output_grad[i] = back[i].real();
    adam_step(model.net, backward(output_grad, cache, model.net), model.adam);

    if (detail::plateaued(result.loss_history, cfg.convergence_window,
                          cfg.convergence_threshold)) {
      result.converged = true;
      break;
    }
  }

  sigma.storage() = forward(features, model.net);
  if (!all_finite(sigma))
    throw NonFiniteLossError(result.loss_history.size(), std::numeric_limits<double>::quiet_NaN());
  result.sigma_hat = sigma;
  result.b_estimated = conv.apply(sigma);
  return result;
}

/// PSNR reported for identical grids.
inline constexpr double kPsnrCap = 99.0;

struct Metrics {
  double mse = 0.0;
  double psnr = 0.0;  // dB, peak 1
  /// Per matched scatterer, Euclidean pixel distance between a recovered
  /// peak and its nearest unmatched true scatterer. Empty when the truth is
  /// not sparse.
  std::vector<double> localization_errors;
  std::vector<PixelIndex> recovered_peaks;

  double mean_localization_error() const {
    if (localization_errors.empty()) return 0.0;
    return std::accumulate(localization_errors.begin(), localization_errors.end(), 0.0) /
           static_cast<double>(localization_errors.size());
  }
  double max_localization_error() const {
    if (localization_errors.empty()) return 0.0;
    return *std::max_element(localization_errors.begin(), localization_errors.end());
  }
};

inline double mse(const RealGrid& a, const RealGrid& b) {
  if (!a.same_shape(b)) throw ConfigError("mse: grid shapes differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

inline double psnr_from_mse(double m) {
  if (m <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(m));
}

/// Local maxima (8-neighborhood, ties broken toward the earlier pixel),
/// strongest first.
inline std::vector<PixelIndex> local_maxima(const RealGrid& g, double min_value) {
  std::vector<std::pair<double, std::size_t>> peaks;
  const auto h = static_cast<std::ptrdiff_t>(g.height());
  const auto w = static_cast<std::ptrdiff_t>(g.width());
  for (std::ptrdiff_t r = 0; r < h; ++r)
    for (std::ptrdiff_t c = 0; c < w; ++c) {
      const double v = g(r, c);
      if (v <= min_value) continue;
      bool is_peak = true;
      for (std::ptrdiff_t dr = -1; dr <= 1 && is_peak; ++dr)
        for (std::ptrdiff_t dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const auto rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
          const double u = g(rr, cc);
          const bool earlier = rr * w + cc < r * w + c;
          if (u > v || (u == v && earlier)) {
            is_peak = false;
            break;
          }
        }
      if (is_peak) peaks.emplace_back(v, static_cast<std::size_t>(r * w + c));
    }
  std::stable_sort(peaks.begin(), peaks.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<PixelIndex> out;
  for (const auto& [v, idx] : peaks) out.push_back({idx / g.width(), idx % g.width()});
  return out;
}

/// Truths with at most this many scatterers get a localization report.
inline constexpr std::size_t kMaxSparseScatterers = 64;

inline Metrics evaluate_against_truth(const RealGrid& sigma_hat, const RealGrid& sigma_true) {
  if (!sigma_hat.same_shape(sigma_true))
    throw ConfigError("evaluate_against_truth: grid shapes differ");
  Metrics m;
  m.mse = mse(sigma_hat, sigma_true);
  m.psnr = psnr_from_mse(m.mse);

  const auto truth = local_maxima(sigma_true, 0.0);
  if (truth.empty() || truth.size() > kMaxSparseScatterers) return m;
  auto recovered = local_maxima(sigma_hat, -std::numeric_limits<double>::infinity());
  if (recovered.size() > truth.size()) recovered.resize(truth.size());
  m.recovered_peaks = recovered;

  std::vector<bool> used(truth.size(), false);
  for (const auto& p : recovered) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_k = 0;
    for (std::size_t k = 0; k < truth.size(); ++k) {
      if (used[k]) continue;
      const double d = std::hypot(static_cast<double>(p.row) - static_cast<double>(truth[k].row),
                                  static_cast<double>(p.col) - static_cast<double>(truth[k].col));
      if (d < best) {
        best = d;
        best_k = k;
      }
    }
    used[best_k] = true;
    m.localization_errors.push_back(best);
  }
  return m;
}

}  // namespace sasinr

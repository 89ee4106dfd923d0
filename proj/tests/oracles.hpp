#pragma once

// Independent reference implementations used by the tests. These are
// deliberately naive (nested loops, closed forms) and share no code with the
// library beyond the grid containers.

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <random>
#include <vector>

#include "sasinr/inr_engine.hpp"
#include "sasinr/scene_grid.hpp"

namespace oracle {

using sasinr::ComplexGrid;
using sasinr::cplx;
using sasinr::RealGrid;

/// y[p] = sum_q x[q] K[p - q + origin], restricted to the window of x.
inline ComplexGrid convolve(const ComplexGrid& x, const ComplexGrid& k, std::size_t orow,
                            std::size_t ocol) {
  const auto h = static_cast<long>(x.height());
  const auto w = static_cast<long>(x.width());
  const auto kh = static_cast<long>(k.height());
  const auto kw = static_cast<long>(k.width());
  ComplexGrid y(x.height(), x.width());
  for (long pr = 0; pr < h; ++pr)
    for (long pc = 0; pc < w; ++pc) {
      cplx acc{};
      for (long qr = 0; qr < h; ++qr)
        for (long qc = 0; qc < w; ++qc) {
          const long kr = pr - qr + static_cast<long>(orow);
          const long kc = pc - qc + static_cast<long>(ocol);
          if (kr < 0 || kr >= kh || kc < 0 || kc >= kw) continue;
          acc += x(qr, qc) * k(kr, kc);
        }
      y(pr, pc) = acc;
    }
  return y;
}

/// Scipy-style Tukey window evaluated from the closed form.
inline double tukey(std::size_t i, std::size_t n, double alpha) {
  const double x = static_cast<double>(i) / static_cast<double>(n - 1);
  if (alpha <= 0.0) return 1.0;
  if (x < alpha / 2.0) return 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * x / alpha));
  if (x > 1.0 - alpha / 2.0)
    return 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * (1.0 - x) / alpha));
  return 1.0;
}

inline double rel_l2(const ComplexGrid& a, const ComplexGrid& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a[i] - b[i]);
    den += std::norm(b[i]);
  }
  return std::sqrt(num / den);
}

inline double rel_l2(const RealGrid& a, const RealGrid& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

inline ComplexGrid random_complex(std::size_t h, std::size_t w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ComplexGrid g(h, w);
  for (auto& v : g.values()) v = {u(rng), u(rng)};
  return g;
}

inline RealGrid random_real(std::size_t h, std::size_t w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RealGrid g(h, w);
  for (auto& v : g.values()) v = u(rng);
  return g;
}

/// Sparse scene with `count` unit scatterers inside [lo, hi]^2, pairwise at
/// least min_sep pixels apart (Chebyshev distance).
inline RealGrid sparse_scene(std::size_t n, std::size_t count, std::size_t lo, std::size_t hi,
                             std::size_t min_sep, std::mt19937_64& rng) {
  RealGrid g(n, n, 0.0);
  std::uniform_int_distribution<std::size_t> pick(lo, hi);
  std::vector<std::pair<long, long>> placed;
  while (placed.size() < count) {
    const long r = static_cast<long>(pick(rng));
    const long c = static_cast<long>(pick(rng));
    bool ok = true;
    for (const auto& [pr, pc] : placed)
      ok = ok && std::max(std::abs(pr - r), std::abs(pc - c)) >= static_cast<long>(min_sep);
    if (!ok) continue;
    placed.emplace_back(r, c);
    g(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = 1.0;
  }
  return g;
}

/// Zero biases put every all-zero hidden row exactly on a ReLU kink, where
/// the loss is not differentiable. Finite-difference checks need a generic
/// point, so give the biases small random values first.
inline void jitter_biases(sasinr::MlpState& net, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (auto& layer : net.layers)
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = u(rng);
}

}  // namespace oracle

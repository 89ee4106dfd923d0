#pragma once

// Coordinate network: random Fourier feature encoding followed by a fixed
// four-layer MLP (ReLU, ReLU, ReLU, Sigmoid), hand-written reverse-mode
// gradients, and an Adam optimizer.
//
// Batches are split into fixed-size row blocks. Each block is evaluated
// independently and per-block gradient partials are reduced in block order,
// so results are bit-identical for any worker count. The last block is
// zero-padded to full size: the matrix kernels then see one shape only and
// every row takes the same arithmetic path, so a coordinate's output does not
// depend on how the batch was partitioned.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sasinr/error.hpp"
#include "sasinr/parallel.hpp"
#include "sasinr/scene_grid.hpp"

namespace sasinr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr std::size_t kNumLayers = 4;
/// Rows per block; a multiple of every GEMM panel height Eigen uses for
/// doubles (6, 12, 24, 48).
inline constexpr Eigen::Index kBlockRows = 240;

/// gamma(v) = [cos(2 pi kappa B v), sin(2 pi kappa B v)] with B fixed after
/// initialization.
struct FourierEncoder {
  Matrix b_matrix;  // m x 2, standard normal
  double kappa = 20.0;

  Eigen::Index num_features() const noexcept { return b_matrix.rows(); }
  Eigen::Index encoding_dim() const noexcept { return 2 * b_matrix.rows(); }
  bool operator==(const FourierEncoder& o) const {
    return kappa == o.kappa && b_matrix == o.b_matrix;
  }
};

struct Layer {
  Matrix weight;  // fan_in x fan_out
  Vector bias;    // fan_out
};

struct MlpState {
  std::array<Layer, kNumLayers> layers;

  Eigen::Index input_dim() const noexcept { return layers[0].weight.rows(); }
  Eigen::Index hidden_width() const noexcept { return layers[0].weight.cols(); }

  /// Weight and bias storage of every layer, in layer order.
  std::vector<std::span<double>> parameters() {
    std::vector<std::span<double>> out;
    for (auto& l : layers) {
      out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
      out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    }
    return out;
  }
  std::vector<std::span<const double>> parameters() const {
    std::vector<std::span<const double>> out;
    for (const auto& l : layers) {
      out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
      out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
    }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.size();
    return n;
  }

  bool same_shape(const MlpState& o) const {
    for (std::size_t i = 0; i < kNumLayers; ++i) {
      const auto& a = layers[i];
      const auto& b = o.layers[i];
      if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols() ||
          a.bias.size() != b.bias.size())
        return false;
    }
    return true;
  }

  MlpState zeros_like() const {
    MlpState z;
    for (std::size_t i = 0; i < kNumLayers; ++i) {
      z.layers[i].weight = Matrix::Zero(layers[i].weight.rows(), layers[i].weight.cols());
      z.layers[i].bias = Vector::Zero(layers[i].bias.size());
    }
    return z;
  }

  bool operator==(const MlpState& o) const {
    for (std::size_t i = 0; i < kNumLayers; ++i)
      if (!(layers[i].weight == o.layers[i].weight) || !(layers[i].bias == o.layers[i].bias))
        return false;
    return true;
  }

  /// Throws unless the layer chain is (in -> h -> h -> h -> 1).
  void validate() const {
    const auto h = hidden_width();
    for (std::size_t i = 0; i < kNumLayers; ++i) {
      const auto& l = layers[i];
      const Eigen::Index out = (i + 1 == kNumLayers) ? 1 : h;
      if (l.weight.cols() != out || l.bias.size() != out ||
          (i > 0 && l.weight.rows() != h))
        throw ConfigError("MlpState: layer " + std::to_string(i + 1) + " has inconsistent shape");
    }
  }
};

using MlpGradients = MlpState;

struct AdamState {
  MlpState first_moment;
  MlpState second_moment;
  std::uint64_t step = 0;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Maps pixel row/column to [-0.5, 0.5]^2 (x from column, y from row).
inline std::vector<Point2> normalized_grid_coords(std::size_t height, std::size_t width) {
  std::vector<Point2> out;
  out.reserve(height * width);
  const auto axis = [](std::size_t i, std::size_t n) {
    return n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) - 0.5 : 0.0;
  };
  for (std::size_t r = 0; r < height; ++r)
    for (std::size_t c = 0; c < width; ++c) out.push_back({axis(c, width), axis(r, height)});
  return out;
}

/// One row per coordinate: cos block (m columns) then sin block (m columns).
inline Matrix encode(std::span<const Point2> coords, const FourierEncoder& enc) {
  const Eigen::Index m = enc.num_features();
  Matrix out(static_cast<Eigen::Index>(coords.size()), 2 * m);
  const double scale = 2.0 * std::numbers::pi * enc.kappa;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const auto& v = coords[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m; ++j) {
      const double phase = scale * (enc.b_matrix(j, 0) * v.x + enc.b_matrix(j, 1) * v.y);
      out(i, j) = std::cos(phase);
      out(i, m + j) = std::sin(phase);
    }
  }
  return out;
}

inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Intermediates of one forward pass, needed by backward().
struct ForwardCache {
  struct Block {
    Eigen::Index first_row = 0;
    Eigen::Index rows = 0;         // valid rows; storage below is kBlockRows tall
    Matrix padded_input;           // set only for a short final block
    std::array<Matrix, 3> hidden;  // post-ReLU activations of layers 1-3
    Vector output;                 // post-Sigmoid, valid rows only
  };
  const Matrix* features = nullptr;
  std::vector<Block> blocks;
  Eigen::Index rows = 0;
};

namespace detail {

inline std::size_t block_count(Eigen::Index rows) {
  return static_cast<std::size_t>((rows + kBlockRows - 1) / kBlockRows);
}

inline void relu_inplace(Matrix& m) { m = m.cwiseMax(0.0); }

inline void forward_block(const Matrix& features, const MlpState& net, ForwardCache::Block& blk) {
  if (blk.rows < kBlockRows) {
    blk.padded_input = Matrix::Zero(kBlockRows, features.cols());
    blk.padded_input.topRows(blk.rows) = features.middleRows(blk.first_row, blk.rows);
  }
  const auto& L = net.layers;
  if (blk.rows < kBlockRows)
    blk.hidden[0].noalias() = blk.padded_input * L[0].weight;
  else
    blk.hidden[0].noalias() = features.middleRows(blk.first_row, kBlockRows) * L[0].weight;
  blk.hidden[0].rowwise() += L[0].bias.transpose();
  relu_inplace(blk.hidden[0]);
  for (std::size_t i = 1; i < 3; ++i) {
    blk.hidden[i].noalias() = blk.hidden[i - 1] * L[i].weight;
    blk.hidden[i].rowwise() += L[i].bias.transpose();
    relu_inplace(blk.hidden[i]);
  }
  Vector z = blk.hidden[2] * L[3].weight.col(0);
  blk.output.resize(blk.rows);
  for (Eigen::Index r = 0; r < blk.rows; ++r) blk.output(r) = stable_sigmoid(z(r) + L[3].bias(0));
}

}  // namespace detail

/// Network output in (0, 1) for each feature row. When cache is non-null it
/// receives the intermediates for a later backward().
inline std::vector<double> forward(const Matrix& features, const MlpState& net,
                                   ForwardCache* cache = nullptr) {
  net.validate();
  if (features.cols() != net.input_dim())
    throw ConfigError("forward: feature width " + std::to_string(features.cols()) +
                      " does not match network input " + std::to_string(net.input_dim()));
  const Eigen::Index rows = features.rows();
  const std::size_t nblocks = detail::block_count(rows);
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.features = &features;
  c.rows = rows;
  c.blocks.assign(nblocks, {});
  parallel_for(nblocks, [&](std::size_t b) {
    auto& blk = c.blocks[b];
    blk.first_row = static_cast<Eigen::Index>(b) * kBlockRows;
    blk.rows = std::min(kBlockRows, rows - blk.first_row);
    detail::forward_block(features, net, blk);
  });
  std::vector<double> out(static_cast<std::size_t>(rows));
  for (const auto& blk : c.blocks)
    for (Eigen::Index r = 0; r < blk.output.size(); ++r)
      out[static_cast<std::size_t>(blk.first_row + r)] = blk.output(r);
  if (!cache) c.features = nullptr;
  return out;
}

/// Gradients of a scalar loss with respect to every weight and bias, given
/// dLoss/dOutput for each row of the cached forward pass. B (the Fourier
/// matrix) is fixed and receives no gradient. ReLU'(0) = 0.
inline MlpGradients backward(std::span<const double> output_grad, const ForwardCache& cache,
                             const MlpState& net) {
  if (!cache.features || cache.blocks.empty())
    throw ConfigError("backward: no cached forward pass");
  if (static_cast<Eigen::Index>(output_grad.size()) != cache.rows)
    throw ConfigError("backward: got " + std::to_string(output_grad.size()) +
                      " output gradients for a batch of " + std::to_string(cache.rows));
  if (cache.features->cols() != net.input_dim() ||
      cache.blocks.front().hidden[0].cols() != net.hidden_width())
    throw ConfigError("backward: cached intermediates do not match the network");

  const auto& L = net.layers;
  std::vector<MlpGradients> partial(cache.blocks.size());
  parallel_for(cache.blocks.size(), [&](std::size_t b) {
    const auto& blk = cache.blocks[b];
    auto& g = partial[b];
    g = net.zeros_like();

    Vector dz = Vector::Zero(kBlockRows);  // padded rows stay zero
    for (Eigen::Index r = 0; r < blk.rows; ++r) {
      const double y = blk.output(r);
      dz(r) = output_grad[static_cast<std::size_t>(blk.first_row + r)] * y * (1.0 - y);
    }
    g.layers[3].weight.col(0).noalias() = blk.hidden[2].transpose() * dz;
    g.layers[3].bias(0) = dz.sum();

    Matrix delta = dz * L[3].weight.col(0).transpose();  // d/d(hidden[2])
    for (int i = 2; i >= 0; --i) {
      delta = delta.cwiseProduct((blk.hidden[i].array() > 0.0).cast<double>().matrix());
      if (i > 0)
        g.layers[i].weight.noalias() = blk.hidden[i - 1].transpose() * delta;
      else if (blk.rows < kBlockRows)
        g.layers[i].weight.noalias() = blk.padded_input.transpose() * delta;
      else
        g.layers[i].weight.noalias() =
            cache.features->middleRows(blk.first_row, kBlockRows).transpose() * delta;
      g.layers[i].bias = delta.colwise().sum().transpose();
      if (i > 0) delta = delta * L[i].weight.transpose();
    }
  });

  MlpGradients total = net.zeros_like();
  for (const auto& p : partial)
    for (std::size_t i = 0; i < kNumLayers; ++i) {
      total.layers[i].weight += p.layers[i].weight;
      total.layers[i].bias += p.layers[i].bias;
    }
  return total;
}

inline AdamState make_adam(const MlpState& net, double learning_rate) {
  return {net.zeros_like(), net.zeros_like(), 0, learning_rate, 0.9, 0.999, 1e-8};
}

/// Bias-corrected Adam update of params in place.
inline void adam_step(MlpState& params, const MlpGradients& grads, AdamState& state) {
  if (!params.same_shape(grads) || !params.same_shape(state.first_moment) ||
      !params.same_shape(state.second_moment))
    throw ConfigError("adam_step: parameter, gradient, and moment shapes disagree");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  auto p = params.parameters();
  const auto g = grads.parameters();
  auto m = state.first_moment.parameters();
  auto v = state.second_moment.parameters();
  for (std::size_t k = 0; k < p.size(); ++k)
    for (std::size_t i = 0; i < p[k].size(); ++i) {
      const double gi = g[k][i];
      m[k][i] = state.beta1 * m[k][i] + (1.0 - state.beta1) * gi;
      v[k][i] = state.beta2 * v[k][i] + (1.0 - state.beta2) * gi * gi;
      const double mhat = m[k][i] / c1;
      const double vhat = v[k][i] / c2;
      p[k][i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
}

struct InrModel {
  FourierEncoder encoder;
  MlpState net;
  AdamState adam;
  std::uint64_t seed = 0;
};

/// Seeded initialization: B ~ N(0, 1), weights ~ U(-1/sqrt(fan_in),
/// 1/sqrt(fan_in)), zero biases.
inline InrModel init_seeded(std::uint64_t seed, std::size_t num_features, std::size_t hidden,
                            double kappa, double learning_rate = 1e-4) {
  if (num_features < 1 || hidden < 1)
    throw ConfigError("init_seeded: feature count and hidden width must be >= 1");
  std::mt19937_64 rng(seed);
  InrModel model;
  model.seed = seed;
  model.encoder.kappa = kappa;
  const auto m = static_cast<Eigen::Index>(num_features);
  const auto h = static_cast<Eigen::Index>(hidden);
  model.encoder.b_matrix.resize(m, 2);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) model.encoder.b_matrix(i, j) = normal(rng);

  const std::array<std::array<Eigen::Index, 2>, kNumLayers> shapes{
      {{2 * m, h}, {h, h}, {h, h}, {h, 1}}};
  for (std::size_t l = 0; l < kNumLayers; ++l) {
    const auto [fan_in, fan_out] = shapes[l];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> uniform(-bound, bound);
    auto& layer = model.net.layers[l];
    layer.weight.resize(fan_in, fan_out);
    for (Eigen::Index r = 0; r < fan_in; ++r)
      for (Eigen::Index c = 0; c < fan_out; ++c) layer.weight(r, c) = uniform(rng);
    layer.bias = Vector::Zero(fan_out);
  }
  model.adam = make_adam(model.net, learning_rate);
  return model;
}

}  // namespace sasinr

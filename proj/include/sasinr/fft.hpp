#pragma once

// Thin RAII layer over FFTW. Plans are built with FFTW_ESTIMATE so the
// chosen algorithm, and therefore every rounding, is reproducible run to run.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <new>
#include <span>
#include <utility>

namespace sasinr::fft {

using cplx = std::complex<double>;

// FFTW's planner is not thread-safe; execution is.
inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

/// Smallest n >= target whose only prime factors are 2, 3, 5, 7.
inline std::size_t good_size(std::size_t target) {
  if (target <= 1) return 1;
  for (std::size_t n = target;; ++n) {
    std::size_t r = n;
    for (std::size_t p : {2u, 3u, 5u, 7u})
      while (r % p == 0) r /= p;
    if (r == 1) return n;
  }
}

inline std::size_t next_pow2(std::size_t target) {
  std::size_t n = 1;
  while (n < target) n <<= 1;
  return n;
}

/// In-place complex transform of fixed shape (1-D or 2-D) with its own
/// aligned buffer. inverse() includes the 1/N normalization.
class Transform {
 public:
  Transform(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {
    const std::size_t n = rows * cols;
    buffer_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    if (!buffer_) throw std::bad_alloc();
    std::lock_guard lock(planner_mutex());
    if (rows == 1) {
      forward_ = fftw_plan_dft_1d(static_cast<int>(cols), buffer_, buffer_, FFTW_FORWARD,
                                  FFTW_ESTIMATE);
      backward_ = fftw_plan_dft_1d(static_cast<int>(cols), buffer_, buffer_, FFTW_BACKWARD,
                                   FFTW_ESTIMATE);
    } else {
      forward_ = fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols), buffer_,
                                  buffer_, FFTW_FORWARD, FFTW_ESTIMATE);
      backward_ = fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols), buffer_,
                                   buffer_, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
  }

  explicit Transform(std::size_t n) : Transform(1, n) {}

  Transform(const Transform&) = delete;
  Transform& operator=(const Transform&) = delete;

  ~Transform() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
    fftw_free(buffer_);
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return rows_ * cols_; }

  std::span<cplx> data() noexcept { return {reinterpret_cast<cplx*>(buffer_), size()}; }
  std::span<const cplx> data() const noexcept {
    return {reinterpret_cast<const cplx*>(buffer_), size()};
  }
  cplx& operator()(std::size_t r, std::size_t c) noexcept { return data()[r * cols_ + c]; }

  void fill_zero() noexcept {
    for (auto& v : data()) v = cplx{};
  }

  void forward() noexcept { fftw_execute(forward_); }

  void inverse() noexcept {
    fftw_execute(backward_);
    const double scale = 1.0 / static_cast<double>(size());
    for (auto& v : data()) v *= scale;
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  fftw_complex* buffer_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

/// Per-thread cache of 1-D transforms keyed by length.
inline Transform& cached_1d(std::size_t n) {
  thread_local std::map<std::size_t, std::unique_ptr<Transform>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<Transform>(n);
  return *slot;
}

}  // namespace sasinr::fft

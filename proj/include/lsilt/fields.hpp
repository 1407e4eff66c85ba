#pragma once

// Dense 2-D grids and the frequency-domain convolution shared by the
// lithography and level-set code. Storage is row-major, x is the column
// index and y the row index: value(x, y) lives at y * width + x.

#include <algorithm>
#include <complex>
#include <cstdlib>
#include <cstddef>
#include <cstdint>
#include <new>
#include <ranges>
#include <span>
#include <string>
#include <vector>

#include "lsilt/error.hpp"

namespace lsilt {

/// 64-byte aligned storage so FFT plans can use their SIMD codelets on any grid.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlignment); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

template <typename T>
class Grid {
 public:
  using value_type = T;
  using storage_type = std::vector<T, AlignedAllocator<T>>;

  Grid() = default;

  Grid(int width, int height, T fill = T{}) : width_(width), height_(height) {
    if (width < 0 || height < 0) throw InvalidArgument("grid dimensions must be non-negative");
    values_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  template <std::ranges::sized_range Range>
  Grid(int width, int height, const Range& values) : Grid(width, height) {
    if (std::size(values) != values_.size()) throw InvalidArgument("value count does not match grid dimensions");
    std::size_t i = 0;
    for (const auto& v : values) values_[i++] = static_cast<T>(v);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  T& operator()(int x, int y) noexcept { return values_[index(x, y)]; }
  const T& operator()(int x, int y) const noexcept { return values_[index(x, y)]; }
  T& operator[](std::size_t i) noexcept { return values_[i]; }
  const T& operator[](std::size_t i) const noexcept { return values_[i]; }

  bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }
  T* data() noexcept { return values_.data(); }
  const T* data() const noexcept { return values_.data(); }

  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  template <typename U>
  bool same_shape(const Grid<U>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  bool operator==(const Grid& other) const = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  storage_type values_;
};

using ScalarField = Grid<double>;
using ComplexField = Grid<std::complex<double>>;
/// Values are exactly 0 or 1.
using BinaryGrid = Grid<std::uint8_t>;

template <typename A, typename B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw InvalidArgument(std::string(what) + ": dimension mismatch (" + std::to_string(a.width()) + "x" +
                          std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                          std::to_string(b.height()) + ")");
  }
}

/// Throws InvalidArgument if any value is not 0 or 1.
void require_binary(const BinaryGrid& grid);

ScalarField to_scalar(const BinaryGrid& grid);

/// Index of the first non-finite value, or -1.
std::ptrdiff_t first_non_finite(const ScalarField& field);
std::ptrdiff_t first_non_finite(const ComplexField& field);

enum class Pad { zero, replicate };

/// out(x, y) = in(x - dx, y - dy); reads outside the grid follow `pad`.
template <typename T>
Grid<T> shift(const Grid<T>& field, int dx, int dy, Pad pad) {
  const int w = field.width();
  const int h = field.height();
  if (std::abs(dx) >= std::max(w, 1) || std::abs(dy) >= std::max(h, 1)) {
    throw InvalidArgument("shift magnitude must be smaller than the grid dimension");
  }
  Grid<T> out(w, h);
  for (int y = 0; y < h; ++y) {
    int sy = y - dy;
    const bool y_in = sy >= 0 && sy < h;
    if (!y_in && pad == Pad::zero) continue;
    sy = std::clamp(sy, 0, h - 1);
    for (int x = 0; x < w; ++x) {
      int sx = x - dx;
      if (sx < 0 || sx >= w) {
        if (pad == Pad::zero) continue;
        sx = std::clamp(sx, 0, w - 1);
      }
      out(x, y) = field(sx, sy);
    }
  }
  return out;
}

/// K x K complex kernel h_i with its coherent-system weight sigma_i.
struct OpticalKernel {
  int side = 0;
  std::vector<std::complex<double>> coeffs;  // row-major, side * side
  double weight = 0.0;

  std::complex<double> at(int x, int y) const { return coeffs[static_cast<std::size_t>(y) * side + x]; }
  /// Index of the kernel center; the center coefficient sits at offset (0, 0).
  int center() const noexcept { return side / 2; }
  bool operator==(const OpticalKernel&) const = default;
};

/// Owns forward/backward FFTW plans for one grid shape. Execution is thread-safe;
/// construction serializes on the FFTW planner.
class Fft2d {
 public:
  Fft2d(int width, int height);
  ~Fft2d();
  Fft2d(const Fft2d&) = delete;
  Fft2d& operator=(const Fft2d&) = delete;
  Fft2d(Fft2d&& other) noexcept;
  Fft2d& operator=(Fft2d&& other) noexcept;

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  void forward(ComplexField& field) const;
  /// Normalized inverse (divides by width * height).
  void inverse(ComplexField& field) const;

  ComplexField forward(const ScalarField& field) const;

 private:
  void check(const ComplexField& field) const;

  int width_ = 0;
  int height_ = 0;
  void* forward_plan_ = nullptr;
  void* inverse_plan_ = nullptr;
};

/// Kernel zero-embedded in a width x height grid, rotated so its center lands at (0, 0).
ComplexField embed_kernel(const OpticalKernel& kernel, int width, int height);

/// Spectrum of the embedded kernel.
ComplexField kernel_spectrum(const OpticalKernel& kernel, const Fft2d& fft);

/// Circular convolution of `mask` with `kernel` (center-aligned), computed in the frequency domain.
ComplexField convolve(const ScalarField& mask, const OpticalKernel& kernel);

}  // namespace lsilt

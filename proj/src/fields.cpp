#include "lsilt/fields.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <utility>

namespace lsilt {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

fftw_complex* as_fftw(std::complex<double>* p) { return reinterpret_cast<fftw_complex*>(p); }

}  // namespace

void require_binary(const BinaryGrid& grid) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] > 1) throw InvalidArgument("binary grid holds a value other than 0 or 1");
  }
}

ScalarField to_scalar(const BinaryGrid& grid) {
  ScalarField out(grid.width(), grid.height());
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = grid[i] ? 1.0 : 0.0;
  return out;
}

std::ptrdiff_t first_non_finite(const ScalarField& field) {
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (!std::isfinite(field[i])) return static_cast<std::ptrdiff_t>(i);
  }
  return -1;
}

std::ptrdiff_t first_non_finite(const ComplexField& field) {
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (!std::isfinite(field[i].real()) || !std::isfinite(field[i].imag())) return static_cast<std::ptrdiff_t>(i);
  }
  return -1;
}

Fft2d::Fft2d(int width, int height) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) throw InvalidArgument("FFT dimensions must be positive");
  // Plans are made on a scratch buffer with the same alignment as every Grid;
  // FFTW_ESTIMATE keeps plan selection (and therefore rounding) deterministic.
  ComplexField scratch(width, height);
  std::lock_guard lock(planner_mutex());
  forward_plan_ = fftw_plan_dft_2d(height, width, as_fftw(scratch.data()), as_fftw(scratch.data()), FFTW_FORWARD,
                                   FFTW_ESTIMATE);
  inverse_plan_ = fftw_plan_dft_2d(height, width, as_fftw(scratch.data()), as_fftw(scratch.data()), FFTW_BACKWARD,
                                   FFTW_ESTIMATE);
  if (forward_plan_ == nullptr || inverse_plan_ == nullptr) throw InvalidArgument("FFTW could not plan this grid size");
}

Fft2d::~Fft2d() {
  if (forward_plan_ == nullptr && inverse_plan_ == nullptr) return;
  std::lock_guard lock(planner_mutex());
  if (forward_plan_) fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  if (inverse_plan_) fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
}

Fft2d::Fft2d(Fft2d&& other) noexcept
    : width_(other.width_),
      height_(other.height_),
      forward_plan_(std::exchange(other.forward_plan_, nullptr)),
      inverse_plan_(std::exchange(other.inverse_plan_, nullptr)) {}

Fft2d& Fft2d::operator=(Fft2d&& other) noexcept {
  if (this != &other) {
    std::swap(width_, other.width_);
    std::swap(height_, other.height_);
    std::swap(forward_plan_, other.forward_plan_);
    std::swap(inverse_plan_, other.inverse_plan_);
  }
  return *this;
}

void Fft2d::check(const ComplexField& field) const {
  if (field.width() != width_ || field.height() != height_) {
    throw InvalidArgument("FFT plan does not match field dimensions");
  }
}

void Fft2d::forward(ComplexField& field) const {
  check(field);
  fftw_execute_dft(static_cast<fftw_plan>(forward_plan_), as_fftw(field.data()), as_fftw(field.data()));
}

void Fft2d::inverse(ComplexField& field) const {
  check(field);
  fftw_execute_dft(static_cast<fftw_plan>(inverse_plan_), as_fftw(field.data()), as_fftw(field.data()));
  const double scale = 1.0 / static_cast<double>(field.size());
  for (auto& v : field) v *= scale;
}

ComplexField Fft2d::forward(const ScalarField& field) const {
  ComplexField out(field.width(), field.height());
  for (std::size_t i = 0; i < field.size(); ++i) out[i] = field[i];
  forward(out);
  return out;
}

ComplexField embed_kernel(const OpticalKernel& kernel, int width, int height) {
  if (kernel.side <= 0 || kernel.coeffs.size() != static_cast<std::size_t>(kernel.side) * kernel.side) {
    throw InvalidArgument("kernel coefficient count does not match its side");
  }
  if (kernel.side > width || kernel.side > height) {
    throw InvalidArgument("kernel side " + std::to_string(kernel.side) + " exceeds grid " + std::to_string(width) +
                          "x" + std::to_string(height));
  }
  ComplexField out(width, height);
  const int c = kernel.center();
  for (int ky = 0; ky < kernel.side; ++ky) {
    const int y = ((ky - c) % height + height) % height;
    for (int kx = 0; kx < kernel.side; ++kx) {
      const int x = ((kx - c) % width + width) % width;
      out(x, y) += kernel.at(kx, ky);
    }
  }
  return out;
}

ComplexField kernel_spectrum(const OpticalKernel& kernel, const Fft2d& fft) {
  ComplexField spectrum = embed_kernel(kernel, fft.width(), fft.height());
  fft.forward(spectrum);
  return spectrum;
}

ComplexField convolve(const ScalarField& mask, const OpticalKernel& kernel) {
  const Fft2d fft(mask.width(), mask.height());
  const ComplexField h = kernel_spectrum(kernel, fft);
  ComplexField out = fft.forward(mask);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= h[i];
  fft.inverse(out);
  return out;
}

}  // namespace lsilt

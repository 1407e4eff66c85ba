#pragma once

// Sum-of-coherent-systems lithography model: I = dose * sum_i sigma_i |M (*) h_i|^2,
// followed by a constant-threshold or sigmoid resist.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "lsilt/config.hpp"
#include "lsilt/fields.hpp"

namespace lsilt {

enum class Focus { focus, defocus };
enum class Corner { nominal, inner, outer };

std::string to_string(Focus f);
std::string to_string(Corner c);

struct KernelSet {
  Focus condition = Focus::focus;
  std::vector<OpticalKernel> kernels;

  int side() const { return kernels.empty() ? 0 : kernels.front().side; }
  std::size_t count() const { return kernels.size(); }
  /// Non-empty, common side, finite coefficients, non-negative weights.
  void validate() const;
  bool operator==(const KernelSet&) const = default;
};

struct ProcessCondition {
  double dose = 1.0;
  Focus focus = Focus::focus;
  Corner label = Corner::nominal;

  static ProcessCondition nominal(const OptConfig& cfg = {}) { return {cfg.dose_nominal, Focus::focus, Corner::nominal}; }
  static ProcessCondition outer(const OptConfig& cfg = {}) { return {cfg.dose_outer, Focus::focus, Corner::outer}; }
  static ProcessCondition inner(const OptConfig& cfg = {}) { return {cfg.dose_inner, Focus::defocus, Corner::inner}; }
  void validate() const;
};

template <typename Field>
struct PrintTriple {
  Field nominal;
  Field inner;
  Field outer;
};

/// Kernel spectra of one KernelSet for a fixed grid shape. Immutable once built.
class KernelBank {
 public:
  /// One exposure of a mask: intensity plus the per-kernel coherent fields M (*) h_i,
  /// kept for the adjoint pass.
  struct Exposure {
    ScalarField intensity;
    std::vector<ComplexField> fields;
    double dose = 1.0;
  };

  KernelBank(KernelSet kernels, int width, int height);

  const KernelSet& kernels() const noexcept { return kernels_; }
  const Fft2d& fft() const noexcept { return fft_; }
  int width() const noexcept { return fft_.width(); }
  int height() const noexcept { return fft_.height(); }

  Exposure expose(const ComplexField& mask_spectrum, double dose) const;

  /// Adds the frequency-domain contribution of dL/dI for `exposure` into `acc`.
  /// finish_adjoint(acc) then yields dL/dM = 2 Re sum_i sigma_i dose h'_i (*) (dL/dI . conj(M (*) h_i)),
  /// where h'_i is h_i rotated by 180 degrees.
  void accumulate_adjoint(const Exposure& exposure, const ScalarField& dloss_dintensity, ComplexField& acc) const;
  ScalarField finish_adjoint(ComplexField acc) const;

 private:
  KernelSet kernels_;
  Fft2d fft_;
  std::vector<ComplexField> spectra_;
};

/// Focus and defocus banks sharing one grid shape.
class LithoSimulator {
 public:
  LithoSimulator(const KernelSet& focus, const KernelSet& defocus, int width, int height);

  const KernelBank& bank(Focus f) const noexcept { return f == Focus::focus ? focus_ : defocus_; }
  int width() const noexcept { return focus_.width(); }
  int height() const noexcept { return focus_.height(); }

  ComplexField spectrum(const ScalarField& mask) const;
  KernelBank::Exposure expose(const ComplexField& mask_spectrum, const ProcessCondition& cond) const;

 private:
  KernelBank focus_;
  KernelBank defocus_;
};

ScalarField aerial_intensity(const ScalarField& mask, const KernelSet& kernels, const ProcessCondition& cond);

/// 1 where I >= threshold.
BinaryGrid resist_hard(const ScalarField& intensity, double threshold);
double sigmoid(double intensity, double threshold, double steepness);
ScalarField resist_sigmoid(const ScalarField& intensity, double threshold, double steepness);

/// nominal: focus at dose 1; outer: focus at the raised dose; inner: defocus at the lowered dose.
PrintTriple<BinaryGrid> print_corners_hard(const ScalarField& mask, const KernelSet& focus, const KernelSet& defocus,
                                           const OptConfig& cfg);
PrintTriple<ScalarField> print_corners_sigmoid(const ScalarField& mask, const KernelSet& focus,
                                               const KernelSet& defocus, const OptConfig& cfg);
PrintTriple<BinaryGrid> print_corners_hard(const LithoSimulator& sim, const ScalarField& mask, const OptConfig& cfg);

/// Deterministic desk-scale kernels: a dominant Gaussian low-pass followed by
/// Hermite-Gaussian modes with geometrically decaying weights. The defocus set
/// is 1.25x wider. Each set is normalized so a fully lit mask images at 1.0.
std::pair<KernelSet, KernelSet> gen_synthetic_kernels(int side, int count, std::uint64_t seed);

/// DVLK1: "DVLK1\0", then focus and defocus sections of
/// u32 count, u32 side, and per kernel f64 weight + side*side (f64 re, f64 im), little-endian.
std::vector<std::uint8_t> encode_kernels(const KernelSet& focus, const KernelSet& defocus);
std::pair<KernelSet, KernelSet> decode_kernels(const std::vector<std::uint8_t>& bytes);
void save_kernels(const std::filesystem::path& path, const KernelSet& focus, const KernelSet& defocus);
std::pair<KernelSet, KernelSet> load_kernels(const std::filesystem::path& path);

}  // namespace lsilt

#include "lsilt/litho.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>

#include "lsilt/binary_io.hpp"

namespace lsilt {

std::string to_string(Focus f) { return f == Focus::focus ? "focus" : "defocus"; }

std::string to_string(Corner c) {
  switch (c) {
    case Corner::nominal:
      return "nominal";
    case Corner::inner:
      return "inner";
    case Corner::outer:
      return "outer";
  }
  return "?";
}

void KernelSet::validate() const {
  if (kernels.empty()) throw InvalidArgument("kernel set is empty");
  const int k = kernels.front().side;
  for (std::size_t i = 0; i < kernels.size(); ++i) {
    const auto& h = kernels[i];
    if (h.side != k) throw InvalidArgument("kernel " + std::to_string(i) + " has side " + std::to_string(h.side) +
                                           ", expected " + std::to_string(k));
    if (h.side <= 0 || h.coeffs.size() != static_cast<std::size_t>(h.side) * h.side) {
      throw InvalidArgument("kernel " + std::to_string(i) + " coefficient count does not match its side");
    }
    if (!(h.weight >= 0.0) || !std::isfinite(h.weight)) {
      throw InvalidArgument("kernel " + std::to_string(i) + " has a negative or non-finite weight");
    }
    for (const auto& c : h.coeffs) {
      if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) {
        throw InvalidArgument("kernel " + std::to_string(i) + " has a non-finite coefficient");
      }
    }
  }
}

void ProcessCondition::validate() const {
  if (!(dose > 0.0)) throw InvalidArgument("dose must be positive");
}

// ---------------------------------------------------------------------------
// KernelBank

KernelBank::KernelBank(KernelSet kernels, int width, int height) : kernels_(std::move(kernels)), fft_(width, height) {
  kernels_.validate();
  spectra_.reserve(kernels_.count());
  for (const auto& h : kernels_.kernels) spectra_.push_back(kernel_spectrum(h, fft_));
}

KernelBank::Exposure KernelBank::expose(const ComplexField& mask_spectrum, double dose) const {
  if (mask_spectrum.width() != width() || mask_spectrum.height() != height()) {
    throw InvalidArgument("mask dimensions do not match the kernel bank");
  }
  Exposure out;
  out.dose = dose;
  out.intensity = ScalarField(width(), height());
  out.fields.reserve(spectra_.size());
  for (std::size_t k = 0; k < spectra_.size(); ++k) {
    ComplexField field(width(), height());
    const ComplexField& h = spectra_[k];
    for (std::size_t i = 0; i < field.size(); ++i) field[i] = mask_spectrum[i] * h[i];
    fft_.inverse(field);
    const double w = dose * kernels_.kernels[k].weight;
    for (std::size_t i = 0; i < field.size(); ++i) out.intensity[i] += w * std::norm(field[i]);
    out.fields.push_back(std::move(field));
  }
  return out;
}

void KernelBank::accumulate_adjoint(const Exposure& exposure, const ScalarField& dloss_dintensity,
                                    ComplexField& acc) const {
  require_same_shape(exposure.intensity, dloss_dintensity, "adjoint");
  if (acc.empty()) acc = ComplexField(width(), height());
  require_same_shape(acc, dloss_dintensity, "adjoint accumulator");
  const int w = width();
  const int h = height();
  ComplexField work(w, h);
  for (std::size_t k = 0; k < spectra_.size(); ++k) {
    const ComplexField& field = exposure.fields[k];
    for (std::size_t i = 0; i < work.size(); ++i) work[i] = dloss_dintensity[i] * std::conj(field[i]);
    fft_.forward(work);
    // The 180-degree rotated kernel has spectrum H(-f).
    const ComplexField& spec = spectra_[k];
    const double weight = exposure.dose * kernels_.kernels[k].weight;
    for (int fy = 0; fy < h; ++fy) {
      const int ry = fy == 0 ? 0 : h - fy;
      for (int fx = 0; fx < w; ++fx) {
        const int rx = fx == 0 ? 0 : w - fx;
        acc(fx, fy) += weight * spec(rx, ry) * work(fx, fy);
      }
    }
  }
}

ScalarField KernelBank::finish_adjoint(ComplexField acc) const {
  fft_.inverse(acc);
  ScalarField out(acc.width(), acc.height());
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = 2.0 * acc[i].real();
  return out;
}

// ---------------------------------------------------------------------------
// LithoSimulator

namespace {

KernelSet with_condition(KernelSet set, Focus f) {
  set.condition = f;
  return set;
}

}  // namespace

LithoSimulator::LithoSimulator(const KernelSet& focus, const KernelSet& defocus, int width, int height)
    : focus_(with_condition(focus, Focus::focus), width, height),
      defocus_(with_condition(defocus, Focus::defocus), width, height) {}

ComplexField LithoSimulator::spectrum(const ScalarField& mask) const {
  if (mask.width() != width() || mask.height() != height()) {
    throw InvalidArgument("mask dimensions do not match the simulator");
  }
  return focus_.fft().forward(mask);
}

KernelBank::Exposure LithoSimulator::expose(const ComplexField& mask_spectrum, const ProcessCondition& cond) const {
  cond.validate();
  return bank(cond.focus).expose(mask_spectrum, cond.dose);
}

ScalarField aerial_intensity(const ScalarField& mask, const KernelSet& kernels, const ProcessCondition& cond) {
  cond.validate();
  if (kernels.condition != cond.focus) {
    throw InvalidArgument("kernel set is for " + to_string(kernels.condition) + " but the condition asks for " +
                          to_string(cond.focus));
  }
  if (kernels.side() > mask.width() || kernels.side() > mask.height()) {
    throw InvalidArgument("kernel side exceeds the mask dimensions");
  }
  const KernelBank bank(kernels, mask.width(), mask.height());
  return bank.expose(bank.fft().forward(mask), cond.dose).intensity;
}

BinaryGrid resist_hard(const ScalarField& intensity, double threshold) {
  BinaryGrid out(intensity.width(), intensity.height());
  for (std::size_t i = 0; i < intensity.size(); ++i) out[i] = intensity[i] >= threshold ? 1 : 0;
  return out;
}

double sigmoid(double intensity, double threshold, double steepness) {
  return 1.0 / (1.0 + std::exp(-steepness * (intensity - threshold)));
}

ScalarField resist_sigmoid(const ScalarField& intensity, double threshold, double steepness) {
  if (!(steepness > 0.0)) throw InvalidArgument("sigmoid steepness must be positive");
  ScalarField out(intensity.width(), intensity.height());
  for (std::size_t i = 0; i < intensity.size(); ++i) out[i] = sigmoid(intensity[i], threshold, steepness);
  return out;
}

PrintTriple<BinaryGrid> print_corners_hard(const LithoSimulator& sim, const ScalarField& mask, const OptConfig& cfg) {
  const ComplexField spec = sim.spectrum(mask);
  return {resist_hard(sim.expose(spec, ProcessCondition::nominal(cfg)).intensity, cfg.I_th),
          resist_hard(sim.expose(spec, ProcessCondition::inner(cfg)).intensity, cfg.I_th),
          resist_hard(sim.expose(spec, ProcessCondition::outer(cfg)).intensity, cfg.I_th)};
}

PrintTriple<BinaryGrid> print_corners_hard(const ScalarField& mask, const KernelSet& focus, const KernelSet& defocus,
                                           const OptConfig& cfg) {
  const LithoSimulator sim(focus, defocus, mask.width(), mask.height());
  return print_corners_hard(sim, mask, cfg);
}

PrintTriple<ScalarField> print_corners_sigmoid(const ScalarField& mask, const KernelSet& focus,
                                               const KernelSet& defocus, const OptConfig& cfg) {
  const LithoSimulator sim(focus, defocus, mask.width(), mask.height());
  const ComplexField spec = sim.spectrum(mask);
  return {resist_sigmoid(sim.expose(spec, ProcessCondition::nominal(cfg)).intensity, cfg.I_th, cfg.sigma_z),
          resist_sigmoid(sim.expose(spec, ProcessCondition::inner(cfg)).intensity, cfg.I_th, cfg.sigma_z),
          resist_sigmoid(sim.expose(spec, ProcessCondition::outer(cfg)).intensity, cfg.I_th, cfg.sigma_z)};
}

// ---------------------------------------------------------------------------
// Synthetic kernels

namespace {

double hermite(int n, double u) {
  double prev = 1.0;
  if (n == 0) return prev;
  double cur = 2.0 * u;
  for (int k = 1; k < n; ++k) {
    const double next = 2.0 * u * cur - 2.0 * k * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

// Mode orders (nx, ny) by total degree: (0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...
std::vector<std::pair<int, int>> mode_orders(int count) {
  std::vector<std::pair<int, int>> out;
  for (int degree = 0; static_cast<int>(out.size()) < count; ++degree) {
    for (int nx = degree; nx >= 0 && static_cast<int>(out.size()) < count; --nx) out.emplace_back(nx, degree - nx);
  }
  return out;
}

constexpr double kWidthFraction = 1.0 / 7.0;  // Gaussian width as a fraction of K
constexpr double kDefocusWidening = 1.25;
constexpr double kWeightDecay = 0.4;

KernelSet make_set(Focus condition, int side, int count, double width, double angle,
                   const std::vector<double>& phases) {
  KernelSet set;
  set.condition = condition;
  const auto orders = mode_orders(count);
  const int c = side / 2;
  const double ca = std::cos(angle);
  const double sa = std::sin(angle);
  for (int i = 0; i < count; ++i) {
    OpticalKernel h;
    h.side = side;
    h.coeffs.resize(static_cast<std::size_t>(side) * side);
    const auto [nx, ny] = orders[i];
    const std::complex<double> phase = std::polar(1.0, phases[i]);
    double norm2 = 0.0;
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        const double dx = x - c;
        const double dy = y - c;
        const double u = (ca * dx + sa * dy) / width;
        const double v = (-sa * dx + ca * dy) / width;
        const double amp = hermite(nx, u) * hermite(ny, v) * std::exp(-0.5 * (u * u + v * v));
        h.coeffs[static_cast<std::size_t>(y) * side + x] = amp * phase;
        norm2 += amp * amp;
      }
    }
    const double scale = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 0.0;
    for (auto& v : h.coeffs) v *= scale;
    h.weight = std::pow(kWeightDecay, i);
    set.kernels.push_back(std::move(h));
  }
  // A fully lit mask images at sum_i sigma_i |sum_r h_i(r)|^2; scale that to 1.
  double full = 0.0;
  for (const auto& h : set.kernels) {
    std::complex<double> dc = 0.0;
    for (const auto& v : h.coeffs) dc += v;
    full += h.weight * std::norm(dc);
  }
  for (auto& h : set.kernels) h.weight /= full;
  return set;
}

}  // namespace

std::pair<KernelSet, KernelSet> gen_synthetic_kernels(int side, int count, std::uint64_t seed) {
  if (side < 3 || side % 2 == 0) throw InvalidArgument("synthetic kernel side must be odd and >= 3");
  if (count < 1) throw InvalidArgument("synthetic kernel count must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double angle = unit(rng) * std::numbers::pi;
  std::vector<double> phases(count, 0.0);
  for (int i = 1; i < count; ++i) phases[i] = unit(rng) * 2.0 * std::numbers::pi;
  const double width = side * kWidthFraction;
  return {make_set(Focus::focus, side, count, width, angle, phases),
          make_set(Focus::defocus, side, count, width * kDefocusWidening, angle, phases)};
}

// ---------------------------------------------------------------------------
// DVLK1

namespace {

constexpr char kKernelMagic[] = "DVLK1";  // six bytes with the terminator

void encode_section(detail::ByteWriter& w, const KernelSet& set) {
  set.validate();
  w.u32(static_cast<std::uint32_t>(set.count()));
  w.u32(static_cast<std::uint32_t>(set.side()));
  for (const auto& h : set.kernels) {
    w.f64(h.weight);
    for (const auto& c : h.coeffs) {
      w.f64(c.real());
      w.f64(c.imag());
    }
  }
}

KernelSet decode_section(detail::ByteReader& r, Focus condition) {
  const std::size_t header_at = r.offset();
  const std::uint32_t count = r.u32("kernel count");
  const std::uint32_t side = r.u32("kernel side");
  if (count == 0) throw FormatError("kernel count must be >= 1", header_at);
  if (side == 0 || side > 65535) throw FormatError("invalid kernel side " + std::to_string(side), header_at + 4);
  const std::uint64_t per_kernel = 8 + 16ull * side * side;
  if (static_cast<std::uint64_t>(r.remaining()) < per_kernel * count) {
    r.need(static_cast<std::size_t>(per_kernel * count), "kernel section payload");
  }
  KernelSet set;
  set.condition = condition;
  set.kernels.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    OpticalKernel h;
    h.side = static_cast<int>(side);
    const std::size_t weight_at = r.offset();
    h.weight = r.f64("kernel weight");
    if (!(h.weight >= 0.0) || !std::isfinite(h.weight)) {
      throw FormatError("kernel weight must be finite and non-negative", weight_at);
    }
    h.coeffs.resize(static_cast<std::size_t>(side) * side);
    for (auto& c : h.coeffs) {
      const std::size_t at = r.offset();
      const double re = r.f64("coefficient");
      const double im = r.f64("coefficient");
      if (!std::isfinite(re) || !std::isfinite(im)) throw FormatError("non-finite kernel coefficient", at);
      c = {re, im};
    }
    set.kernels.push_back(std::move(h));
  }
  return set;
}

}  // namespace

std::vector<std::uint8_t> encode_kernels(const KernelSet& focus, const KernelSet& defocus) {
  detail::ByteWriter w;
  w.bytes(kKernelMagic, sizeof(kKernelMagic));
  encode_section(w, focus);
  encode_section(w, defocus);
  return std::move(w.buffer());
}

std::pair<KernelSet, KernelSet> decode_kernels(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes);
  r.expect_magic(kKernelMagic, sizeof(kKernelMagic));
  KernelSet focus = decode_section(r, Focus::focus);
  KernelSet defocus = decode_section(r, Focus::defocus);
  if (r.remaining() != 0) throw FormatError("unexpected trailing bytes after the defocus section", r.offset());
  return {std::move(focus), std::move(defocus)};
}

void save_kernels(const std::filesystem::path& path, const KernelSet& focus, const KernelSet& defocus) {
  detail::write_file(path, encode_kernels(focus, defocus));
}

std::pair<KernelSet, KernelSet> load_kernels(const std::filesystem::path& path) {
  return decode_kernels(detail::read_file(path));
}

}  // namespace lsilt

#include "lsilt/levelset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace lsilt {

void LevelSetField::validate() const {
  if (!(lower < 0.0 && upper > 0.0)) throw InvalidArgument("truncation bounds must satisfy lower < 0 < upper");
  if (const auto bad = first_non_finite(phi); bad >= 0) {
    throw NumericalError("level set value at (" + std::to_string(bad % phi.width()) + ", " +
                         std::to_string(bad / phi.width()) + ") is not finite");
  }
  for (std::size_t i = 0; i < phi.size(); ++i) {
    if (!(phi[i] >= lower && phi[i] <= upper)) {
      throw InvalidArgument("level set value at index " + std::to_string(i) + " lies outside the truncation bounds");
    }
  }
}

void ModulationField::validate() const {
  if (const auto bad = first_non_finite(m); bad >= 0) {
    throw NumericalError("modulation value at (" + std::to_string(bad % m.width()) + ", " +
                         std::to_string(bad / m.width()) + ") is not finite");
  }
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!(m[i] >= 0.0 && m[i] <= 1.0)) throw InvalidArgument("modulation values must lie in [0, 1]");
  }
}

std::pair<BinaryGrid, BinaryGrid> extract_boundaries(const BinaryGrid& mask) {
  require_binary(mask);
  const int w = mask.width();
  const int h = mask.height();
  BinaryGrid bh(w, h);
  BinaryGrid bv(w, h);
  if (w == 0 || h == 0) return {bh, bv};
  if (h > 1) {
    const BinaryGrid up = shift(mask, 0, -1, Pad::zero);
    const BinaryGrid down = shift(mask, 0, 1, Pad::zero);
    for (std::size_t i = 0; i < mask.size(); ++i) bh[i] = (mask[i] ^ up[i]) | (mask[i] ^ down[i]);
  } else {
    bh = mask;  // every lit pixel differs from the zero padding above and below
  }
  if (w > 1) {
    const BinaryGrid left = shift(mask, -1, 0, Pad::zero);
    const BinaryGrid right = shift(mask, 1, 0, Pad::zero);
    for (std::size_t i = 0; i < mask.size(); ++i) bv[i] = (mask[i] ^ left[i]) | (mask[i] ^ right[i]);
  } else {
    bv = mask;
  }
  return {bh, bv};
}

namespace {

constexpr double kFar = 1e15;

// Exact 1-D squared distance transform (lower envelope of parabolas). Entries at
// kFar are not sites; a line without sites is left at kFar.
void distance_1d(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z) {
  v.resize(n);
  z.resize(n + 1);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] >= kFar) continue;
    const double fq = f[q] + static_cast<double>(q) * q;
    double s = -std::numeric_limits<double>::infinity();
    while (k >= 0) {
      const int p = v[k];
      s = (fq - (f[p] + static_cast<double>(p) * p)) / (2.0 * (q - p));
      if (s > z[k]) break;
      --k;
    }
    if (k < 0) s = -std::numeric_limits<double>::infinity();
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  if (k < 0) {
    std::fill(d, d + n, kFar);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double dq = q - v[j];
    d[q] = dq * dq + f[v[j]];
  }
}

// Squared Euclidean distance from every pixel center to the nearest feature pixel center.
std::vector<double> squared_distance(const std::vector<std::uint8_t>& feature, int w, int h) {
  std::vector<double> grid(static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = feature[i] ? 0.0 : kFar;
  std::vector<double> col_in(h), col_out(h);
  std::vector<int> v;
  std::vector<double> z;
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) col_in[y] = grid[static_cast<std::size_t>(y) * w + x];
    distance_1d(col_in.data(), col_out.data(), h, v, z);
    for (int y = 0; y < h; ++y) grid[static_cast<std::size_t>(y) * w + x] = col_out[y];
  }
  std::vector<double> row(w);
  for (int y = 0; y < h; ++y) {
    double* line = grid.data() + static_cast<std::size_t>(y) * w;
    distance_1d(line, row.data(), w, v, z);
    std::copy(row.begin(), row.end(), line);
  }
  return grid;
}

}  // namespace

LevelSetField tsdf_from_mask(const BinaryGrid& mask, double upper, double lower) {
  require_binary(mask);
  if (!(lower < 0.0 && upper > 0.0)) throw InvalidArgument("truncation bounds must satisfy lower < 0 < upper");
  std::size_t lit = 0;
  for (const auto v : mask) lit += v;
  if (lit == 0 || lit == mask.size()) throw DegenerateInput("uniform mask has no boundary");

  const int w = mask.width();
  const int h = mask.height();
  const auto [bh, bv] = extract_boundaries(mask);
  // Boundary pixels of each phase are the distance sources for the other phase.
  std::vector<std::uint8_t> inside_sources(mask.size()), outside_sources(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const bool boundary = bh[i] || bv[i];
    inside_sources[i] = boundary && mask[i] == 1;
    outside_sources[i] = boundary && mask[i] == 0;
  }
  const std::vector<double> to_outside = squared_distance(outside_sources, w, h);
  const std::vector<double> to_inside = squared_distance(inside_sources, w, h);

  LevelSetField out{ScalarField(w, h), upper, lower};
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const double d = mask[i] ? -(std::sqrt(to_outside[i]) - 0.5) : std::sqrt(to_inside[i]) - 0.5;
    out.phi[i] = std::clamp(d, lower, upper);
  }
  return out;
}

BinaryGrid mask_from_phi(const ScalarField& phi) {
  BinaryGrid out(phi.width(), phi.height());
  for (std::size_t i = 0; i < phi.size(); ++i) out[i] = phi[i] <= 0.0 ? 1 : 0;
  return out;
}

GeometryGradient geometry_gradient(const ScalarField& phi) {
  const int w = phi.width();
  const int h = phi.height();
  GeometryGradient g{ScalarField(w, h), ScalarField(w, h), ScalarField(w, h), ScalarField(w, h), ScalarField(w, h)};
  if (w == 0 || h == 0) return g;
  for (int y = 0; y < h; ++y) {
    const int yu = std::min(y + 1, h - 1);
    const int yd = std::max(y - 1, 0);
    for (int x = 0; x < w; ++x) {
      const int xr = std::min(x + 1, w - 1);
      const int xl = std::max(x - 1, 0);
      const double c = phi(x, y);
      g.gx(x, y) = 0.5 * (phi(xr, y) - phi(xl, y));
      g.gy(x, y) = 0.5 * (phi(x, yu) - phi(x, yd));
      g.gxx(x, y) = phi(xr, y) + phi(xl, y) - 2.0 * c;
      g.gyy(x, y) = phi(x, yu) + phi(x, yd) - 2.0 * c;
      g.gxy(x, y) = 0.25 * ((phi(xr, yu) - phi(xl, yu)) - (phi(xr, yd) - phi(xl, yd)));
    }
  }
  return g;
}

ScalarField gradient_magnitude(const GeometryGradient& g) {
  ScalarField out(g.gx.width(), g.gx.height());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(g.gx[i] * g.gx[i] + g.gy[i] * g.gy[i]);
  return out;
}

ScalarField curvature(const GeometryGradient& g, const ModulationField& modulation, double lambda) {
  require_same_shape(g.gx, modulation.m, "curvature");
  ScalarField out(g.gx.width(), g.gx.height());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double gx = g.gx[i];
    const double gy = g.gy[i];
    const double num = g.gxx[i] * gy * gy - 2.0 * gy * gx * g.gxy[i] + g.gyy[i] * gx * gx;
    out[i] = lambda * modulation.m[i] * num / (gx * gx + gy * gy + kCurvatureGuard);
  }
  return out;
}

ScalarField curvature(const ScalarField& phi, const ModulationField& modulation, double lambda) {
  require_same_shape(phi, modulation.m, "curvature");
  return curvature(geometry_gradient(phi), modulation, lambda);
}

BinaryGrid heaviside(const ScalarField& phi) {
  BinaryGrid out(phi.width(), phi.height());
  for (std::size_t i = 0; i < phi.size(); ++i) out[i] = phi[i] >= 0.0 ? 1 : 0;
  return out;
}

double ahf(double phi, double epsilon) {
  return 0.5 * (1.0 + (2.0 / std::numbers::pi) * std::atan(phi / epsilon));
}

ScalarField ahf(const ScalarField& phi, double epsilon) {
  if (!(epsilon > 0.0)) throw InvalidArgument("AHF epsilon must be positive");
  ScalarField out(phi.width(), phi.height());
  for (std::size_t i = 0; i < phi.size(); ++i) out[i] = ahf(phi[i], epsilon);
  return out;
}

LevelSetField evolve_step(const LevelSetField& phi, const ScalarField& dphi_dt, double dt) {
  require_same_shape(phi.phi, dphi_dt, "evolve_step");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("time step must be positive and finite");
  if (const auto bad = first_non_finite(dphi_dt); bad >= 0) {
    const int x = static_cast<int>(bad % dphi_dt.width());
    const int y = static_cast<int>(bad / dphi_dt.width());
    throw NumericalError("non-finite update at pixel (" + std::to_string(x) + ", " + std::to_string(y) + ")");
  }
  LevelSetField out{ScalarField(phi.width(), phi.height()), phi.upper, phi.lower};
  for (std::size_t i = 0; i < dphi_dt.size(); ++i) {
    out.phi[i] = std::clamp(phi.phi[i] + dt * dphi_dt[i], phi.lower, phi.upper);
  }
  return out;
}

}  // namespace lsilt

#pragma once

// Level-set representation of a mask: phi <= 0 inside, phi > 0 outside,
// truncated to [lower, upper]. Distances are in pixels.

#include <utility>

#include "lsilt/fields.hpp"

namespace lsilt {

struct LevelSetField {
  ScalarField phi;
  double upper = 900.0;
  double lower = -100.0;

  int width() const noexcept { return phi.width(); }
  int height() const noexcept { return phi.height(); }
  /// lower < 0 < upper and every value within the bounds.
  void validate() const;
};

struct GeometryGradient {
  ScalarField gx, gy;
  ScalarField gxx, gyy, gxy;
};

/// Per-pixel curvature gate, values in [0, 1].
struct ModulationField {
  ScalarField m;

  static ModulationField ones(int width, int height) { return {ScalarField(width, height, 1.0)}; }
  void validate() const;
};

/// Horizontal (b_h, up/down shifts) and vertical (b_v, left/right shifts) shift-XOR boundary evidence.
std::pair<BinaryGrid, BinaryGrid> extract_boundaries(const BinaryGrid& mask);

/// Truncated signed distance of `mask`. The zero level sits midway between
/// opposite-phase pixel centers, so mask_from_phi(tsdf_from_mask(M)) == M.
LevelSetField tsdf_from_mask(const BinaryGrid& mask, double upper = 900.0, double lower = -100.0);

/// 1 where phi <= 0.
BinaryGrid mask_from_phi(const ScalarField& phi);
inline BinaryGrid mask_from_phi(const LevelSetField& ls) { return mask_from_phi(ls.phi); }

/// Central differences with replicate padding at the borders.
GeometryGradient geometry_gradient(const ScalarField& phi);
ScalarField gradient_magnitude(const GeometryGradient& g);

inline constexpr double kCurvatureGuard = 1e-8;

/// lambda * m * (phi_xx phi_y^2 - 2 phi_x phi_y phi_xy + phi_yy phi_x^2) / (phi_x^2 + phi_y^2 + guard),
/// i.e. lambda * m * |grad phi| * div(grad phi / |grad phi|).
ScalarField curvature(const GeometryGradient& g, const ModulationField& modulation, double lambda);
ScalarField curvature(const ScalarField& phi, const ModulationField& modulation, double lambda);

/// H(z) = 1 for z >= 0.
BinaryGrid heaviside(const ScalarField& phi);
double ahf(double phi, double epsilon);
/// 0.5 * (1 + (2/pi) atan(phi / epsilon)).
ScalarField ahf(const ScalarField& phi, double epsilon);

/// phi + dt * dphi_dt, clamped to the truncation bounds.
LevelSetField evolve_step(const LevelSetField& phi, const ScalarField& dphi_dt, double dt);

}  // namespace lsilt

#pragma once

namespace lsilt {

/// Optimizer hyperparameters. Defaults are the published DSO settings where
/// those exist; the stopping parameters and resist threshold are engineering choices.
struct OptConfig {
  double alpha = 1.0;      // ILT loss weight
  double beta = 7.5;       // PVBand loss weight
  double lambda = 0.9;     // curvature weight
  double sigma_z = 50.0;   // sigmoid resist steepness
  double I_th = 0.225;     // resist threshold
  double epsilon = 0.03;   // approximated Heaviside width
  double eta = 0.85;       // CFL number
  double D_u = 900.0;      // TSDF upper truncation
  double D_l = -100.0;     // TSDF lower truncation
  int max_iters = 100;
  double stop_rel_tol = 1e-4;
  int stop_patience = 5;
  bool use_curvature = true;
  int grid_side = 0;  // 0: take the size from the target

  double dose_nominal = 1.0;
  double dose_outer = 1.02;  // focus, +2% dose
  double dose_inner = 0.98;  // defocus, -2% dose

  /// Throws InvalidArgument when an invariant is violated.
  void validate() const;
};

}  // namespace lsilt

#pragma once

// Level-set mask optimization: ILT + PVBand losses, analytic gradients,
// curvature-regularized motion, CFL time stepping and Polak-Ribiere CG.

#include <optional>
#include <vector>

#include "lsilt/config.hpp"
#include "lsilt/levelset.hpp"
#include "lsilt/litho.hpp"
#include "lsilt/metrics.hpp"

namespace lsilt {

/// Sum of squared differences.
double ilt_loss(const ScalarField& printed, const BinaryGrid& target);
double pvb_loss(const ScalarField& inner, const ScalarField& outer, const BinaryGrid& target);

/// dL/dI for L = sum (Z - Z_t)^2 with a sigmoid resist: 2 (Z - Z_t) sigma_z Z (1 - Z).
ScalarField loss_intensity_gradient(const ScalarField& printed, const BinaryGrid& target, double sigma_z);

/// dL_ilt/dM. `printed` must be the sigmoid nominal print of `mask`.
ScalarField ilt_gradient(const ScalarField& mask, const ScalarField& printed, const BinaryGrid& target,
                         const KernelSet& kernels, const OptConfig& cfg);
/// dL_pvb/dM. `inner`/`outer` are the sigmoid corner prints of `mask`.
ScalarField pvb_gradient(const ScalarField& mask, const ScalarField& inner, const ScalarField& outer,
                         const BinaryGrid& target, const KernelSet& focus, const KernelSet& defocus,
                         const OptConfig& cfg);

/// alpha * g_ilt + beta * g_pvb.
ScalarField velocity(const ScalarField& g_ilt, const ScalarField& g_pvb, const OptConfig& cfg);

/// -v |grad phi| + kappa.
ScalarField motion_term(const ScalarField& v, const GeometryGradient& grad, const ScalarField& kappa);
ScalarField motion_term(const ScalarField& v, const LevelSetField& phi, const ScalarField& kappa);

struct TimeStep {
  double dt = 0.0;
  bool converged = false;  // max |v| == 0
};

/// dt = eta / max |v|.
TimeStep cfl_timestep(const ScalarField& v, double eta);

inline constexpr int kCgRestartPeriod = 50;

/// Polak-Ribiere direction d = -g + max(0, <g, g - g_prev> / <g_prev, g_prev>) d_prev.
/// Empty g_prev/d_prev (first iteration) or a zero <g_prev, g_prev> give steepest descent.
ScalarField cg_direction(const ScalarField& g, const ScalarField& g_prev, const ScalarField& d_prev);
double polak_ribiere(const ScalarField& g, const ScalarField& g_prev);

struct LossRecord {
  double l_ilt = 0.0;
  double l_pvb = 0.0;
  double l_dso = 0.0;
  double dt = 0.0;          // step taken from this iterate (0 for the last one)
  double max_v = 0.0;       // max |direction| used by the CFL rule
  double max_dphi = 0.0;    // max |phi_{i+1} - phi_i|
  double max_grad_phi = 0.0;
};

struct OptState {
  LevelSetField phi;
  int iter = 0;
  ScalarField prev_grad;
  ScalarField prev_dir;
  std::vector<LossRecord> loss_history;
};

struct OptimizationResult {
  BinaryGrid final_mask;
  LevelSetField final_phi;
  MetricsReport metrics;
  std::vector<LossRecord> loss_history;  // one record per evaluated iterate, phi_0 first
  int iters_run = 0;                     // evolution steps taken
  int best_iter = 0;
  double wall_time = 0.0;
};

/// One evaluated iterate: corner prints, losses and the combined velocity dL_DSO/dM.
struct Evaluation {
  double l_ilt = 0.0;
  double l_pvb = 0.0;
  double l_dso = 0.0;
  ScalarField velocity;
};

/// Forward model + losses + gradients for a binary mask, reusing one simulator.
class DsoObjective {
 public:
  DsoObjective(const LithoSimulator& sim, const BinaryGrid& target, const OptConfig& cfg);
  Evaluation evaluate(const BinaryGrid& mask, bool with_gradient = true) const;

 private:
  const LithoSimulator& sim_;
  const BinaryGrid& target_;
  OptConfig cfg_;
};

OptimizationResult optimize(const BinaryGrid& target, const std::optional<LevelSetField>& phi0,
                            const std::optional<ModulationField>& modulation, const KernelSet& focus,
                            const KernelSet& defocus, const OptConfig& cfg);
OptimizationResult optimize(const LithoSimulator& sim, const BinaryGrid& target,
                            const std::optional<LevelSetField>& phi0, const std::optional<ModulationField>& modulation,
                            const OptConfig& cfg);

/// Hard-resist metrics of `mask` against `target`.
MetricsReport evaluate_mask(const LithoSimulator& sim, const BinaryGrid& mask, const BinaryGrid& target,
                            const OptConfig& cfg);

struct ModulationCandidate {
  double delta_h = 0.0;
  double l_dso = 0.0;
};

struct ModulationSearchResult {
  ModulationField m_gt;
  double best_delta_h = 0.0;
  std::vector<ModulationCandidate> candidates;  // in sampling order
};

/// Offsets uniformly spaced over [-20, 20]; a single sample is 0.
std::vector<double> modulation_offsets(int num_samples);

/// For each offset dh, gates curvature with H(phi_gt + dh), evolves phi_gt for
/// eval_steps steps and scores the final L_DSO; returns the minimizing gate.
/// Ties go to the smallest |dh|, then the smallest dh.
ModulationSearchResult modulation_search(const LevelSetField& phi_gt, const BinaryGrid& target,
                                         const KernelSet& focus, const KernelSet& defocus, const OptConfig& cfg,
                                         int num_samples = 41, int eval_steps = 10);
ModulationSearchResult modulation_search(const LithoSimulator& sim, const LevelSetField& phi_gt,
                                         const BinaryGrid& target, const OptConfig& cfg, int num_samples = 41,
                                         int eval_steps = 10);

}  // namespace lsilt

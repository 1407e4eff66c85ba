#include "lsilt/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <tuple>

namespace lsilt {

void OptConfig::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw InvalidArgument("alpha and beta must be non-negative");
  if (alpha == 0.0 && beta == 0.0) throw InvalidArgument("alpha and beta cannot both be zero");
  if (!(eta > 0.0 && eta <= 1.0)) throw InvalidArgument("eta must lie in (0, 1]");
  if (!(sigma_z > 0.0)) throw InvalidArgument("sigma_z must be positive");
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
  if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be non-negative");
  if (!(D_l < 0.0 && D_u > 0.0)) throw InvalidArgument("truncation bounds must satisfy D_l < 0 < D_u");
  if (max_iters < 0) throw InvalidArgument("max_iters must be non-negative");
  if (stop_patience < 1) throw InvalidArgument("stop_patience must be >= 1");
  if (!(stop_rel_tol >= 0.0)) throw InvalidArgument("stop_rel_tol must be non-negative");
  if (!(dose_nominal > 0.0 && dose_inner > 0.0 && dose_outer > 0.0)) throw InvalidArgument("doses must be positive");
  if (grid_side < 0) throw InvalidArgument("grid_side must be non-negative");
}

double ilt_loss(const ScalarField& printed, const BinaryGrid& target) {
  require_same_shape(printed, target, "ilt_loss");
  double sum = 0.0;
  for (std::size_t i = 0; i < printed.size(); ++i) {
    const double d = printed[i] - target[i];
    sum += d * d;
  }
  return sum;
}

double pvb_loss(const ScalarField& inner, const ScalarField& outer, const BinaryGrid& target) {
  require_same_shape(inner, outer, "pvb_loss");
  return ilt_loss(inner, target) + ilt_loss(outer, target);
}

ScalarField loss_intensity_gradient(const ScalarField& printed, const BinaryGrid& target, double sigma_z) {
  require_same_shape(printed, target, "loss gradient");
  ScalarField out(printed.width(), printed.height());
  for (std::size_t i = 0; i < printed.size(); ++i) {
    const double z = printed[i];
    out[i] = 2.0 * (z - target[i]) * sigma_z * z * (1.0 - z);
  }
  return out;
}

ScalarField ilt_gradient(const ScalarField& mask, const ScalarField& printed, const BinaryGrid& target,
                         const KernelSet& kernels, const OptConfig& cfg) {
  require_same_shape(mask, printed, "ilt_gradient");
  require_same_shape(mask, target, "ilt_gradient");
  const KernelBank bank(kernels, mask.width(), mask.height());
  const auto exposure = bank.expose(bank.fft().forward(mask), cfg.dose_nominal);
  ComplexField acc;
  bank.accumulate_adjoint(exposure, loss_intensity_gradient(printed, target, cfg.sigma_z), acc);
  return bank.finish_adjoint(std::move(acc));
}

ScalarField pvb_gradient(const ScalarField& mask, const ScalarField& inner, const ScalarField& outer,
                         const BinaryGrid& target, const KernelSet& focus, const KernelSet& defocus,
                         const OptConfig& cfg) {
  require_same_shape(mask, inner, "pvb_gradient");
  require_same_shape(mask, outer, "pvb_gradient");
  require_same_shape(mask, target, "pvb_gradient");
  const LithoSimulator sim(focus, defocus, mask.width(), mask.height());
  const ComplexField spec = sim.spectrum(mask);
  const auto in_exp = sim.expose(spec, ProcessCondition::inner(cfg));
  const auto out_exp = sim.expose(spec, ProcessCondition::outer(cfg));
  ComplexField acc;
  sim.bank(Focus::defocus).accumulate_adjoint(in_exp, loss_intensity_gradient(inner, target, cfg.sigma_z), acc);
  sim.bank(Focus::focus).accumulate_adjoint(out_exp, loss_intensity_gradient(outer, target, cfg.sigma_z), acc);
  return sim.bank(Focus::focus).finish_adjoint(std::move(acc));
}

ScalarField velocity(const ScalarField& g_ilt, const ScalarField& g_pvb, const OptConfig& cfg) {
  require_same_shape(g_ilt, g_pvb, "velocity");
  ScalarField v(g_ilt.width(), g_ilt.height());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = cfg.alpha * g_ilt[i] + cfg.beta * g_pvb[i];
  return v;
}

ScalarField motion_term(const ScalarField& v, const GeometryGradient& grad, const ScalarField& kappa) {
  require_same_shape(v, grad.gx, "motion_term");
  require_same_shape(v, kappa, "motion_term");
  ScalarField out(v.width(), v.height());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double norm = std::sqrt(grad.gx[i] * grad.gx[i] + grad.gy[i] * grad.gy[i]);
    out[i] = -v[i] * norm + kappa[i];
  }
  return out;
}

ScalarField motion_term(const ScalarField& v, const LevelSetField& phi, const ScalarField& kappa) {
  return motion_term(v, geometry_gradient(phi.phi), kappa);
}

namespace {

double max_abs(const ScalarField& f) {
  double m = 0.0;
  for (const double v : f) m = std::max(m, std::abs(v));
  return m;
}

double dot(const ScalarField& a, const ScalarField& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TimeStep cfl_timestep(const ScalarField& v, double eta) {
  const double vmax = max_abs(v);
  if (vmax == 0.0) return {0.0, true};
  return {eta / vmax, false};
}

double polak_ribiere(const ScalarField& g, const ScalarField& g_prev) {
  require_same_shape(g, g_prev, "polak_ribiere");
  const double denom = dot(g_prev, g_prev);
  if (denom == 0.0) return 0.0;
  double num = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) num += g[i] * (g[i] - g_prev[i]);
  return std::max(0.0, num / denom);
}

ScalarField cg_direction(const ScalarField& g, const ScalarField& g_prev, const ScalarField& d_prev) {
  ScalarField d(g.width(), g.height());
  const bool first = g_prev.empty() || d_prev.empty();
  const double beta = first ? 0.0 : polak_ribiere(g, g_prev);
  if (!first) require_same_shape(g, d_prev, "cg_direction");
  for (std::size_t i = 0; i < g.size(); ++i) d[i] = -g[i] + (beta > 0.0 ? beta * d_prev[i] : 0.0);
  return d;
}

// ---------------------------------------------------------------------------
// DsoObjective

DsoObjective::DsoObjective(const LithoSimulator& sim, const BinaryGrid& target, const OptConfig& cfg)
    : sim_(sim), target_(target), cfg_(cfg) {
  if (target.width() != sim.width() || target.height() != sim.height()) {
    throw InvalidArgument("target dimensions do not match the simulator");
  }
}

Evaluation DsoObjective::evaluate(const BinaryGrid& mask, bool with_gradient) const {
  require_same_shape(mask, target_, "objective");
  const ComplexField spec = sim_.spectrum(to_scalar(mask));
  const auto nominal = sim_.expose(spec, ProcessCondition::nominal(cfg_));
  const auto inner = sim_.expose(spec, ProcessCondition::inner(cfg_));
  const auto outer = sim_.expose(spec, ProcessCondition::outer(cfg_));
  const ScalarField z = resist_sigmoid(nominal.intensity, cfg_.I_th, cfg_.sigma_z);
  const ScalarField z_in = resist_sigmoid(inner.intensity, cfg_.I_th, cfg_.sigma_z);
  const ScalarField z_out = resist_sigmoid(outer.intensity, cfg_.I_th, cfg_.sigma_z);

  Evaluation e;
  e.l_ilt = ilt_loss(z, target_);
  e.l_pvb = pvb_loss(z_in, z_out, target_);
  e.l_dso = cfg_.alpha * e.l_ilt + cfg_.beta * e.l_pvb;
  if (!with_gradient) return e;

  const auto& focus = sim_.bank(Focus::focus);
  const auto& defocus = sim_.bank(Focus::defocus);
  ScalarField g_ilt(mask.width(), mask.height());
  ScalarField g_pvb(mask.width(), mask.height());
  if (cfg_.alpha != 0.0) {
    ComplexField acc;
    focus.accumulate_adjoint(nominal, loss_intensity_gradient(z, target_, cfg_.sigma_z), acc);
    g_ilt = focus.finish_adjoint(std::move(acc));
  }
  if (cfg_.beta != 0.0) {
    ComplexField acc;
    defocus.accumulate_adjoint(inner, loss_intensity_gradient(z_in, target_, cfg_.sigma_z), acc);
    focus.accumulate_adjoint(outer, loss_intensity_gradient(z_out, target_, cfg_.sigma_z), acc);
    g_pvb = focus.finish_adjoint(std::move(acc));
  }
  e.velocity = velocity(g_ilt, g_pvb, cfg_);
  return e;
}

MetricsReport evaluate_mask(const LithoSimulator& sim, const BinaryGrid& mask, const BinaryGrid& target,
                            const OptConfig& cfg) {
  require_same_shape(mask, target, "evaluate_mask");
  const auto prints = print_corners_hard(sim, to_scalar(mask), cfg);
  MetricsReport r;
  r.l2 = l2_error(prints.nominal, target);
  r.pvband = pvband(prints.inner, prints.outer);
  r.shots = shot_count(mask);
  return r;
}

// ---------------------------------------------------------------------------
// Evolution

namespace {

struct Step {
  LevelSetField next;
  ScalarField direction;
  double dt = 0.0;
  double max_v = 0.0;
  double max_dphi = 0.0;
  double max_grad_phi = 0.0;
  bool converged = false;
};

// One CFL-limited evolution step along the CG direction built from velocity `g`.
Step take_step(const LevelSetField& phi, const ScalarField& g, const ScalarField& prev_g, const ScalarField& prev_d,
               int iter, const ModulationField& modulation, const OptConfig& cfg) {
  Step s;
  const bool restart = iter % kCgRestartPeriod == 0;
  s.direction = restart ? cg_direction(g, ScalarField{}, ScalarField{}) : cg_direction(g, prev_g, prev_d);
  const TimeStep ts = cfl_timestep(s.direction, cfg.eta);
  s.max_v = max_abs(s.direction);
  if (ts.converged) {
    s.converged = true;
    s.next = phi;
    return s;
  }
  const GeometryGradient grad = geometry_gradient(phi.phi);
  const ScalarField kappa = cfg.use_curvature ? curvature(grad, modulation, cfg.lambda)
                                              : ScalarField(phi.width(), phi.height());
  const ScalarField dphi = motion_term(s.direction, grad, kappa);
  s.max_grad_phi = max_abs(gradient_magnitude(grad));

  // The motion part alone moves phi by at most eta * max|grad phi|; the curvature
  // part is held to the same bound.
  double dt = ts.dt;
  const double max_rate = max_abs(dphi);
  if (max_rate > 0.0 && s.max_grad_phi > 0.0) dt = std::min(dt, cfg.eta * s.max_grad_phi / max_rate);
  if (max_rate == 0.0) {
    s.converged = true;
    s.next = phi;
    return s;
  }
  s.dt = dt;
  s.next = evolve_step(phi, dphi, dt);
  for (std::size_t i = 0; i < phi.phi.size(); ++i) {
    s.max_dphi = std::max(s.max_dphi, std::abs(s.next.phi[i] - phi.phi[i]));
  }
  return s;
}

void check_finite(const Evaluation& e, int iter) {
  if (!std::isfinite(e.l_ilt) || !std::isfinite(e.l_pvb) || !std::isfinite(e.l_dso)) {
    throw NumericalError("non-finite loss at iteration " + std::to_string(iter));
  }
}

void require_nonuniform(const BinaryGrid& target) {
  require_binary(target);
  std::size_t lit = 0;
  for (const auto v : target) lit += v;
  if (lit == 0 || lit == target.size()) throw DegenerateInput("target is uniform; nothing to optimize");
}

LevelSetField initial_phi(const BinaryGrid& target, const std::optional<LevelSetField>& phi0, const OptConfig& cfg) {
  if (!phi0) return tsdf_from_mask(target, cfg.D_u, cfg.D_l);
  require_same_shape(phi0->phi, target, "initial level set");
  phi0->validate();
  return *phi0;
}

ModulationField initial_modulation(const BinaryGrid& target, const std::optional<ModulationField>& m) {
  if (!m) return ModulationField::ones(target.width(), target.height());
  require_same_shape(m->m, target, "modulation");
  m->validate();
  return *m;
}

}  // namespace

OptimizationResult optimize(const LithoSimulator& sim, const BinaryGrid& target,
                            const std::optional<LevelSetField>& phi0, const std::optional<ModulationField>& modulation,
                            const OptConfig& cfg) {
  const auto started = std::chrono::steady_clock::now();
  cfg.validate();
  require_nonuniform(target);
  const ModulationField gate = initial_modulation(target, modulation);
  const DsoObjective objective(sim, target, cfg);

  OptState state;
  state.phi = initial_phi(target, phi0, cfg);
  LevelSetField best_phi = state.phi;
  double best = std::numeric_limits<double>::infinity();
  int best_iter = 0;
  int stall = 0;

  while (true) {
    const bool last = state.iter >= cfg.max_iters;
    const Evaluation e = objective.evaluate(mask_from_phi(state.phi), !last);
    check_finite(e, state.iter);

    LossRecord rec{e.l_ilt, e.l_pvb, e.l_dso};
    const double previous_best = best;
    if (e.l_dso < best) {
      best = e.l_dso;
      best_phi = state.phi;
      best_iter = state.iter;
    }
    bool stop = last;
    if (state.iter > 0) {
      const double rel = previous_best > 0.0 ? (previous_best - best) / previous_best : 0.0;
      stall = rel < cfg.stop_rel_tol ? stall + 1 : 0;
      if (stall >= cfg.stop_patience) stop = true;
    }
    if (stop) {
      state.loss_history.push_back(rec);
      break;
    }

    Step s = take_step(state.phi, e.velocity, state.prev_grad, state.prev_dir, state.iter, gate, cfg);
    rec.dt = s.dt;
    rec.max_v = s.max_v;
    rec.max_dphi = s.max_dphi;
    rec.max_grad_phi = s.max_grad_phi;
    state.loss_history.push_back(rec);
    if (s.converged) break;
    state.phi = std::move(s.next);
    state.prev_grad = e.velocity;
    state.prev_dir = std::move(s.direction);
    ++state.iter;
  }

  OptimizationResult result;
  result.final_phi = std::move(best_phi);
  result.final_mask = mask_from_phi(result.final_phi);
  result.loss_history = std::move(state.loss_history);
  result.iters_run = state.iter;
  result.best_iter = best_iter;
  result.metrics = evaluate_mask(sim, result.final_mask, target, cfg);
  result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  result.metrics.wall_time = result.wall_time;
  return result;
}

OptimizationResult optimize(const BinaryGrid& target, const std::optional<LevelSetField>& phi0,
                            const std::optional<ModulationField>& modulation, const KernelSet& focus,
                            const KernelSet& defocus, const OptConfig& cfg) {
  const LithoSimulator sim(focus, defocus, target.width(), target.height());
  return optimize(sim, target, phi0, modulation, cfg);
}

// ---------------------------------------------------------------------------
// Modulation search

std::vector<double> modulation_offsets(int num_samples) {
  if (num_samples < 1) throw InvalidArgument("num_samples must be >= 1");
  constexpr double kRange = 20.0;
  if (num_samples == 1) return {0.0};
  std::vector<double> out(num_samples);
  for (int i = 0; i < num_samples; ++i) out[i] = -kRange + 2.0 * kRange * i / (num_samples - 1);
  return out;
}

ModulationSearchResult modulation_search(const LithoSimulator& sim, const LevelSetField& phi_gt,
                                         const BinaryGrid& target, const OptConfig& cfg, int num_samples,
                                         int eval_steps) {
  cfg.validate();
  require_nonuniform(target);
  require_same_shape(phi_gt.phi, target, "modulation_search");
  phi_gt.validate();
  if (eval_steps < 0) throw InvalidArgument("eval_steps must be non-negative");
  OptConfig run_cfg = cfg;
  run_cfg.use_curvature = true;  // the gate only matters through the curvature term
  const DsoObjective objective(sim, target, run_cfg);

  ModulationSearchResult result;
  int best = -1;
  for (const double dh : modulation_offsets(num_samples)) {
    ScalarField shifted = phi_gt.phi;
    for (auto& v : shifted) v += dh;
    const ModulationField gate{to_scalar(heaviside(shifted))};

    LevelSetField phi = phi_gt;
    ScalarField prev_g, prev_d;
    for (int step = 0; step < eval_steps; ++step) {
      const Evaluation e = objective.evaluate(mask_from_phi(phi), true);
      check_finite(e, step);
      Step s = take_step(phi, e.velocity, prev_g, prev_d, step, gate, run_cfg);
      if (s.converged) break;
      phi = std::move(s.next);
      prev_g = e.velocity;
      prev_d = std::move(s.direction);
    }
    const Evaluation final_eval = objective.evaluate(mask_from_phi(phi), false);
    check_finite(final_eval, eval_steps);
    result.candidates.push_back({dh, final_eval.l_dso});

    const auto idx = static_cast<int>(result.candidates.size()) - 1;
    if (best < 0) {
      best = idx;
    } else {
      const auto& b = result.candidates[best];
      const auto& c = result.candidates.back();
      const auto key = [](const ModulationCandidate& m) { return std::make_tuple(m.l_dso, std::abs(m.delta_h), m.delta_h); };
      if (key(c) < key(b)) best = idx;
    }
  }
  result.best_delta_h = result.candidates[best].delta_h;
  ScalarField shifted = phi_gt.phi;
  for (auto& v : shifted) v += result.best_delta_h;
  result.m_gt = ModulationField{to_scalar(heaviside(shifted))};
  return result;
}

ModulationSearchResult modulation_search(const LevelSetField& phi_gt, const BinaryGrid& target,
                                         const KernelSet& focus, const KernelSet& defocus, const OptConfig& cfg,
                                         int num_samples, int eval_steps) {
  const LithoSimulator sim(focus, defocus, target.width(), target.height());
  return modulation_search(sim, phi_gt, target, cfg, num_samples, eval_steps);
}

}  // namespace lsilt

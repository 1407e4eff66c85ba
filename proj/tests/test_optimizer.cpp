#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "doctest.h"
#include "lsilt/levelset.hpp"
#include "lsilt/litho.hpp"
#include "lsilt/optimizer.hpp"
#include "oracles.hpp"

using namespace lsilt;

namespace {

BinaryGrid two_bars(int n) {
  BinaryGrid t(n, n);
  for (int y = n / 4; y < n / 4 + n / 8; ++y)
    for (int x = n / 8; x < 7 * n / 8; ++x) t(x, y) = 1;
  for (int y = n / 2; y < 7 * n / 8; ++y)
    for (int x = n / 3; x < n / 3 + n / 8; ++x) t(x, y) = 1;
  return t;
}

struct GradCase {
  ScalarField mask;
  BinaryGrid target;
  KernelSet focus, defocus;
};

GradCase grad_case(std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  auto [f, d] = gen_synthetic_kernels(9, 2, seed);
  return {gen::random_field(rng, n, n, 0.0, 1.0), gen::random_mask(rng, n, n), std::move(f), std::move(d)};
}

void check_against_fd(const ScalarField& analytic, const ScalarField& mask, const std::function<double(const ScalarField&)>& loss,
                      std::mt19937_64& rng, int samples) {
  constexpr double kStep = 1e-3;
  std::uniform_int_distribution<int> px(0, mask.width() - 1), py(0, mask.height() - 1);
  for (int s = 0; s < samples; ++s) {
    const int x = px(rng), y = py(rng);
    ScalarField plus = mask, minus = mask;
    plus(x, y) += kStep;
    minus(x, y) -= kStep;
    const double fd = (loss(plus) - loss(minus)) / (2 * kStep);
    const double a = analytic(x, y);
    INFO("pixel " << x << "," << y << " analytic " << a << " fd " << fd);
    if (std::abs(a) < 1e-9) {
      CHECK(std::abs(fd) <= 1e-6);
    } else {
      CHECK(std::abs(a - fd) / std::abs(a) <= 1e-3);
    }
  }
}

}  // namespace

TEST_CASE("ilt loss") {
  const BinaryGrid t(2, 2, std::vector<int>{1, 0, 0, 1});
  CHECK(ilt_loss(to_scalar(t), t) == 0.0);
  CHECK(ilt_loss(ScalarField(2, 2, 0.5), BinaryGrid(2, 2)) == 1.0);
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    const ScalarField z = gen::random_field(rng, 8, 8, 0.0, 1.0);
    const BinaryGrid zt = gen::random_mask(rng, 8, 8);
    CHECK(std::abs(ilt_loss(z, zt) - oracle::sum_sq_diff(z, zt)) <= 1e-12);
  }
}

TEST_CASE("pvb loss") {
  const BinaryGrid t(2, 2, std::vector<int>{1, 0, 0, 1});
  CHECK(pvb_loss(to_scalar(t), to_scalar(t), t) == 0.0);
  CHECK(pvb_loss(ScalarField(1, 1, 1.0), ScalarField(1, 1, 0.0), BinaryGrid(1, 1)) == 1.0);
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 10; ++trial) {
    const ScalarField zi = gen::random_field(rng, 8, 8, 0.0, 1.0), zo = gen::random_field(rng, 8, 8, 0.0, 1.0);
    const BinaryGrid zt = gen::random_mask(rng, 8, 8);
    CHECK(std::abs(pvb_loss(zi, zo, zt) - (oracle::sum_sq_diff(zi, zt) + oracle::sum_sq_diff(zo, zt))) <= 1e-12);
  }
}

TEST_CASE("gradients vanish when the prints equal the target") {
  const auto [f, d] = gen_synthetic_kernels(9, 2, 1);
  std::mt19937_64 rng(43);
  const BinaryGrid t = gen::random_mask(rng, 32, 32);
  const ScalarField m = gen::random_field(rng, 32, 32, 0.0, 1.0);
  const OptConfig cfg;
  for (double v : ilt_gradient(m, to_scalar(t), t, f, cfg)) CHECK(v == 0.0);
  for (double v : pvb_gradient(m, to_scalar(t), to_scalar(t), t, f, d, cfg)) CHECK(v == 0.0);
}

TEST_CASE("ilt gradient matches finite differences") {
  const OptConfig cfg;
  std::mt19937_64 rng(44);
  for (std::uint64_t seed : {1u, 2u}) {
    const GradCase c = grad_case(seed, 32);
    const ScalarField z = resist_sigmoid(aerial_intensity(c.mask, c.focus, ProcessCondition::nominal(cfg)), cfg.I_th,
                                         cfg.sigma_z);
    const ScalarField g = ilt_gradient(c.mask, z, c.target, c.focus, cfg);
    check_against_fd(g, c.mask, [&](const ScalarField& m) {
      return oracle::ilt_loss(m, c.target, c.focus, cfg.I_th, cfg.sigma_z);
    }, rng, 10);
  }
}

TEST_CASE("pvb gradient matches finite differences") {
  const OptConfig cfg;
  std::mt19937_64 rng(45);
  for (std::uint64_t seed : {3u, 4u}) {
    const GradCase c = grad_case(seed, 32);
    const auto z = print_corners_sigmoid(c.mask, c.focus, c.defocus, cfg);
    const ScalarField g = pvb_gradient(c.mask, z.inner, z.outer, c.target, c.focus, c.defocus, cfg);
    check_against_fd(g, c.mask, [&](const ScalarField& m) {
      return oracle::pvb_loss(m, c.target, c.focus, c.defocus, cfg.I_th, cfg.sigma_z);
    }, rng, 10);
  }
}

TEST_CASE("adjoint is linear in the intensity sensitivity") {
  const auto [f, d] = gen_synthetic_kernels(9, 3, 5);
  const KernelBank bank(f, 32, 32);
  std::mt19937_64 rng(46);
  const ScalarField m = gen::random_field(rng, 32, 32, 0.0, 1.0);
  const auto exposure = bank.expose(bank.fft().forward(m), 1.0);
  const ScalarField dldi = gen::random_field(rng, 32, 32);
  ScalarField scaled = dldi;
  for (auto& v : scaled) v *= -2.5;
  ComplexField a, b;
  bank.accumulate_adjoint(exposure, dldi, a);
  bank.accumulate_adjoint(exposure, scaled, b);
  const ScalarField ga = bank.finish_adjoint(a), gb = bank.finish_adjoint(b);
  for (std::size_t i = 0; i < ga.size(); ++i) CHECK(gb[i] == doctest::Approx(-2.5 * ga[i]).epsilon(1e-12).scale(1e-12));
}

TEST_CASE("velocity") {
  std::mt19937_64 rng(47);
  const ScalarField gi = gen::random_field(rng, 8, 8), gp = gen::random_field(rng, 8, 8);
  OptConfig cfg;
  cfg.beta = 0.0;
  CHECK(velocity(gi, gp, cfg) == gi);
  cfg.alpha = 0.0;
  cfg.beta = 7.5;
  CHECK(velocity(gi, ScalarField(8, 8, 1.0), cfg) == ScalarField(8, 8, 7.5));
  cfg.alpha = 1.0;
  const ScalarField v = velocity(gi, gp, cfg);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(v[i] - (gi[i] + 7.5 * gp[i])) <= 1e-15);
}

TEST_CASE("motion term") {
  const LevelSetField zero{ScalarField(8, 8), 900, -100};
  for (double v : motion_term(ScalarField(8, 8), zero, ScalarField(8, 8))) CHECK(v == 0.0);

  LevelSetField plane{ScalarField(8, 8), 900, -100};
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) plane.phi(x, y) = x;
  const ScalarField m = motion_term(ScalarField(8, 8, 2.0), plane, ScalarField(8, 8));
  for (int y = 0; y < 8; ++y)
    for (int x = 1; x < 7; ++x) CHECK(m(x, y) == -2.0);

  std::mt19937_64 rng(48);
  const ScalarField phi = gen::random_field(rng, 16, 16, -5, 5);
  const ScalarField v = gen::random_field(rng, 16, 16), k = gen::random_field(rng, 16, 16);
  const ScalarField out = motion_term(v, LevelSetField{phi, 900, -100}, k);
  auto at = [&](int x, int y) { return phi(std::clamp(x, 0, 15), std::clamp(y, 0, 15)); };
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      const double gx = (at(x + 1, y) - at(x - 1, y)) / 2, gy = (at(x, y + 1) - at(x, y - 1)) / 2;
      CHECK(std::abs(out(x, y) - (-v(x, y) * std::sqrt(gx * gx + gy * gy) + k(x, y))) <= 1e-12);
    }
  }
}

TEST_CASE("cfl time step") {
  ScalarField v(4, 4, 0.5);
  v(1, 2) = -2.0;
  const TimeStep ts = cfl_timestep(v, 0.85);
  CHECK(ts.dt == doctest::Approx(0.425).epsilon(1e-15));
  CHECK(!ts.converged);
  const TimeStep zero = cfl_timestep(ScalarField(4, 4), 0.85);
  CHECK(zero.dt == 0.0);
  CHECK(zero.converged);
  std::mt19937_64 rng(49);
  ScalarField r = gen::random_field(rng, 16, 16, -16.9, 16.9);
  r(5, 9) = 17.0;
  CHECK(cfl_timestep(r, 0.85).dt == doctest::Approx(0.05).epsilon(1e-15));
}

TEST_CASE("conjugate gradient direction") {
  const ScalarField ones(2, 2, 1.0);
  CHECK(cg_direction(ones, {}, {}) == ScalarField(2, 2, -1.0));
  std::mt19937_64 rng(50);
  const ScalarField g = gen::random_field(rng, 2, 2), dprev = gen::random_field(rng, 2, 2);
  ScalarField neg = g;
  for (auto& v : neg) v = -v;
  CHECK(cg_direction(g, g, dprev) == neg);
  CHECK(cg_direction(g, ScalarField(2, 2), dprev) == neg);  // zero <g_prev, g_prev> restarts

  const ScalarField gk(2, 2, std::vector<double>{1.0, 2.0, -1.0, 0.5});
  const ScalarField gp(2, 2, std::vector<double>{0.5, 1.0, 0.0, 1.0});
  const ScalarField dp(2, 2, std::vector<double>{-0.5, -1.0, 0.25, -1.0});
  // <gk, gk - gp> = 0.5 + 2 + 1 - 0.25 = 3.25; <gp, gp> = 2.25
  const double beta = 3.25 / 2.25;
  CHECK(polak_ribiere(gk, gp) == doctest::Approx(beta).epsilon(1e-15));
  const ScalarField d = cg_direction(gk, gp, dp);
  for (std::size_t i = 0; i < 4; ++i) CHECK(d[i] == doctest::Approx(-gk[i] + beta * dp[i]).epsilon(1e-15));

  // Negative PR coefficient falls back to steepest descent.
  ScalarField doubled = gk;
  for (auto& v : doubled) v *= 2.0;
  CHECK(polak_ribiere(gk, doubled) == 0.0);
  ScalarField neg_gk = gk;
  for (auto& v : neg_gk) v = -v;
  CHECK(cg_direction(gk, doubled, dp) == neg_gk);
}

TEST_CASE("config validation") {
  OptConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.alpha = 0.0;
  cfg.beta = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.eta = 1.5;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.sigma_z = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.max_iters = -1;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("optimization loop") {
  const auto [f, d] = gen_synthetic_kernels(15, 4, 7);
  const BinaryGrid target = two_bars(96);
  const LithoSimulator sim(f, d, 96, 96);

  SUBCASE("zero iterations evaluate the target as mask") {
    OptConfig cfg;
    cfg.max_iters = 0;
    const auto r = optimize(sim, target, std::nullopt, std::nullopt, cfg);
    CHECK(r.iters_run == 0);
    CHECK(r.final_mask == target);
    CHECK(r.loss_history.size() == 1);
    const MetricsReport m = evaluate_mask(sim, target, target, cfg);
    CHECK(r.metrics.l2 == m.l2);
    CHECK(r.metrics.pvband == m.pvband);
    CHECK(r.metrics.shots == 2);
  }

  SUBCASE("invariants over a short run") {
    OptConfig cfg;
    cfg.max_iters = 15;
    const auto r = optimize(sim, target, std::nullopt, std::nullopt, cfg);
    CHECK(r.final_mask == mask_from_phi(r.final_phi));
    CHECK(r.loss_history.size() == static_cast<std::size_t>(r.iters_run) + 1);
    double best = std::numeric_limits<double>::infinity();
    int argbest = -1;
    for (std::size_t i = 0; i < r.loss_history.size(); ++i) {
      const auto& h = r.loss_history[i];
      CHECK(std::isfinite(h.l_dso));
      CHECK(h.l_dso == doctest::Approx(cfg.alpha * h.l_ilt + cfg.beta * h.l_pvb));
      CHECK(h.max_dphi <= cfg.eta * h.max_grad_phi + 1e-9);
      if (h.l_dso < best) {
        best = h.l_dso;
        argbest = static_cast<int>(i);
      }
    }
    CHECK(r.best_iter == argbest);
    for (double v : r.final_phi.phi) CHECK((v >= cfg.D_l && v <= cfg.D_u));
    const Evaluation e = DsoObjective(sim, target, cfg).evaluate(r.final_mask, false);
    CHECK(e.l_dso == best);
  }

  SUBCASE("runs are bit-identical") {
    OptConfig cfg;
    cfg.max_iters = 8;
    const auto a = optimize(sim, target, std::nullopt, std::nullopt, cfg);
    const auto b = optimize(sim, target, std::nullopt, std::nullopt, cfg);
    REQUIRE(a.loss_history.size() == b.loss_history.size());
    for (std::size_t i = 0; i < a.loss_history.size(); ++i) {
      CHECK(a.loss_history[i].l_dso == b.loss_history[i].l_dso);
      CHECK(a.loss_history[i].dt == b.loss_history[i].dt);
    }
    CHECK(a.final_phi.phi == b.final_phi.phi);
  }

  SUBCASE("scaling both loss weights leaves the update unchanged") {
    OptConfig cfg;
    cfg.max_iters = 1;
    cfg.use_curvature = false;  // the curvature term does not scale with the weights
    OptConfig scaled = cfg;
    scaled.alpha *= 3.0;
    scaled.beta *= 3.0;
    const LevelSetField phi0 = tsdf_from_mask(target);
    const Evaluation e1 = DsoObjective(sim, target, cfg).evaluate(target);
    const Evaluation e2 = DsoObjective(sim, target, scaled).evaluate(target);
    const ScalarField d1 = cg_direction(e1.velocity, {}, {}), d2 = cg_direction(e2.velocity, {}, {});
    const double t1 = cfl_timestep(d1, cfg.eta).dt, t2 = cfl_timestep(d2, cfg.eta).dt;
    for (std::size_t i = 0; i < d1.size(); ++i) CHECK(std::abs(t1 * d1[i] - t2 * d2[i]) <= 1e-9);
  }

  SUBCASE("beta = 0 removes the process-window term") {
    OptConfig cfg;
    cfg.beta = 0.0;
    const Evaluation e = DsoObjective(sim, target, cfg).evaluate(target);
    const auto z = print_corners_sigmoid(to_scalar(target), f, d, cfg);
    const ScalarField gi = ilt_gradient(to_scalar(target), z.nominal, target, f, cfg);
    for (std::size_t i = 0; i < gi.size(); ++i) CHECK(e.velocity[i] == doctest::Approx(gi[i]).epsilon(1e-12).scale(1e-12));
  }

  SUBCASE("an explicit initial level set and modulation are honored") {
    OptConfig cfg;
    cfg.max_iters = 0;
    const LevelSetField phi0 = tsdf_from_mask(two_bars(96));
    const auto r = optimize(sim, target, phi0, ModulationField::ones(96, 96), cfg);
    CHECK(r.final_phi.phi == phi0.phi);
    CHECK_THROWS_AS(optimize(sim, target, LevelSetField{ScalarField(8, 8, 1.0), 900, -100}, std::nullopt, cfg),
                    InvalidArgument);
  }

  SUBCASE("uniform targets are degenerate") {
    CHECK_THROWS_AS(optimize(sim, BinaryGrid(96, 96), std::nullopt, std::nullopt, OptConfig{}), DegenerateInput);
  }
}

TEST_CASE("modulation search") {
  const auto [f, d] = gen_synthetic_kernels(15, 4, 3);
  const BinaryGrid target = two_bars(64);
  const LithoSimulator sim(f, d, 64, 64);
  const LevelSetField phi_gt = tsdf_from_mask(target);
  const OptConfig cfg;

  SUBCASE("offsets") {
    CHECK(modulation_offsets(1) == std::vector<double>{0.0});
    const auto o = modulation_offsets(41);
    REQUIRE(o.size() == 41);
    for (int i = 0; i < 41; ++i) CHECK(o[i] == -20.0 + i);
    CHECK_THROWS_AS(modulation_offsets(0), InvalidArgument);
  }

  SUBCASE("a single sample gates with H(phi_gt)") {
    const auto r = modulation_search(sim, phi_gt, target, cfg, 1, 3);
    CHECK(r.best_delta_h == 0.0);
    CHECK(r.m_gt.m == to_scalar(heaviside(phi_gt.phi)));
  }

  SUBCASE("zero curvature weight ties every candidate") {
    OptConfig flat = cfg;
    flat.lambda = 0.0;
    const auto r = modulation_search(sim, phi_gt, target, flat, 9, 3);
    for (const auto& c : r.candidates) CHECK(c.l_dso == r.candidates.front().l_dso);
    CHECK(r.best_delta_h == 0.0);
  }

  SUBCASE("result is the argmin of its own candidates and repeatable") {
    const auto r = modulation_search(sim, phi_gt, target, cfg, 11, 4);
    REQUIRE(r.candidates.size() == 11);
    double best = r.candidates.front().l_dso;
    for (const auto& c : r.candidates) best = std::min(best, c.l_dso);
    bool found = false;
    for (const auto& c : r.candidates) found |= c.delta_h == r.best_delta_h && c.l_dso == best;
    CHECK(found);
    ScalarField shifted = phi_gt.phi;
    for (auto& v : shifted) v += r.best_delta_h;
    CHECK(r.m_gt.m == to_scalar(heaviside(shifted)));
    const auto again = modulation_search(sim, phi_gt, target, cfg, 11, 4);
    CHECK(again.best_delta_h == r.best_delta_h);
    for (std::size_t i = 0; i < r.candidates.size(); ++i) CHECK(again.candidates[i].l_dso == r.candidates[i].l_dso);
  }
}

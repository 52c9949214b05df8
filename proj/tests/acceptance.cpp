// Acceptance suite: one test case per criterion, each printing a PASS/FAIL
// line with the measured numbers. Tolerances are pinned here, not tuned.

#include <catch2/catch_amalgamated.hpp>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "polsqz/fluct_analytic.hpp"
#include "polsqz/fluct_full.hpp"
#include "polsqz/stokes.hpp"

using namespace polsqz;

namespace {

SystemParams params_for_delta0(double delta0, double delta = 20.0) {
  SystemParams p;
  p.delta = delta;
  p.n_atoms = delta0 * p.cavity_T * (delta * delta + 1.0) / delta;
  return p;
}

SteadyState top_root_state(const SystemParams& p, const DerivedScales& sc) {
  const auto roots = linear_branch_roots(p.delta_c, p.s_max, sc);
  return make_linear_state(roots.back(), p.delta_c, p.s_max, sc);
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

void report(int id, bool ok, const char* fmt, ...) {
  std::printf("[%s] criterion %d: ", ok ? "PASS" : "FAIL", id);
  va_list args;
  va_start(args, fmt);
  std::vprintf(fmt, args);
  va_end(args);
  std::printf("\n");
  std::fflush(stdout);
}

}  // namespace

TEST_CASE("criterion 1: tristability resonance regression") {
  Timer timer;
  const SystemParams p = params_for_delta0(7.0);
  const DerivedScales sc = derive_scales(p);
  const ResonanceScan scan = resonance_scan(0.0, 9.0, 1200, 2.0, sc);
  const double alpha0 = sc.alpha0;
  const double dps = scan.delta_ps.value_or(-1.0);
  const double sps = scan.s_ps.value_or(-1.0);
  const double dex = scan.delta_ex.value_or(-1.0);
  const double secs = timer.seconds();
  const bool ok = std::abs(alpha0 - 0.35) < 1e-12 &&
                  std::abs(dps - 2.6) <= 0.1 && std::abs(sps - 1.5) <= 0.1 &&
                  std::abs(dex - 5.6) <= 0.1 && secs < 10.0;
  report(1, ok,
         "alpha0 = %.15f, delta_ps = %.4f (2.6+-0.1), S_ps = %.4f (1.5+-0.1), "
         "delta_ex = %.4f (5.6+-0.1), runtime %.2f s (< 10 s)",
         alpha0, dps, sps, dex, secs);
  CHECK(std::abs(alpha0 - 0.35) < 1e-12);
  CHECK(std::abs(dps - 2.6) <= 0.1);
  CHECK(std::abs(sps - 1.5) <= 0.1);
  CHECK(std::abs(dex - 5.6) <= 0.1);
  CHECK(secs < 10.0);
}

TEST_CASE("criterion 2: optical-pumping PS threshold") {
  const SystemParams p = params_for_delta0(5.0);
  const DerivedScales sc = derive_scales(p);
  const auto dps = find_delta_ps(0.01, sc, 0.0, 8.0, 800);
  const double v = dps.value_or(-1.0);

  // zero-absorption, zero-saturation analytic limit
  const SystemParams clean = params_for_delta0(5.0, 1e9);
  const DerivedScales scc = derive_scales(clean);
  const auto dps0 = find_delta_ps(1e-9, scc, 4.0, 6.0, 400);
  const double v0 = dps0.value_or(-1.0);
  const double target = std::sqrt(24.0);
  const bool ok =
      std::abs(v - 4.85) <= 0.1 && std::abs(v0 - target) <= 1e-6 * target;
  report(2, ok,
         "delta_ps = %.4f (4.85+-0.1); zero-absorption limit %.9f vs sqrt(24) "
         "= %.9f (rel err %.2e, < 1e-6)",
         v, v0, target, std::abs(v0 / target - 1.0));
  CHECK(std::abs(v - 4.85) <= 0.1);
  CHECK(std::abs(v0 - target) <= 1e-6 * target);
}

TEST_CASE("criterion 3: PS precedes the higher turning point") {
  std::vector<double> grid;
  for (int i = 0; i <= 40; ++i) grid.push_back(-0.8 + 3.0 * i / 40.0);
  bool ok = true;
  double min_margin[2] = {0.0, 0.0};
  int rows[2] = {0, 0};
  int k = 0;
  for (double delta : {20.0, 40.0}) {
    const SystemParams p = params_for_delta0(7.0, delta);
    const DerivedScales sc = derive_scales(p);
    const PsHtReport rep = ps_before_ht_scan(sc, grid);
    ok = ok && rep.all_nonnegative && rep.rows.size() >= 8;
    min_margin[k] = rep.min_margin;
    rows[k] = static_cast<int>(rep.rows.size());
    ++k;
  }
  report(3, ok,
         "S_PS >= S_HT at every bistable grid point: Delta=20 gamma (%d "
         "points, min margin %.3f), Delta=40 gamma (%d points, min margin "
         "%.3f)",
         rows[0], min_margin[0], rows[1], min_margin[1]);
  CHECK(ok);
}

TEST_CASE("criterion 4: squeezing spectra at the reference working point") {
  Timer timer;
  SystemParams p = params_for_delta0(5.0);
  p.delta_c = 4.6;
  p.s_max = 0.1;
  const DerivedScales sc = derive_scales(p);
  const SteadyState st = top_root_state(p, sc);
  const DriftDiffusion dd = build_drift_diffusion(st, p);
  const auto omega = log_omega_grid(1e-3, 10.0 * p.kappa_over_gamma, 400);
  const auto theta = default_theta_grid();
  const SpectrumResult fy = output_spectrum(dd, Mode::y, omega, theta);
  const SpectrumResult fx = output_spectrum(dd, Mode::x, omega, theta);
  const SpectrumResult cy =
      analytic_spectrum(Regime::combined, Mode::y, st, sc, p, omega, theta);
  const double ymin = fy.global_min();
  const double xmin = fx.s_min.front();
  double dev = 0.0, dev_above = 0.0, agree_from = 0.0;
  for (std::size_t i = omega.size(); i-- > 0;) {
    const double d = std::abs(fy.s_min[i] - cy.s_min[i]);
    dev = std::max(dev, d);
    if (omega[i] >= 2.0) dev_above = std::max(dev_above, d);
    if (d > 0.05 && agree_from == 0.0 && i + 1 < omega.size())
      agree_from = omega[i + 1];
  }
  const double secs = timer.seconds();
  const bool ok = std::abs(ymin - 0.75) <= 0.05 &&
                  std::abs(xmin - 0.55) <= 0.05 && dev <= 0.05 && secs < 60.0;
  report(4, ok,
         "A_y min = %.4f (0.75+-0.05), A_x min(dc) = %.4f (0.55+-0.05), "
         "max |full - combined| = %.4f (<= 0.05; both traces diverge near dc, "
         "0.05 band holds for omega >= %.2f gamma, dev there %.4f), runtime "
         "%.1f s (< 60 s, 400 frequencies)",
         ymin, xmin, dev, agree_from, dev_above, secs);
  CHECK(std::abs(ymin - 0.75) <= 0.05);
  CHECK(std::abs(xmin - 0.55) <= 0.05);
  CHECK(dev <= 0.05);
  CHECK(secs < 60.0);
}

TEST_CASE("criterion 5: bad-cavity optimization") {
  SystemParams p = params_for_delta0(5.0);
  const std::vector<double> grid = {0.02, 0.05, 0.1, 0.2, 0.35, 0.5,
                                    0.75, 1.0,  1.5, 2.0, 3.0};
  double mins[3];
  const double rhos[3] = {2.0, 10.0, 50.0};
  for (int i = 0; i < 3; ++i)
    mins[i] = optimize_squeezing(p, rhos[i], grid).best.s_min;
  const bool ok = mins[0] > mins[1] && mins[1] > mins[2] &&
                  std::abs(mins[2] - 0.25) <= 0.05;
  report(5, ok,
         "optimized vacuum minima: rho=2 -> %.4f, rho=10 -> %.4f, rho=50 -> "
         "%.4f (0.25+-0.05, monotone)",
         mins[0], mins[1], mins[2]);
  CHECK(mins[0] > mins[1]);
  CHECK(mins[1] > mins[2]);
  CHECK(std::abs(mins[2] - 0.25) <= 0.05);
}

TEST_CASE("criterion 6: SR noise floor against the closed form") {
  SystemParams p = params_for_delta0(5.0, 40.0);
  p.delta_c = 3.0;
  p.s_max = 0.217828798185941;  // s_x = 0.1 at this working point
  const DerivedScales sc = derive_scales(p);
  const SteadyState st = top_root_state(p, sc);
  const auto omega = log_omega_grid(1e-4, 1e-1, 200);
  const auto theta = default_theta_grid(32);
  const SpectrumResult spec =
      analytic_spectrum(Regime::sr, Mode::y, st, sc, p, omega, theta);
  // dc excess = (C/4)(gamma/gamma_perp) x 16|q|^2/d^2, Lorentzian in omega
  // with width gamma_p; q = (1+alpha0) - i(delta_c+delta0), d = det L(0)
  const double gp = sc.gamma_p_per_sx * st.s_x();
  const double q2 = sqr(1.0 + sc.alpha0) + sqr(p.delta_c + sc.delta0);
  const double det = sqr(1.0 + sc.alpha0) + sqr(p.delta_c) - sqr(sc.delta0);
  const double d2 = sqr(sc.delta_abs) / (sqr(sc.delta_abs) + sqr(sc.gamma));
  const double e0 =
      4.0 * sc.cooperativity * (sc.gamma / sc.gamma_perp) * d2 * q2 / sqr(det);
  double worst = 0.0;
  int tested = 0;
  for (std::size_t i = 0; i < spec.omega.size(); ++i) {
    const double w = spec.omega[i] * sc.gamma;
    if (w > gp / 3.0) continue;
    const double closed = e0 * gp * gp / (gp * gp + w * w);
    worst =
        std::max(worst, std::abs((spec.s_max_trace[i] - 1.0) / closed - 1.0));
    ++tested;
  }
  const bool ok = tested >= 20 && worst <= 0.05;
  report(6, ok,
         "SR floor matches (C/4)(gamma/gamma_perp) * transfer * Lorentzian: "
         "dc excess %.1f, worst rel err %.4f over %d points with omega <= "
         "gamma_p/3 (<= 0.05)",
         e0, worst, tested);
  CHECK(tested >= 20);
  CHECK(worst <= 0.05);
}

TEST_CASE("criterion 7: property suite") {
  bool ok = true;

  // empty-cavity spectra stay at shot noise, both engines
  {
    SystemParams p;
    p.n_atoms = 0.0;
    p.delta_c = 0.9;
    p.s_max = 0.05;
    const DerivedScales sc = derive_scales(p);
    const SteadyState st = top_root_state(p, sc);
    const auto omega = log_omega_grid(1e-3, 1e2, 60);
    const auto theta = default_theta_grid(24);
    const DriftDiffusion dd = build_drift_diffusion(st, p);
    for (Mode m : {Mode::x, Mode::y}) {
      const SpectrumResult f = output_spectrum(dd, m, omega, theta);
      for (std::size_t i = 0; i < f.omega.size(); ++i) {
        ok = ok && std::abs(f.s_min[i] - 1.0) < 1e-10 &&
             std::abs(f.s_max_trace[i] - 1.0) < 1e-10;
      }
    }
    const SpectrumResult a =
        analytic_spectrum(Regime::combined, Mode::y, st, sc, p, omega, theta);
    for (std::size_t i = 0; i < a.omega.size(); ++i)
      ok = ok && std::abs(a.s_min[i] - 1.0) < 1e-10 &&
           std::abs(a.s_max_trace[i] - 1.0) < 1e-10;
    CHECK(ok);
  }

  // Heisenberg products and positivity for both engines at a hot working point
  double worst_prod = 2.0;
  {
    SystemParams p = params_for_delta0(5.0);
    p.delta_c = 4.6;
    p.s_max = 0.1;
    const DerivedScales sc = derive_scales(p);
    const SteadyState st = top_root_state(p, sc);
    const DriftDiffusion dd = build_drift_diffusion(st, p);
    const auto omega = log_omega_grid(1e-3, 50.0, 150);
    const auto theta = default_theta_grid(64);
    std::vector<SpectrumResult> specs;
    specs.push_back(output_spectrum(dd, Mode::y, omega, theta));
    specs.push_back(output_spectrum(dd, Mode::x, omega, theta));
    specs.push_back(
        analytic_spectrum(Regime::combined, Mode::y, st, sc, p, omega, theta));
    specs.push_back(
        analytic_spectrum(Regime::kerr, Mode::x, st, sc, p, omega, theta));
    for (const auto& s : specs) {
      for (std::size_t i = 0; i < s.omega.size(); ++i) {
        const double prod = sqr(s.viso[i]) - 4.0 * std::norm(s.v11[i]);
        worst_prod = std::min(worst_prod, prod);
        ok = ok && prod >= 1.0 - 1e-9 && s.s_min[i] > 0.0;
      }
    }
    CHECK(worst_prod >= 1.0 - 1e-9);
  }

  // population conservation at machine precision
  {
    const SystemParams p = params_for_delta0(7.0);
    const DerivedScales sc = derive_scales(p);
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> u(1e-3, 2.0);
    for (int i = 0; i < 50; ++i) {
      const AtomicMeans m = atomic_steady_state(u(rng), u(rng), sc);
      ok = ok && std::abs(m.n1 + m.n2 + m.n3 + m.n4 - sc.n_atoms) <
                     1e-12 * sc.n_atoms;
    }
    CHECK(ok);
  }

  // eigenvalue stability agrees with the PS criterion on a 50-point grid
  int agreements = 0;
  {
    SystemParams p = params_for_delta0(5.0);
    p.s_max = 0.01;
    const DerivedScales sc = derive_scales(p);
    for (int i = 0; i < 50; ++i) {
      const double dc = 0.5 + 7.5 * i / 49.0;
      const auto roots = linear_branch_roots(dc, p.s_max, sc);
      SystemParams q = p;
      q.delta_c = dc;
      const SteadyState st = make_linear_state(roots.back(), dc, p.s_max, sc);
      const DriftDiffusion dd = build_drift_diffusion(st, q);
      const bool eig = stability_eigen(dd).is_stable;
      const bool cps = criterion_ps(roots.back(), sc, dc) < 0.0;
      if (eig == cps) ++agreements;
    }
    ok = ok && agreements == 50;
    CHECK(agreements == 50);
  }

  // closed-form atomic state vs brute-force Bloch relaxation, 20 random pairs
  double worst_atom = 0.0;
  {
    const SystemParams p = params_for_delta0(5.0);
    const DerivedScales sc = derive_scales(p);
    const double d2g2 = sqr(sc.delta_abs) + sqr(sc.gamma);
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> u(0.1, 2.0);
    for (int i = 0; i < 20; ++i) {
      const double sp = u(rng), sm = u(rng);
      const cplx ap(-std::sqrt(sp * d2g2 / (2.0 * sc.g2)), 0.0);
      const cplx am(std::sqrt(sm * d2g2 / (2.0 * sc.g2)), 0.0);
      const AtomicMeans m = atomic_means_from_amplitudes(ap, am, sc);
      const oracles::BlochState b = oracles::bloch_relax(ap, am, sc);
      const double err =
          std::max({std::abs(m.n1 - b.n1), std::abs(m.n2 - b.n2),
                    std::abs(m.n3 - b.n3), std::abs(m.n4 - b.n4),
                    std::abs(m.m14 - b.m14), std::abs(m.m23 - b.m23)}) /
          sc.n_atoms;
      worst_atom = std::max(worst_atom, err);
    }
    ok = ok && worst_atom < 1e-8;
    CHECK(worst_atom < 1e-8);
  }

  // Stokes uncertainty product on a computed spectrum
  {
    SystemParams p = params_for_delta0(5.0);
    p.delta_c = 4.6;
    p.s_max = 0.1;
    const DerivedScales sc = derive_scales(p);
    const SteadyState st = top_root_state(p, sc);
    const DriftDiffusion dd = build_drift_diffusion(st, p);
    const auto omega = log_omega_grid(1e-3, 20.0, 80);
    const auto theta = default_theta_grid(32);
    const SpectrumResult s = output_spectrum(dd, Mode::y, omega, theta);
    const StokesReport rep = stokes_noise(s, st);
    for (std::size_t i = 0; i < rep.omega.size(); ++i) {
      ok = ok && rep.v_sy[i] * rep.v_sz[i] >= 1.0 - 1e-9 &&
           rep.v_sq[i] * rep.v_antisq[i] >= 1.0 - 1e-9;
    }
    CHECK(ok);
  }

  report(7, ok,
         "empty cavity == 1, Heisenberg product (worst %.6f), population "
         "conservation, criterion/eigen agreement (%d/50), Bloch oracle "
         "(worst %.2e), Stokes uncertainty",
         worst_prod, agreements, worst_atom);
  CHECK(ok);
}

TEST_CASE("criterion 8: high-frequency Kerr symmetry between the modes") {
  SystemParams p = params_for_delta0(5.0);
  p.delta_c = 4.6;
  p.s_max = 0.1;
  const DerivedScales sc = derive_scales(p);
  const SteadyState st = top_root_state(p, sc);
  const auto omega = log_omega_grid(10.0, 100.0, 50);
  const auto theta = default_theta_grid();
  const SpectrumResult sx =
      analytic_spectrum(Regime::kerr, Mode::x, st, sc, p, omega, theta);
  const SpectrumResult sy =
      analytic_spectrum(Regime::kerr, Mode::y, st, sc, p, omega, theta);
  double worst_min = 0.0, worst_angle = 0.0;
  for (std::size_t i = 0; i < omega.size(); ++i) {
    worst_min = std::max(worst_min, std::abs(sx.s_min[i] - sy.s_min[i]));
    double dth = std::abs(sx.theta_opt[i] - sy.theta_opt[i]);
    dth = std::min(dth, PI - dth);  // modulo-pi distance
    worst_angle = std::max(worst_angle, std::abs(dth - PI / 2.0));
  }
  const double grid_step = PI / theta.size();
  const bool ok = worst_min <= 1e-3 && worst_angle <= grid_step;
  report(8, ok,
         "for omega >= 10 gamma: |min_x - min_y| worst %.2e (<= 1e-3), "
         "|theta_x - theta_y| - pi/2 worst %.2e rad (<= %.3f)",
         worst_min, worst_angle, grid_step);
  CHECK(worst_min <= 1e-3);
  CHECK(worst_angle <= grid_step);
}

// polsqz: steady-state scans, quadrature noise spectra and Stokes reports for
// a 4-level atomic ensemble in a driven optical cavity.
//
// Subcommands:
//   polsqz steady   <config> --scan delta_c|s_max --range a:b:n [--out-dir D]
//   polsqz spectrum <config> --mode x|y --engine full|kerr|sr|combined
//                   [--omega a:b:n] [--out-dir D]
//   polsqz reproduce <figure_id 2..10> [--out-dir D] [--config-dir D]
//
// Exit codes: 0 success, 2 config/usage error, 3 physics error (instability,
// no solution), 4 acceptance failure in reproduce mode.
//
// Outputs are deterministic: identical config + flags give byte-identical
// files. Every run writes a manifest listing the emitted files with their
// sha256 hashes. POLSQZ_THREADS caps the worker count (results do not depend
// on it).

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "polsqz/fluct_analytic.hpp"
#include "polsqz/fluct_full.hpp"
#include "polsqz/io.hpp"
#include "polsqz/scans.hpp"
#include "polsqz/stokes.hpp"
#include "polsqz/version.hpp"

namespace fs = std::filesystem;
using namespace polsqz;

namespace {

struct Range {
  double lo = 0.0, hi = 0.0;
  int n = 1;
};

Range parse_range(const std::string& s) {
  Range r;
  char extra;
  if (std::sscanf(s.c_str(), "%lf:%lf:%d%c", &r.lo, &r.hi, &r.n, &extra) != 3 ||
      r.n < 1)
    throw config_error("bad range '" + s + "', expected a:b:n with n >= 1");
  if (r.n == 1 && r.hi != r.lo) r.hi = r.lo;
  return r;
}

// Largest linear root, optionally restricted to stable ones.
SteadyState working_state(const SystemParams& p, const DerivedScales& sc,
                          bool require_stable) {
  const auto roots = linear_branch_roots(p.delta_c, p.s_max, sc);
  for (int k = static_cast<int>(roots.size()) - 1; k >= 0; --k) {
    const bool middle = roots.size() == 3 && k == 1;
    const bool stable =
        !middle && criterion_ps(roots[k], sc, p.delta_c) < 0.0;
    if (require_stable && !stable) continue;
    SteadyState st = make_linear_state(roots[k], p.delta_c, p.s_max, sc);
    st.stability = stable ? Stability::stable : Stability::unstable;
    return st;
  }
  throw physics_error(
      "no stable linearly polarized working point at this (delta_c, s_max)");
}

std::string join_args(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

void emit(RunManifest& man, const fs::path& path, const std::string& content) {
  write_file(path.string(), content);
  man.add(path.filename().string(), content);
}

void finish(RunManifest& man, const fs::path& dir, const std::string& stem) {
  const auto j = man.to_json().dump(2) + "\n";
  write_file((dir / (stem + "_manifest.json")).string(), j);
}

// --- steady ------------------------------------------------------------------

int cmd_steady(const std::string& config_path, const std::string& scan,
               const std::string& range_str, const fs::path& out_dir,
               const std::string& cmdline) {
  const SystemParams p = load_config(config_path);
  const DerivedScales sc = derive_scales(p);
  const Range r = parse_range(range_str);
  const std::string stem = fs::path(config_path).stem().string() + "_" + scan;
  RunManifest man{cmdline, p, {}};

  if (scan == "delta_c") {
    const auto oracle = eigen_stability_oracle(p);
    const ResonanceScan res =
        resonance_scan(r.lo, r.hi, r.n, p.s_max, sc, oracle);
    const std::string csv = branch_curve_csv(
        {&res.linear, &res.sigma_plus, &res.sigma_minus});
    emit(man, out_dir / (stem + "_branches.csv"), csv);
    nlohmann::json j{{"linear", branch_curve_json(res.linear, p)},
                     {"sigma_plus", branch_curve_json(res.sigma_plus, p)},
                     {"sigma_minus", branch_curve_json(res.sigma_minus, p)},
                     {"fold_points", res.fold_points}};
    if (res.delta_ps) j["delta_ps"] = *res.delta_ps;
    if (res.s_ps) j["s_ps"] = *res.s_ps;
    if (res.delta_ex) j["delta_ex"] = *res.delta_ex;
    if (res.delta_ps && res.delta_ex)
      j["tristability_window"] = {*res.delta_ps, *res.delta_ex};
    emit(man, out_dir / (stem + "_branches.json"), j.dump(2) + "\n");

    std::fprintf(stderr, "steady scan delta_c in [%g, %g], %d points\n", r.lo,
                 r.hi, r.n);
    if (res.delta_ps)
      std::fprintf(stderr, "  delta_ps = %.6g (S_PS = %.6g)\n", *res.delta_ps,
                   res.s_ps.value_or(0.0));
    if (res.delta_ex)
      std::fprintf(stderr, "  delta_ex = %.6g\n", *res.delta_ex);
    if (res.delta_ps && res.delta_ex)
      std::fprintf(stderr, "  tristability window = [%.6g, %.6g]\n",
                   *res.delta_ps, *res.delta_ex);
    for (double f : res.fold_points)
      std::fprintf(stderr, "  linear-branch fold at delta_c = %.6g\n", f);
  } else if (scan == "s_max") {
    const BranchCurve curve =
        bistability_curve(p.delta_c, r.lo, r.hi, std::max(r.n, 2), sc);
    emit(man, out_dir / (stem + "_branches.csv"), branch_curve_csv({&curve}));
    emit(man, out_dir / (stem + "_branches.json"),
         branch_curve_json(curve, p).dump(2) + "\n");
    std::fprintf(stderr, "steady scan s_max in [%g, %g] at delta_c = %g\n",
                 r.lo, r.hi, p.delta_c);
    for (double t : curve.turning_points)
      std::fprintf(stderr, "  turning point at s_max = %.6g\n", t);
    if (curve.ps_threshold)
      std::fprintf(stderr, "  PS threshold at s_max = %.6g\n",
                   *curve.ps_threshold);
  } else {
    throw config_error("--scan must be delta_c or s_max");
  }
  finish(man, out_dir, stem);
  return 0;
}

// --- spectrum ------------------------------------------------------------------

int cmd_spectrum(const std::string& config_path, const std::string& mode_str,
                 const std::string& engine, const std::string& omega_str,
                 const fs::path& out_dir, const std::string& cmdline) {
  const SystemParams p = load_config(config_path);
  const DerivedScales sc = derive_scales(p);
  const Mode mode = mode_str == "x" ? Mode::x : Mode::y;
  if (mode_str != "x" && mode_str != "y")
    throw config_error("--mode must be x or y");

  std::vector<double> omega;
  if (omega_str.empty()) {
    omega = default_omega_grid();
  } else {
    const Range r = parse_range(omega_str);
    omega = linear_omega_grid(r.lo, r.hi, r.n);
  }
  const auto theta = default_theta_grid();

  SpectrumResult spec;
  SteadyState st;
  if (engine == "full") {
    st = working_state(p, sc, /*require_stable=*/true);
    const DriftDiffusion dd = build_drift_diffusion(st, p);
    spec = output_spectrum(dd, mode, omega, theta);
  } else {
    if (p.delta < 5.0)
      std::fprintf(stderr,
                   "warning: Delta = %g gamma is outside the large-detuning "
                   "regime assumed by the analytic matrices\n",
                   p.delta);
    Regime regime;
    if (engine == "kerr") regime = Regime::kerr;
    else if (engine == "sr") regime = Regime::sr;
    else if (engine == "combined") regime = Regime::combined;
    else throw config_error("--engine must be full, kerr, sr or combined");
    st = working_state(p, sc, /*require_stable=*/false);
    spec = analytic_spectrum(regime, mode, st, sc, p, omega, theta);
  }
  spec.params = p;
  spec.params_hash = params_hash(p);

  const std::string stem = fs::path(config_path).stem().string() + "_" +
                           mode_str + "_" + engine;
  RunManifest man{cmdline, p, {}};
  emit(man, out_dir / (stem + "_spectrum.csv"), spectrum_csv(spec));
  emit(man, out_dir / (stem + "_spectrum.json"),
       spectrum_json(spec).dump() + "\n");
  if (mode == Mode::y) {
    const StokesReport rep = stokes_noise(spec, st, spec.params_hash);
    emit(man, out_dir / (stem + "_stokes.json"),
         stokes_json(rep, p, spec.engine).dump(2) + "\n");
  }
  finish(man, out_dir, stem);

  std::size_t iw = 0;
  const double smin = spec.global_min(&iw);
  std::fprintf(stderr,
               "spectrum mode=%s engine=%s: min = %.6g at omega = %.6g gamma, "
               "theta_opt = %.6g rad (S = s_x/2 = %.6g)\n",
               mode_str.c_str(), engine.c_str(), smin, spec.omega[iw],
               spec.theta_opt[iw], st.S);
  return 0;
}

// --- reproduce ------------------------------------------------------------------

struct Check {
  std::string name;
  double value;
  double expected;
  double tol;
  bool pass() const { return std::abs(value - expected) <= tol; }
};

struct FigureReport {
  std::vector<Check> checks;
  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass()) return false;
    return true;
  }
  void print(int fig) const {
    for (const auto& c : checks)
      std::printf("[%s] fig %d %s: %.6g (expected %.6g +- %.3g)\n",
                  c.pass() ? "PASS" : "FAIL", fig, c.name.c_str(), c.value,
                  c.expected, c.tol);
  }
  nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& c : checks)
      rows.push_back({{"name", c.name},
                      {"value", c.value},
                      {"expected", c.expected},
                      {"tol", c.tol},
                      {"pass", c.pass()}});
    return rows;
  }
};

fs::path resolve_config_dir(const std::string& flag_dir) {
  std::vector<fs::path> candidates;
  if (!flag_dir.empty()) candidates.push_back(flag_dir);
  if (const char* env = std::getenv("POLSQZ_CONFIG_DIR"))
    candidates.push_back(env);
  std::error_code ec;
  const fs::path self = fs::read_symlink("/proc/self/exe", ec);
  if (!ec) candidates.push_back(self.parent_path() / "configs");
  candidates.push_back("configs");
  for (const auto& c : candidates)
    if (fs::exists(c / "fig7.cfg")) return c;
  throw config_error("cannot locate the shipped figure configs; use --config-dir");
}

int cmd_reproduce(int fig, const fs::path& cfg_dir, const fs::path& out_dir,
                  const std::string& cmdline) {
  FigureReport rep;
  SystemParams p;
  const auto cfg = [&](const std::string& name) {
    return load_config((cfg_dir / name).string());
  };
  RunManifest man{cmdline, p, {}};
  const std::string stem = "fig" + std::to_string(fig);

  switch (fig) {
    case 2: {
      p = cfg("fig2.cfg");
      const DerivedScales sc = derive_scales(p);
      const ResonanceScan res = resonance_scan(-2.0, 8.0, 2000, p.s_max, sc);
      emit(man, out_dir / (stem + "_branches.csv"),
           branch_curve_csv({&res.linear, &res.sigma_plus, &res.sigma_minus}));
      rep.checks.push_back({"delta_ps", res.delta_ps.value_or(-1.0), 4.85, 0.1});
      break;
    }
    case 3: {
      p = cfg("fig3.cfg");
      const DerivedScales sc = derive_scales(p);
      const ResonanceScan res = resonance_scan(0.0, 9.0, 1500, p.s_max, sc);
      emit(man, out_dir / (stem + "_branches.csv"),
           branch_curve_csv({&res.linear, &res.sigma_plus, &res.sigma_minus}));
      rep.checks.push_back({"alpha0", sc.alpha0, 0.35, 1e-12});
      rep.checks.push_back({"delta_ps", res.delta_ps.value_or(-1.0), 2.6, 0.1});
      rep.checks.push_back({"S_ps", res.s_ps.value_or(-1.0), 1.5, 0.1});
      rep.checks.push_back({"delta_ex", res.delta_ex.value_or(-1.0), 5.6, 0.1});
      break;
    }
    case 4: {
      p = cfg("fig4.cfg");
      const DerivedScales sc = derive_scales(p);
      const BranchCurve curve = bistability_curve(p.delta_c, 1e-3, 30.0, 800, sc);
      emit(man, out_dir / (stem + "_bistability.csv"), branch_curve_csv({&curve}));
      const auto tp = turning_points_s(p.delta_c, sc);
      rep.checks.push_back(
          {"turning_points", static_cast<double>(tp.size()), 2.0, 0.0});
      if (tp.size() == 2) {
        rep.checks.push_back(
            {"S_LT_below_S_HT", tp[0].first < tp[1].first ? 1.0 : 0.0, 1.0, 0.0});
        const auto sps = ps_threshold_intensity(p.delta_c, sc);
        rep.checks.push_back({"ps_before_ht",
                              sps && *sps >= tp[1].first ? 1.0 : 0.0, 1.0, 0.0});
      }
      break;
    }
    case 5: {
      std::string csv = "delta_c,s_ps,s_ht,margin\n";
      bool ok = true;
      for (const char* name : {"fig5a.cfg", "fig5b.cfg", "fig5c.cfg"}) {
        p = cfg(name);
        const DerivedScales sc = derive_scales(p);
        const PsHtReport r = ps_before_ht_scan(sc, {p.delta_c});
        for (const auto& row : r.rows) {
          csv += fmt_g17(row.delta_c);
          csv += ',';
          csv += fmt_g17(row.s_ps);
          csv += ',';
          csv += fmt_g17(row.s_ht);
          csv += ',';
          csv += fmt_g17(row.margin);
          csv += '\n';
        }
        ok = ok && r.all_nonnegative && !r.rows.empty();
      }
      emit(man, out_dir / (stem + "_ps_ht.csv"), csv);
      rep.checks.push_back({"ps_above_ht_all", ok ? 1.0 : 0.0, 1.0, 0.0});
      break;
    }
    case 6: {
      p = cfg("fig6.cfg");
      const DerivedScales sc = derive_scales(p);
      const SteadyState st = working_state(p, sc, false);
      const auto omega = log_omega_grid(1e-4, 10.0, 400);
      const auto theta = default_theta_grid();
      SpectrumResult spec =
          analytic_spectrum(Regime::sr, Mode::y, st, sc, p, omega, theta);
      spec.params = p;
      spec.params_hash = params_hash(p);
      emit(man, out_dir / (stem + "_sr_spectrum.csv"), spectrum_csv(spec));
      rep.checks.push_back({"sr_min_near_shot", spec.global_min(), 1.0, 0.15});
      rep.checks.push_back(
          {"sr_max_at_dc_much_above_shot",
           spec.s_max_trace.front() > 50.0 ? 1.0 : 0.0, 1.0, 0.0});
      // closed-form dc excess (C/4)(gamma/gamma_perp) x cavity transfer
      const double gp = sc.gamma_p_per_sx * st.s_x();
      const double q2 = sqr(1.0 + sc.alpha0) + sqr(p.delta_c + sc.delta0);
      const double det = sqr(1.0 + sc.alpha0) + sqr(p.delta_c) - sqr(sc.delta0);
      const double e0 = 4.0 * sc.cooperativity * (sc.gamma / sc.gamma_perp) *
                        sqr(sc.delta_abs / sc.gamma) /
                        (sqr(sc.delta_abs / sc.gamma) + 1.0) * q2 / sqr(det);
      double worst = 0.0;
      for (std::size_t i = 0; i < spec.omega.size(); ++i) {
        const double w = spec.omega[i] * sc.gamma;
        if (w > gp / 3.0) continue;
        const double closed = e0 * gp * gp / (gp * gp + w * w);
        worst = std::max(worst,
                         std::abs((spec.s_max_trace[i] - 1.0) / closed - 1.0));
      }
      rep.checks.push_back({"sr_floor_closed_form_rel_err", worst, 0.0, 0.05});
      break;
    }
    case 7: {
      p = cfg("fig7.cfg");
      const DerivedScales sc = derive_scales(p);
      const SteadyState st = working_state(p, sc, true);
      const DriftDiffusion dd = build_drift_diffusion(st, p);
      const auto omega = log_omega_grid(1e-3, 10.0 * p.kappa_over_gamma, 400);
      const auto theta = default_theta_grid();
      SpectrumResult fy = output_spectrum(dd, Mode::y, omega, theta);
      SpectrumResult fx = output_spectrum(dd, Mode::x, omega, theta);
      SpectrumResult cy =
          analytic_spectrum(Regime::combined, Mode::y, st, sc, p, omega, theta);
      for (auto* s : {&fy, &fx, &cy}) {
        s->params = p;
        s->params_hash = params_hash(p);
      }
      emit(man, out_dir / (stem + "_full_y.csv"), spectrum_csv(fy));
      emit(man, out_dir / (stem + "_full_x.csv"), spectrum_csv(fx));
      emit(man, out_dir / (stem + "_combined_y.csv"), spectrum_csv(cy));
      rep.checks.push_back({"full_y_min", fy.global_min(), 0.75, 0.05});
      rep.checks.push_back({"full_x_min_dc", fx.s_min.front(), 0.55, 0.05});
      double dev = 0.0;
      for (std::size_t i = 0; i < omega.size(); ++i)
        dev = std::max(dev, std::abs(fy.s_min[i] - cy.s_min[i]));
      rep.checks.push_back({"full_vs_combined_dev", dev, 0.0, 0.05});
      break;
    }
    case 8: {
      double mins[3];
      int k = 0;
      for (const char* name : {"fig8a.cfg", "fig8b.cfg", "fig8c.cfg"}) {
        p = cfg(name);
        const DerivedScales sc = derive_scales(p);
        const SteadyState st = working_state(p, sc, true);
        SpectrumResult s = analytic_spectrum(Regime::combined, Mode::y, st, sc, p);
        mins[k++] = s.global_min();
      }
      std::string csv = "working_point,s_min\nA," + fmt_g17(mins[0]) +
                        "\nB," + fmt_g17(mins[1]) + "\nC," + fmt_g17(mins[2]) +
                        "\n";
      emit(man, out_dir / (stem + "_minima.csv"), csv);
      rep.checks.push_back(
          {"best_at_A", mins[0] < mins[1] && mins[1] < mins[2] ? 1.0 : 0.0,
           1.0, 0.0});
      break;
    }
    case 9: {
      p = cfg("fig9.cfg");
      const std::vector<double> grid = {0.02, 0.05, 0.1, 0.2, 0.35,
                                        0.5,  0.75, 1.0, 1.5, 2.0};
      const SqueezeOptimum opt =
          optimize_squeezing(p, p.kappa_over_gamma, grid);
      std::string csv = "s_max,delta_c,s_x,s_min\n";
      for (const auto& row : opt.per_s_max) {
        csv += fmt_g17(row.s_max);
        csv += ',';
        csv += fmt_g17(row.delta_c);
        csv += ',';
        csv += fmt_g17(row.s_x);
        csv += ',';
        csv += fmt_g17(row.s_min);
        csv += '\n';
      }
      emit(man, out_dir / (stem + "_saturation.csv"), csv);
      const bool interior = opt.best.s_max != grid.front() &&
                            opt.best.s_max != grid.back();
      rep.checks.push_back({"optimal_saturation_interior",
                            interior ? 1.0 : 0.0, 1.0, 0.0});
      break;
    }
    case 10: {
      p = cfg("fig10.cfg");
      const std::vector<double> grid = {0.02, 0.05, 0.1, 0.2, 0.35, 0.5,
                                        0.75, 1.0,  1.5, 2.0, 3.0};
      double mins[3];
      const double rhos[3] = {2.0, 10.0, 50.0};
      std::string csv = "rho,s_max,s_min\n";
      for (int i = 0; i < 3; ++i) {
        const SqueezeOptimum opt = optimize_squeezing(p, rhos[i], grid);
        mins[i] = opt.best.s_min;
        csv += fmt_g17(rhos[i]);
        csv += ',';
        csv += fmt_g17(opt.best.s_max);
        csv += ',';
        csv += fmt_g17(opt.best.s_min);
        csv += '\n';
      }
      emit(man, out_dir / (stem + "_cavities.csv"), csv);
      rep.checks.push_back(
          {"monotone_in_rho", mins[0] > mins[1] && mins[1] > mins[2] ? 1.0 : 0.0,
           1.0, 0.0});
      rep.checks.push_back({"best_squeezing_rho50", mins[2], 0.25, 0.05});
      break;
    }
    default:
      throw config_error("unknown figure id " + std::to_string(fig) +
                         " (valid: 2..10)");
  }

  man.params = p;
  rep.print(fig);
  emit(man, out_dir / (stem + "_report.json"), rep.to_json().dump(2) + "\n");
  finish(man, out_dir, stem);
  return rep.all_pass() ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"4-level cavity polarization squeezing toolkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string config, scan = "delta_c", range = "-2:8:2000";
  std::string mode = "y", engine = "full", omega;
  std::string out_dir = ".", cfg_dir;
  int figure = 0;

  auto* steady = app.add_subcommand("steady", "steady-state branch scans");
  steady->add_option("config", config)->required();
  steady->add_option("--scan", scan)->check(CLI::IsMember({"delta_c", "s_max"}));
  steady->add_option("--range", range);
  steady->add_option("--out-dir", out_dir);

  auto* spectrum = app.add_subcommand("spectrum", "quadrature noise spectra");
  spectrum->add_option("config", config)->required();
  spectrum->add_option("--mode", mode)->check(CLI::IsMember({"x", "y"}));
  spectrum->add_option("--engine", engine)
      ->check(CLI::IsMember({"full", "kerr", "sr", "combined"}));
  spectrum->add_option("--omega", omega);
  spectrum->add_option("--out-dir", out_dir);

  auto* reproduce = app.add_subcommand("reproduce", "reproduce a figure dataset");
  reproduce->add_option("figure", figure)->required();
  reproduce->add_option("--out-dir", out_dir);
  reproduce->add_option("--config-dir", cfg_dir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::string cmdline = join_args(argc, argv);
  try {
    fs::create_directories(out_dir);
    if (steady->parsed())
      return cmd_steady(config, scan, range, out_dir, cmdline);
    if (spectrum->parsed())
      return cmd_spectrum(config, mode, engine, omega, out_dir, cmdline);
    return cmd_reproduce(figure, resolve_config_dir(cfg_dir), out_dir, cmdline);
  } catch (const config_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const physics_error& e) {
    std::fprintf(stderr, "physics error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 1;
  }
}

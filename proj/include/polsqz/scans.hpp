#pragma once
// Branch continuation: resonance curves vs cavity dephasing, bistability
// curves vs drive, turning points, and the PS-before-HT property scan.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "polsqz/steady_state.hpp"

namespace polsqz {

enum class SweptParam { delta_c, s_max };

struct BranchSample {
  double param = 0.0;
  SteadyState state;
  BranchId branch = BranchId::linear;
};

struct BranchCurve {
  SweptParam swept = SweptParam::delta_c;
  std::vector<BranchSample> samples;
  std::vector<double> turning_points;    // swept-parameter values
  std::optional<double> ps_threshold;    // swept-parameter value of C_PS = 0
};

// Stability oracle used for elliptical branches (wired to the fluctuation
// eigenvalue test by callers; criterion_ps handles only the linear branch).
using StabilityOracle = std::function<Stability(const SteadyState&)>;

// --- bistability vs s_max ---------------------------------------------------

// Drive needed to sustain intracavity S on the linear branch:
//   s_max(S) = S [(1+S+alpha0)^2 + (delta0 - delta_c(1+S))^2] / (1+S)^2
inline double s_max_of_S(double S, double delta_c, const DerivedScales& sc) {
  const double u = 1.0 + S;
  return S * (sqr(u + sc.alpha0) + sqr(sc.delta0 - delta_c * u)) / sqr(u);
}

inline double ds_max_dS(double S, double delta_c, const DerivedScales& sc) {
  const double u = 1.0 + S;
  const double g = sqr(u + sc.alpha0) + sqr(sc.delta0 - delta_c * u);
  const double gp =
      2.0 * (u + sc.alpha0) - 2.0 * delta_c * (sc.delta0 - delta_c * u);
  return g / sqr(u) + S * (gp * u - 2.0 * g) / (u * u * u);
}

// Interior extrema of s_max(S): (S, s_max) pairs, ascending in S. Bistable
// curves have exactly two, S_LT < S_HT.
inline std::vector<std::pair<double, double>> turning_points_s(
    double delta_c, const DerivedScales& sc, double s_hi = 1e4) {
  std::vector<std::pair<double, double>> tp;
  const double s_lo = 1e-9;
  const int n = 4000;
  double prev_s = s_lo, prev_d = ds_max_dS(s_lo, delta_c, sc);
  for (int i = 1; i <= n; ++i) {
    const double S = s_lo * std::pow(s_hi / s_lo, double(i) / n);
    const double d = ds_max_dS(S, delta_c, sc);
    if ((prev_d < 0.0) != (d < 0.0)) {
      double lo = prev_s, hi = S, dlo = prev_d;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double dm = ds_max_dS(mid, delta_c, sc);
        if ((dlo < 0.0) == (dm < 0.0)) {
          lo = mid;
          dlo = dm;
        } else {
          hi = mid;
        }
        if (hi - lo <= 1e-12 * std::max(1.0, hi)) break;
      }
      const double S_t = 0.5 * (lo + hi);
      tp.emplace_back(S_t, s_max_of_S(S_t, delta_c, sc));
    }
    prev_s = S;
    prev_d = d;
  }
  return tp;
}

// S-shaped curve S(s_max) at fixed delta_c, parametrized by S. A sample is
// stable iff it is not on the backward branch (between the turning points)
// and C_PS < 0.
inline BranchCurve bistability_curve(double delta_c, double s_max_lo,
                                     double s_max_hi, int n_samples,
                                     const DerivedScales& sc) {
  BranchCurve curve;
  curve.swept = SweptParam::s_max;
  const auto tp = turning_points_s(delta_c, sc);
  for (const auto& [S_t, s_t] : tp) curve.turning_points.push_back(s_t);

  // S range covering the requested s_max window on both outer branches
  double S_hi = std::max(1e-6, s_max_hi);
  while (s_max_of_S(S_hi, delta_c, sc) < s_max_hi && S_hi < 1e12) S_hi *= 2.0;
  const double S_lo = 1e-9;
  const auto s_ps = ps_threshold_intensity(delta_c, sc);
  if (s_ps && *s_ps <= S_hi)
    curve.ps_threshold = s_max_of_S(*s_ps, delta_c, sc);

  for (int i = 0; i < n_samples; ++i) {
    const double S =
        S_lo * std::pow(S_hi / S_lo, double(i) / std::max(1, n_samples - 1));
    const double sm = s_max_of_S(S, delta_c, sc);
    if (sm < s_max_lo || sm > s_max_hi) continue;
    SteadyState st = make_linear_state(S, delta_c, sm, sc);
    const bool backward =
        tp.size() == 2 && S > tp[0].first && S < tp[1].first;
    const bool ps_unstable = criterion_ps(S, sc, delta_c) >= 0.0;
    st.stability = (backward || ps_unstable) ? Stability::unstable
                                             : Stability::stable;
    curve.samples.push_back({sm, st, BranchId::linear});
  }
  return curve;
}

// --- PS-before-HT property ---------------------------------------------------

struct PsHtRow {
  double delta_c;
  double s_ps;    // intensity cancelling C_PS
  double s_ht;    // higher turning point intensity
  double margin;  // s_ps - s_ht
};

struct PsHtReport {
  std::vector<PsHtRow> rows;
  bool all_nonnegative = true;
  double min_margin = std::numeric_limits<double>::infinity();
};

// Checks S_PS(delta_c) >= S_HT(delta_c) across a dephasing grid; delta_c
// values without bistability are skipped. A violation is reported, not thrown.
inline PsHtReport ps_before_ht_scan(const DerivedScales& sc,
                                    const std::vector<double>& delta_c_grid) {
  PsHtReport rep;
  for (double dc : delta_c_grid) {
    const auto tp = turning_points_s(dc, sc);
    if (tp.size() != 2) continue;
    const double s_ht = tp[1].first;
    const auto s_ps = ps_threshold_intensity(dc, sc);
    const double sps =
        s_ps ? *s_ps : std::numeric_limits<double>::infinity();
    PsHtRow row{dc, sps, s_ht, sps - s_ht};
    rep.rows.push_back(row);
    rep.min_margin = std::min(rep.min_margin, row.margin);
    if (row.margin < 0.0) rep.all_nonnegative = false;
  }
  return rep;
}

// --- resonance scan vs delta_c ----------------------------------------------

struct ResonanceScan {
  BranchCurve linear;
  BranchCurve sigma_plus;   // x_sr < 0 solutions
  BranchCurve sigma_minus;  // x_sr > 0 solutions
  std::optional<double> delta_ps;       // C_PS = 0 crossing on the top root
  std::optional<double> s_ps;           // intensity there
  std::optional<double> delta_ex;       // edge of elliptical existence
  std::vector<double> fold_points;      // delta_c where the root count changes
};

namespace detail {

// C_PS along the largest linear root.
inline double cps_top_root(double delta_c, double s_max,
                           const DerivedScales& sc) {
  const auto roots = linear_branch_roots(delta_c, s_max, sc);
  return criterion_ps(roots.back(), sc, delta_c);
}

}  // namespace detail

// Rightmost C_PS = 0 crossing of the top linear root in [lo, hi].
inline std::optional<double> find_delta_ps(double s_max,
                                           const DerivedScales& sc, double lo,
                                           double hi, int grid = 2000) {
  double prev = detail::cps_top_root(hi, s_max, sc);
  double prev_dc = hi;
  for (int i = 1; i <= grid; ++i) {
    const double dc = hi - (hi - lo) * double(i) / grid;
    const double c = detail::cps_top_root(dc, s_max, sc);
    if ((prev < 0.0) && (c >= 0.0)) {
      double a = dc, b = prev_dc;  // C_PS >= 0 at a, < 0 at b
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (a + b);
        if (detail::cps_top_root(mid, s_max, sc) >= 0.0)
          a = mid;
        else
          b = mid;
        if (b - a <= 1e-12 * std::max(1.0, std::abs(b))) break;
      }
      return 0.5 * (a + b);
    }
    prev = c;
    prev_dc = dc;
  }
  return std::nullopt;
}

// Largest delta_c in [lo, hi] with elliptically polarized solutions.
inline std::optional<double> find_delta_ex(double s_max,
                                           const DerivedScales& sc, double lo,
                                           double hi, int grid = 400) {
  auto has_sol = [&](double dc) {
    return !elliptical_branch_solve(dc, s_max, sc).empty();
  };
  std::optional<double> last_with;
  for (int i = 0; i <= grid; ++i) {
    const double dc = lo + (hi - lo) * double(i) / grid;
    if (has_sol(dc)) last_with = dc;
  }
  if (!last_with) return std::nullopt;
  double a = *last_with, b = std::min(hi, *last_with + (hi - lo) / grid);
  if (!has_sol(b)) {
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (a + b);
      if (has_sol(mid))
        a = mid;
      else
        b = mid;
    }
  }
  return 0.5 * (a + b);
}

// Full resonance scan: linear branch with stability labels plus both
// elliptical branches. Elliptical stability comes from the oracle when given
// (eigenvalue test), otherwise stays undetermined.
inline ResonanceScan resonance_scan(double dc_lo, double dc_hi, int n_grid,
                                    double s_max, const DerivedScales& sc,
                                    const StabilityOracle& oracle = nullptr) {
  ResonanceScan scan;
  scan.linear.swept = SweptParam::delta_c;
  scan.sigma_plus.swept = SweptParam::delta_c;
  scan.sigma_minus.swept = SweptParam::delta_c;

  std::size_t prev_count = 0;
  double prev_dc = dc_lo;
  for (int i = 0; i < n_grid; ++i) {
    const double dc =
        dc_lo + (dc_hi - dc_lo) * double(i) / std::max(1, n_grid - 1);
    const auto roots = linear_branch_roots(dc, s_max, sc);
    for (std::size_t k = 0; k < roots.size(); ++k) {
      SteadyState st = make_linear_state(roots[k], dc, s_max, sc);
      const bool middle = roots.size() == 3 && k == 1;
      const bool ps_unstable = criterion_ps(roots[k], sc, dc) >= 0.0;
      st.stability = (middle || ps_unstable) ? Stability::unstable
                                             : Stability::stable;
      scan.linear.samples.push_back({dc, st, BranchId::linear});
    }
    if (i > 0 && roots.size() != prev_count) {
      // refine the fold between prev_dc and dc
      double a = prev_dc, b = dc;
      const std::size_t ca = prev_count;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (a + b);
        if (linear_branch_roots(mid, s_max, sc).size() == ca)
          a = mid;
        else
          b = mid;
      }
      scan.fold_points.push_back(0.5 * (a + b));
    }
    prev_count = roots.size();
    prev_dc = dc;

    for (const auto& st : elliptical_branch_solve(dc, s_max, sc)) {
      SteadyState s2 = st;
      s2.stability = oracle ? oracle(st) : Stability::undetermined;
      auto& curve = (st.x_sr < 0.0) ? scan.sigma_plus : scan.sigma_minus;
      curve.samples.push_back({dc, s2, st.branch()});
    }
  }

  scan.delta_ps = find_delta_ps(s_max, sc, dc_lo, dc_hi);
  if (scan.delta_ps) {
    const auto roots = linear_branch_roots(*scan.delta_ps, s_max, sc);
    scan.s_ps = roots.back();
    scan.linear.ps_threshold = scan.delta_ps;
  }
  scan.delta_ex = find_delta_ex(s_max, sc, dc_lo, dc_hi);
  return scan;
}

}  // namespace polsqz

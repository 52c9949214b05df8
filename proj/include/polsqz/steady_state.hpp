#pragma once
// Nonlinear intracavity steady states for the driven 4-level ensemble.
//
// Saturation parameters s+- = 2 g^2 |<A+->|^2 / (Delta^2 + gamma^2) describe
// the two circular components; S = 2 s+ s- / (s+ + s-) is the coupling
// saturation and x_sr = (s- - s+)/(s+ + s-) = -sin(2 eps) the asymmetry that
// drives self-rotation. Dephasings and absorptions split as
//   delta+- = delta_l (1 +- x_sr),  alpha+- = alpha_l (1 +- x_sr),
//   delta_l = delta0/(1+S),         alpha_l = alpha0/(1+S),
// and each circular component obeys
//   s+- = s_max / [(1 + alpha+-)^2 + (delta+- - delta_c)^2].
// Linear branch: x_sr = 0, S = s_x/2 solves a cubic. Elliptical branches:
// x_sr^2 is fixed by C_ex and the remaining scalar sum equation is solved on
// a log grid in S refined by bisection.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "polsqz/params.hpp"

namespace polsqz {

enum class Stability { stable, unstable, undetermined };

enum class BranchId { linear, sigma_plus_dominant, sigma_minus_dominant };

inline const char* to_string(Stability s) {
  switch (s) {
    case Stability::stable: return "stable";
    case Stability::unstable: return "unstable";
    default: return "undetermined";
  }
}

inline const char* to_string(BranchId b) {
  switch (b) {
    case BranchId::linear: return "linear";
    case BranchId::sigma_plus_dominant: return "sigma_plus_dominant";
    default: return "sigma_minus_dominant";
  }
}

struct AtomicMeans {
  double n1 = 0.0, n2 = 0.0, n3 = 0.0, n4 = 0.0;  // populations, sum = N
  cplx m14{0.0, 0.0};                             // <sigma_14>
  cplx m23{0.0, 0.0};                             // <sigma_23>
};

// Closed-form atomic steady state for given circular amplitudes. The formulas
// are 0/0 at s+ = s- = 0 (the ground split there is history dependent).
inline AtomicMeans atomic_means_from_amplitudes(cplx a_plus, cplx a_minus,
                                                const DerivedScales& sc) {
  const double d2g2 = sqr(sc.delta_abs) + sqr(sc.gamma);
  const double sp = 2.0 * sc.g2 * std::norm(a_plus) / d2g2;
  const double sm = 2.0 * sc.g2 * std::norm(a_minus) / d2g2;
  if (sp + sm <= 0.0)
    throw physics_error("atomic steady state degenerate at s+ = s- = 0");
  const double S = 2.0 * sp * sm / (sp + sm);
  const double rp = sp / (sp + sm);
  const double rm = sm / (sp + sm);
  const double N = sc.n_atoms;
  AtomicMeans m;
  m.n1 = N * rm * (1.0 + sp / 2.0) / (1.0 + S);
  m.n2 = N * rp * (1.0 + sm / 2.0) / (1.0 + S);
  m.n3 = 0.25 * N * S / (1.0 + S);
  m.n4 = m.n3;
  const cplx g_over = -iu() * std::sqrt(sc.g2) * N / cplx(sc.gamma, sc.delta_abs);
  m.m14 = g_over * a_plus * rm / (1.0 + S);
  m.m23 = g_over * a_minus * rp / (1.0 + S);
  return m;
}

// s-parameter entry point; amplitudes take the linear-drive phase convention
// a+ = -sqrt(.), a- = +sqrt(.) from the basis map applied to a real x drive.
inline AtomicMeans atomic_steady_state(double s_plus, double s_minus,
                                       const DerivedScales& sc) {
  if (s_plus < 0.0 || s_minus < 0.0)
    throw physics_error("atomic_steady_state: s+- must be >= 0");
  const double d2g2 = sqr(sc.delta_abs) + sqr(sc.gamma);
  const double ap = std::sqrt(s_plus * d2g2 / (2.0 * sc.g2));
  const double am = std::sqrt(s_minus * d2g2 / (2.0 * sc.g2));
  return atomic_means_from_amplitudes(cplx(-ap, 0.0), cplx(am, 0.0), sc);
}

struct Dephasings {
  double delta_l, delta_sr, alpha_l, alpha_sr;
  double delta_plus, delta_minus, alpha_plus, alpha_minus;
};

inline Dephasings dephasings_from(double S, double x_sr,
                                  const DerivedScales& sc) {
  Dephasings d;
  d.delta_l = sc.delta0 / (1.0 + S);
  d.alpha_l = sc.alpha0 / (1.0 + S);
  d.delta_sr = d.delta_l * x_sr;
  d.alpha_sr = d.alpha_l * x_sr;
  d.delta_plus = d.delta_l + d.delta_sr;
  d.delta_minus = d.delta_l - d.delta_sr;
  d.alpha_plus = d.alpha_l + d.alpha_sr;
  d.alpha_minus = d.alpha_l - d.alpha_sr;
  return d;
}

struct SteadyState {
  double s_plus = 0.0, s_minus = 0.0;
  double S = 0.0;
  double x_sr = 0.0;
  double ellipticity = 0.0;  // x_sr = -sin(2 eps)
  cplx a_plus{0.0, 0.0}, a_minus{0.0, 0.0};
  AtomicMeans atomic;
  double delta_l = 0.0, delta_sr = 0.0, alpha_l = 0.0, alpha_sr = 0.0;
  double theta_x = 0.0;
  Stability stability = Stability::undetermined;
  double delta_c = 0.0, s_max = 0.0;  // generating working point

  double s_x() const { return s_plus + s_minus; }
  cplx a_x() const { return (a_minus - a_plus) / std::sqrt(2.0); }
  cplx a_y() const { return -iu() * (a_plus + a_minus) / std::sqrt(2.0); }
  double intensity_x() const { return std::norm(a_x()); }
  BranchId branch() const {
    if (x_sr > 0.0) return BranchId::sigma_minus_dominant;
    if (x_sr < 0.0) return BranchId::sigma_plus_dominant;
    return BranchId::linear;
  }
};

inline Dephasings dephasings(const SteadyState& st, const DerivedScales& sc) {
  return dephasings_from(st.S, st.x_sr, sc);
}

// C_ex = C_PS = (delta0^2+alpha0^2)/(1+S)^2 - delta_c^2 - 1; for the linear
// branch S = s_x/2 and the two criteria coincide.
inline double criterion_ex(double S, const DerivedScales& sc, double delta_c) {
  return (sqr(sc.delta0) + sqr(sc.alpha0)) / sqr(1.0 + S) - sqr(delta_c) - 1.0;
}

inline double criterion_ps(double S, const DerivedScales& sc, double delta_c) {
  return criterion_ex(S, sc, delta_c);
}

// S_PS cancelling C_PS; absent when even S = 0 is below threshold.
inline std::optional<double> ps_threshold_intensity(double delta_c,
                                                    const DerivedScales& sc) {
  const double rad = (sqr(sc.delta0) + sqr(sc.alpha0)) / (1.0 + sqr(delta_c));
  if (rad <= 1.0) return std::nullopt;
  return std::sqrt(rad) - 1.0;
}

namespace detail {

// Intracavity fixed-point residual in the original form, relative to s_max.
inline double fixed_point_residual(const SteadyState& st,
                                   const DerivedScales& sc) {
  if (st.s_max == 0.0) return std::abs(st.s_plus) + std::abs(st.s_minus);
  const Dephasings d = dephasings_from(st.S, st.x_sr, sc);
  const double dp = st.s_plus * (sqr(1.0 + d.alpha_plus) +
                                 sqr(d.delta_plus - st.delta_c)) -
                    st.s_max;
  const double dm = st.s_minus * (sqr(1.0 + d.alpha_minus) +
                                  sqr(d.delta_minus - st.delta_c)) -
                    st.s_max;
  return std::max(std::abs(dp), std::abs(dm)) / st.s_max;
}

// Complex circular-component denominators (1 + alpha+-) + i(delta_c - delta+-).
inline std::pair<cplx, cplx> cavity_denominators(double S, double x_sr,
                                                 double delta_c,
                                                 const DerivedScales& sc) {
  const Dephasings d = dephasings_from(S, x_sr, sc);
  return {cplx(1.0 + d.alpha_plus, delta_c - d.delta_plus),
          cplx(1.0 + d.alpha_minus, delta_c - d.delta_minus)};
}

}  // namespace detail

// Assemble a full steady state from (S, x_sr) at a working point. Amplitudes
// are reconstructed from the intracavity relations for an x-polarized drive
// and globally re-phased so that <A_x> is real and positive (theta_x = 0).
inline SteadyState make_state(double S, double x_sr, double delta_c,
                              double s_max, const DerivedScales& sc) {
  SteadyState st;
  st.S = S;
  st.x_sr = x_sr;
  st.ellipticity = -0.5 * std::asin(std::clamp(x_sr, -1.0, 1.0));
  st.delta_c = delta_c;
  st.s_max = s_max;
  st.s_plus = (x_sr > -1.0) ? S / (1.0 + x_sr) : 0.0;
  st.s_minus = (x_sr < 1.0) ? S / (1.0 - x_sr) : 0.0;
  const Dephasings d = dephasings_from(S, x_sr, sc);
  st.delta_l = d.delta_l;
  st.delta_sr = d.delta_sr;
  st.alpha_l = d.alpha_l;
  st.alpha_sr = d.alpha_sr;

  const double d2g2 = sqr(sc.delta_abs) + sqr(sc.gamma);
  if (s_max > 0.0 && S > 0.0) {
    auto [Dp, Dm] = detail::cavity_denominators(S, x_sr, delta_c, sc);
    const double s_x_in = sc.cavity_T * s_max / 2.0;
    const double ax_in = std::sqrt(s_x_in * d2g2 / (2.0 * sc.g2));
    const double c = 2.0 / std::sqrt(sc.cavity_T);
    cplx ap = c * (-ax_in / std::sqrt(2.0)) / Dp;
    cplx am = c * (ax_in / std::sqrt(2.0)) / Dm;
    cplx ax = (am - ap) / std::sqrt(2.0);
    if (std::abs(ax) > 0.0) {
      const cplx phase = std::conj(ax) / std::abs(ax);
      ap *= phase;
      am *= phase;
    }
    st.a_plus = ap;
    st.a_minus = am;
    st.atomic = atomic_means_from_amplitudes(ap, am, sc);
  } else {
    // zero drive: report the symmetric ground split (convention; the true
    // split is history dependent)
    st.atomic.n1 = sc.n_atoms / 2.0;
    st.atomic.n2 = sc.n_atoms / 2.0;
  }
  st.theta_x = 0.0;
  return st;
}

inline SteadyState make_linear_state(double S, double delta_c, double s_max,
                                     const DerivedScales& sc) {
  return make_state(S, 0.0, delta_c, s_max, sc);
}

// Linear branch: roots S of the cleared cubic
//   (1+dc^2) S^3 + (2[(1+a0) - dc(d0-dc)] - smax) S^2
//   + ((1+a0)^2 + (d0-dc)^2 - 2 smax) S - smax = 0,
// solved by companion-matrix eigenvalues and polished by Newton steps.
inline std::vector<double> linear_branch_roots(double delta_c, double s_max,
                                               const DerivedScales& sc) {
  if (s_max < 0.0) throw physics_error("linear_branch_roots: s_max < 0");
  if (s_max == 0.0) return {0.0};
  const double a0 = sc.alpha0, d0 = sc.delta0, dc = delta_c;
  const double c3 = 1.0 + sqr(dc);
  const double c2 = 2.0 * ((1.0 + a0) - dc * (d0 - dc)) - s_max;
  const double c1 = sqr(1.0 + a0) + sqr(d0 - dc) - 2.0 * s_max;
  const double c0 = -s_max;

  Eigen::Matrix3cd comp = Eigen::Matrix3cd::Zero();
  comp(0, 2) = -c0 / c3;
  comp(1, 2) = -c1 / c3;
  comp(2, 2) = -c2 / c3;
  comp(1, 0) = 1.0;
  comp(2, 1) = 1.0;
  Eigen::ComplexEigenSolver<Eigen::Matrix3cd> es(comp, false);

  auto poly = [&](double S) { return ((c3 * S + c2) * S + c1) * S + c0; };
  auto dpoly = [&](double S) { return (3.0 * c3 * S + 2.0 * c2) * S + c1; };

  std::vector<double> roots;
  for (int i = 0; i < 3; ++i) {
    const cplx z = es.eigenvalues()(i);
    const double scale = std::max(1.0, std::abs(z));
    if (std::abs(z.imag()) > 1e-9 * scale) continue;
    double S = z.real();
    if (S < -1e-12) continue;
    for (int it = 0; it < 8; ++it) {
      const double dp = dpoly(S);
      if (dp == 0.0) break;
      const double step = poly(S) / dp;
      S -= step;
      if (std::abs(step) < 1e-16 * std::max(1.0, std::abs(S))) break;
    }
    S = std::max(S, 0.0);
    bool dup = false;
    for (double r : roots)
      if (std::abs(r - S) <= 1e-8 * std::max(1.0, std::abs(S))) dup = true;
    if (!dup) roots.push_back(S);
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

namespace detail {

// x_sr^2 from the ellipticity equation; negative when C_ex < 0.
inline double x_sr_squared(double S, double delta_c, const DerivedScales& sc) {
  const double l2 = (sqr(sc.delta0) + sqr(sc.alpha0)) / sqr(1.0 + S);
  return (l2 - sqr(delta_c) - 1.0) / l2;
}

// Scalar residual of the elliptical sum equation,
//   R(S) = u - [shat+(S,x) + shat-(S,x)],  u = 2S/(1-x^2).
// NaN where no admissible x exists.
inline double elliptical_residual(double S, double delta_c, double s_max,
                                  const DerivedScales& sc) {
  const double x2 = x_sr_squared(S, delta_c, sc);
  if (x2 < 0.0 || x2 >= 1.0) return std::numeric_limits<double>::quiet_NaN();
  const double x = std::sqrt(x2);
  const double u = 2.0 * S / (1.0 - x2);
  auto [Dp, Dm] = cavity_denominators(S, x, delta_c, sc);
  const double shat_p = s_max / std::norm(Dp);
  const double shat_m = s_max / std::norm(Dm);
  return u - (shat_p + shat_m);
}

}  // namespace detail

// Elliptically polarized solutions at a working point, as +-x_sr pairs.
// S is scanned on a log grid (400 points/decade, 1e-6 .. 10 s_max, clipped to
// the admissible C_ex >= 0 range) and sign changes are bisected to 1e-10.
inline std::vector<SteadyState> elliptical_branch_solve(
    double delta_c, double s_max, const DerivedScales& sc) {
  std::vector<SteadyState> out;
  if (s_max <= 0.0) return out;
  const double s_lo = 1e-6;
  const double s_hi = 10.0 * s_max;
  if (s_hi <= s_lo) return out;
  const int per_decade = 400;
  const int n = std::max(
      2, static_cast<int>(std::ceil(std::log10(s_hi / s_lo) * per_decade)));

  auto res = [&](double S) {
    return detail::elliptical_residual(S, delta_c, s_max, sc);
  };

  std::vector<double> found;
  double prev_s = s_lo, prev_r = res(s_lo);
  for (int i = 1; i <= n; ++i) {
    const double S = s_lo * std::pow(s_hi / s_lo, double(i) / n);
    const double r = res(S);
    if (std::isfinite(prev_r) && std::isfinite(r) &&
        ((prev_r < 0.0 && r > 0.0) || (prev_r > 0.0 && r < 0.0))) {
      double lo = prev_s, hi = S, rlo = prev_r;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double rm = res(mid);
        if (!std::isfinite(rm)) break;
        if ((rlo < 0.0) == (rm < 0.0)) {
          lo = mid;
          rlo = rm;
        } else {
          hi = mid;
        }
        if (hi - lo <= 1e-15 * std::max(1.0, hi)) break;
      }
      found.push_back(0.5 * (lo + hi));
    }
    prev_s = S;
    prev_r = r;
  }

  for (double S : found) {
    const double x2 = detail::x_sr_squared(S, delta_c, sc);
    if (x2 < 0.0) continue;
    const double x = std::sqrt(x2);
    out.push_back(make_state(S, +x, delta_c, s_max, sc));
    out.push_back(make_state(S, -x, delta_c, s_max, sc));
  }
  return out;
}

inline double fixed_point_residual(const SteadyState& st,
                                   const DerivedScales& sc) {
  return detail::fixed_point_residual(st, sc);
}

}  // namespace polsqz

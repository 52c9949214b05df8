#pragma once
// Analytic fluctuation theory in the large-detuning, low-saturation limit:
// Kerr susceptibility/correlation matrices for both linear modes, the
// self-rotation (SR) matrices for the vacuum mode, their combination, and the
// resulting output spectra.
//
// The 2x2 matrices act on (dA, dA^dag). Row 2 kernels are the conjugates of
// row 1 at -omega, so the doubled system stays self-consistent. The cavity
// normalization converting the atomic matrices into the dimensionless
// delta0/alpha0 form is a single scalar pair,
//   K_chi = 2 Delta delta0   (susceptibility),
//   K_sig = (2/T) K_chi      (noise),
// fixed by requiring the linear chi term to reproduce the
// -(1+i delta_c - i delta0) dA - alpha0 dA structure of the adiabatic cavity
// equation; with it the linear-loss noise comes out at exactly 4 alpha0/T,
// which is what vacuum preservation through a passive absorber demands.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "polsqz/parallel.hpp"
#include "polsqz/scans.hpp"
#include "polsqz/spectrum.hpp"
#include "polsqz/steady_state.hpp"

namespace polsqz {

enum class Mode { x, y };
enum class Regime { kerr, sr, combined };

inline const char* to_string(Mode m) { return m == Mode::x ? "x" : "y"; }
inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::kerr: return "kerr";
    case Regime::sr: return "sr";
    default: return "combined";
  }
}

struct LinearResponse {
  Eigen::Matrix2cd chi;    // susceptibility, appendix normalization
  Eigen::Matrix2cd sigma;  // noise correlations, appendix normalization
  double omega = 0.0;      // units of gamma
  Mode mode = Mode::y;
  Regime regime = Regime::kerr;
};

// mode_sign eps = +1 for the mean-field mode x, -1 for the vacuum mode y.
// chi = 1/(2D) I + 1/(2D^2) diag(i g + w, -i g - w)
//       - g2/(2D^3) [[2|Ax|^2, eps Ax^2], [eps Ax*^2, 2|Ax|^2]]
// sigma = (gamma/D^2) diag(1, 0): the frequency-independent linear loss.
inline LinearResponse kerr_response(double omega, const SteadyState& st,
                                    const DerivedScales& sc, int mode_sign) {
  const double w = omega * sc.gamma;
  const double D = sc.delta_abs;
  const cplx ax = st.a_x();
  const double i2 = std::norm(ax);
  const cplx ax2 = ax * ax;
  LinearResponse r;
  r.omega = omega;
  r.mode = mode_sign > 0 ? Mode::x : Mode::y;
  r.regime = Regime::kerr;
  r.chi = Eigen::Matrix2cd::Identity() / (2.0 * D);
  r.chi(0, 0) += (iu() * sc.gamma + w) / (2.0 * D * D);
  r.chi(1, 1) += (-iu() * sc.gamma - w) / (2.0 * D * D);
  const double k3 = sc.g2 / (2.0 * D * D * D);
  r.chi(0, 0) -= k3 * 2.0 * i2;
  r.chi(1, 1) -= k3 * 2.0 * i2;
  r.chi(0, 1) -= k3 * double(mode_sign) * ax2;
  r.chi(1, 0) -= k3 * double(mode_sign) * std::conj(ax2);
  r.sigma = Eigen::Matrix2cd::Zero();
  r.sigma(0, 0) = sc.gamma / (D * D);
  return r;
}

// Low-frequency SR completion for the vacuum mode. gamma_p = gamma_perp s_x.
inline LinearResponse sr_response(double omega, const SteadyState& st,
                                  const DerivedScales& sc) {
  const double w = omega * sc.gamma;
  const double D = sc.delta_abs;
  const double gp = sc.gamma_p_per_sx * st.s_x();
  const cplx ax = st.a_x();
  const cplx p = std::norm(ax) > 0.0 ? ax * ax / std::norm(ax) : cplx(1.0);
  const cplx f = gp / cplx(gp, -w);
  const double lor = gp * gp + w * w;
  LinearResponse r;
  r.omega = omega;
  r.mode = Mode::y;
  r.regime = Regime::sr;
  r.chi << 1.0, -p, -std::conj(p), 1.0;
  r.chi *= -f / (2.0 * D);
  Eigen::Matrix2cd s1, s2;
  s1 << 1.0, -p, -std::conj(p), 1.0;
  s1 *= gp * gp / (4.0 * sc.gamma_perp * lor);
  s2 << cplx(-2.0 * w), cplx(w, gp), cplx(w, -gp), cplx(0.0);
  s2 *= gp / (2.0 * D * lor);
  r.sigma = s1 + s2;
  return r;
}

inline LinearResponse combined_response(double omega, const SteadyState& st,
                                        const DerivedScales& sc) {
  LinearResponse k = kerr_response(omega, st, sc, -1);
  const LinearResponse s = sr_response(omega, st, sc);
  k.chi += s.chi;
  k.sigma += s.sigma;
  k.regime = Regime::combined;
  return k;
}

struct SpinFluctuation {
  cplx j_z_response;  // dJ_z / dS_z at this frequency
};

// Full-frequency ground-spin transfer from the Fourier-domain J_z equation,
//   -iw dJ_z = -gamma_p a(w) [dJ_z - l(w)(1 - s_x/2)(N/2) dS_z/|Ax|^2] + F_z,
// a(w) = (1 - iw/4g_perp) b(w)/l(w), b = 1 - s_x/(4 l), l = (2g-iw)/2(g-iw).
inline SpinFluctuation spin_transfer(double omega, const SteadyState& st,
                                     const DerivedScales& sc) {
  const double w = omega * sc.gamma;
  const double g = sc.gamma;
  const double sx = st.s_x();
  const double gp = sc.gamma_p_per_sx * sx;
  const cplx l = cplx(2.0 * g, -w) / (2.0 * cplx(g, -w));
  const cplx b = 1.0 - sx / (4.0 * l);
  const cplx a = (1.0 - iu() * w / (4.0 * sc.gamma_perp)) * b / l;
  const double i2 = std::norm(st.a_x());
  SpinFluctuation out;
  out.j_z_response = gp * a * l * (1.0 - sx / 2.0) * (sc.n_atoms / 2.0) /
                     ((gp * a - iu() * w) * i2);
  return out;
}

namespace detail {

inline LinearResponse response_for(Regime regime, Mode mode, double omega,
                                   const SteadyState& st,
                                   const DerivedScales& sc) {
  if (mode == Mode::x) {
    if (regime != Regime::kerr)
      throw config_error("mode x supports only the kerr regime");
    return kerr_response(omega, st, sc, +1);
  }
  switch (regime) {
    case Regime::kerr: return kerr_response(omega, st, sc, -1);
    case Regime::sr: {
      // linear response (dephasing + absorption) with the SR completion but
      // without the Kerr nonlinearity
      LinearResponse r = kerr_response(omega, st, sc, -1);
      const double k3 = sc.g2 / (2.0 * std::pow(sc.delta_abs, 3));
      const double i2 = std::norm(st.a_x());
      const cplx ax2 = st.a_x() * st.a_x();
      r.chi(0, 0) += k3 * 2.0 * i2;
      r.chi(1, 1) += k3 * 2.0 * i2;
      r.chi(0, 1) -= k3 * ax2;
      r.chi(1, 0) -= k3 * std::conj(ax2);
      const LinearResponse s = sr_response(omega, st, sc);
      r.chi += s.chi;
      r.sigma += s.sigma;
      r.regime = Regime::sr;
      return r;
    }
    default: return combined_response(omega, st, sc);
  }
}

// Cavity system matrix L(omega) acting on (dA, dA^dag):
//   L v = (2/sqrt(T)) v_in + F,  L = (-iw/kappa + 1 +- i delta_c) - M,
// with M = i K_chi diag(1,-1) chi.
inline Eigen::Matrix2cd cavity_system(const LinearResponse& r,
                                      const DerivedScales& sc,
                                      double delta_c) {
  const double w = r.omega * sc.gamma;
  const double kchi = 2.0 * sc.delta_abs * sc.delta0;
  Eigen::Matrix2cd M = iu() * kchi * r.chi;
  M.row(1) *= -1.0;
  Eigen::Matrix2cd L = Eigen::Matrix2cd::Zero();
  L(0, 0) = cplx(1.0, delta_c - w / sc.kappa);
  L(1, 1) = cplx(1.0, -delta_c - w / sc.kappa);
  return L - M;
}

// Noise correlations in the natural ordering <F_mu(w) F_nu(w')> (columns of
// the appendix convention swapped), cavity normalized.
inline Eigen::Matrix2cd cavity_noise(const LinearResponse& r,
                                     const DerivedScales& sc) {
  const double ksig = 4.0 * sc.delta_abs * sc.delta0 / sc.cavity_T;
  Eigen::Matrix2cd n;
  n.col(0) = r.sigma.col(1);
  n.col(1) = r.sigma.col(0);
  return ksig * n;
}

inline void check_invertible(const Eigen::Matrix2cd& L, double omega) {
  const double scale = std::max(
      1.0, std::abs(L(0, 0)) * std::abs(L(1, 1)) +
               std::abs(L(0, 1)) * std::abs(L(1, 0)));
  if (std::abs(L.determinant()) < 1e-12 * scale)
    throw physics_error("analytic spectrum: system matrix singular at omega = " +
                        std::to_string(omega) + " gamma (working point at an instability)");
}

// Output correlation matrix at one signed frequency.
inline Eigen::Matrix2cd output_correlations(Regime regime, Mode mode,
                                            double omega,
                                            const SteadyState& st,
                                            const DerivedScales& sc) {
  const LinearResponse rp = response_for(regime, mode, omega, st, sc);
  const LinearResponse rm = response_for(regime, mode, -omega, st, sc);
  const Eigen::Matrix2cd Lp = cavity_system(rp, sc, st.delta_c);
  const Eigen::Matrix2cd Lm = cavity_system(rm, sc, st.delta_c);
  check_invertible(Lp, omega);
  check_invertible(Lm, -omega);
  const Eigen::Matrix2cd Lpi = Lp.inverse();
  const Eigen::Matrix2cd Lmi = Lm.inverse();
  const Eigen::Matrix2cd Gp = 2.0 * Lpi - Eigen::Matrix2cd::Identity();
  const Eigen::Matrix2cd Gm = 2.0 * Lmi - Eigen::Matrix2cd::Identity();
  Eigen::Matrix2cd vin = Eigen::Matrix2cd::Zero();
  vin(0, 1) = 1.0;
  return Gp * vin * Gm.transpose() +
         sc.cavity_T * Lpi * cavity_noise(rp, sc) * Lmi.transpose();
}

}  // namespace detail

inline SpectrumResult analytic_spectrum(Regime regime, Mode mode,
                                        const SteadyState& st,
                                        const DerivedScales& sc,
                                        const SystemParams& params,
                                        std::span<const double> omega_grid,
                                        std::span<const double> theta_grid) {
  SpectrumResult r;
  r.omega.assign(omega_grid.begin(), omega_grid.end());
  r.theta.assign(theta_grid.begin(), theta_grid.end());
  r.mode = to_string(mode);
  r.engine = to_string(regime);
  r.params = params;
  r.v11.resize(r.omega.size());
  r.viso.resize(r.omega.size());
  std::exception_ptr fail;
  parallel_for(r.omega.size(), [&](std::size_t i) {
    try {
      const Eigen::Matrix2cd vp =
          detail::output_correlations(regime, mode, r.omega[i], st, sc);
      const Eigen::Matrix2cd vm =
          detail::output_correlations(regime, mode, -r.omega[i], st, sc);
      r.v11[i] = 0.5 * (vp(0, 0) + vm(0, 0));
      r.viso[i] = 0.5 * std::real(vp(0, 1) + vp(1, 0) + vm(0, 1) + vm(1, 0));
    } catch (...) {
      if (!fail) fail = std::current_exception();
    }
  });
  if (fail) std::rethrow_exception(fail);
  detail::finalize_spectrum(r);
  return r;
}

inline SpectrumResult analytic_spectrum(Regime regime, Mode mode,
                                        const SteadyState& st,
                                        const DerivedScales& sc,
                                        const SystemParams& params) {
  const auto w = default_omega_grid();
  const auto th = default_theta_grid();
  return analytic_spectrum(regime, mode, st, sc, params, w, th);
}

// --- working-point policy and saturation optimization ------------------------

// Rightmost delta_c where C_PS on the top linear root equals cps_target
// (slightly negative: stable, close to switching).
inline double delta_c_near_ps(double s_max, const DerivedScales& sc,
                              double cps_target = -0.05) {
  const double hi = std::sqrt(sqr(sc.delta0) + sqr(sc.alpha0)) + 2.0;
  const double lo = 0.0;
  auto h = [&](double dc) {
    const auto roots = linear_branch_roots(dc, s_max, sc);
    return criterion_ps(roots.back(), sc, dc) - cps_target;
  };
  const int grid = 800;
  double prev = h(hi);
  double prev_dc = hi;
  for (int i = 1; i <= grid; ++i) {
    const double dc = hi - (hi - lo) * double(i) / grid;
    const double v = h(dc);
    if (prev < 0.0 && v >= 0.0) {
      double a = dc, b = prev_dc;
      for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (a + b);
        if (h(mid) >= 0.0)
          a = mid;
        else
          b = mid;
      }
      return 0.5 * (a + b);
    }
    prev = v;
    prev_dc = dc;
  }
  throw physics_error("no working point with C_PS = target found");
}

}  // namespace polsqz

#pragma once
// Quantum Stokes parameters and polarization-squeezing reports.
//
//   S0 = Ax^Ax + Ay^Ay,  Sx = Ax^Ax - Ay^Ay,
//   Sy = Ax^Ay + Ay^Ax,  Sz = i (Ay^Ax - Ax^Ay).
// With this sign choice a pure sigma+ excitation has Sz = +S0.
//
// For an x-polarized mean field the first-order fluctuations are
//   dSy = |<Ax>| X_y(theta_x),  dSz = |<Ax>| X_y(theta_x + pi/2),
// so the normalized Stokes noise densities are quadrature spectra of the
// vacuum mode y. The rotated pair
//   S_sq     = cos(theta_x - theta_sq) Sy + sin(theta_x - theta_sq) Sz,
//   S_antisq = sin(theta_x - theta_sq) Sy - cos(theta_x - theta_sq) Sz
// maps onto the quadratures X_y(2 theta_x - theta_sq) and its orthogonal, so
// choosing theta_sq = 2 theta_x - theta_opt aligns S_sq with the squeezed
// quadrature without any external phase lock.

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "polsqz/spectrum.hpp"
#include "polsqz/steady_state.hpp"

namespace polsqz {

struct StokesMean {
  double s0 = 0.0, sx = 0.0, sy = 0.0, sz = 0.0;
};

inline StokesMean mean_stokes(cplx a_x, cplx a_y) {
  StokesMean m;
  m.s0 = std::norm(a_x) + std::norm(a_y);
  m.sx = std::norm(a_x) - std::norm(a_y);
  m.sy = 2.0 * std::real(std::conj(a_x) * a_y);
  m.sz = std::real(iu() * (std::conj(a_y) * a_x - std::conj(a_x) * a_y));
  return m;
}

inline StokesMean mean_stokes(const SteadyState& st) {
  return mean_stokes(st.a_x(), st.a_y());
}

struct StokesReport {
  StokesMean mean;
  std::vector<double> omega;
  std::vector<double> v_sy;  // V_Sy / S0
  std::vector<double> v_sz;  // V_Sz / S0
  double theta_x = 0.0;
  double theta_sq = 0.0;
  std::array<double, 2> squeezed_combo{1.0, 0.0};  // (cos, sin)(theta_x - theta_sq)
  std::vector<double> v_sq;      // V_{S_sq} / S0
  std::vector<double> v_antisq;  // V_{S_antisq} / S0
  bool polarization_squeezed = false;
  std::string params_hash;
};

inline double wrap_angle_pi(double th) {
  th = std::fmod(th, PI);
  if (th < 0.0) th += PI;
  return th;
}

// The theta_sq aligning S_sq with the quadrature squeezed at angle theta_opt.
inline double optimal_theta_sq(double theta_x, double theta_opt) {
  return wrap_angle_pi(2.0 * theta_x - theta_opt);
}

// Normalized Stokes noise densities from a mode-y spectrum at the same
// working point. theta_sq defaults to the angle that aligns S_sq with the
// globally squeezed quadrature.
inline StokesReport stokes_noise(const SpectrumResult& ay_spectrum,
                                 const SteadyState& st,
                                 const std::string& params_hash = {}) {
  if (ay_spectrum.mode != "y")
    throw config_error("stokes_noise expects a mode-y spectrum");
  if (!params_hash.empty() && !ay_spectrum.params_hash.empty() &&
      params_hash != ay_spectrum.params_hash)
    throw config_error(
        "stokes_noise: spectrum was computed at a different working point "
        "(params hash mismatch)");
  StokesReport rep;
  rep.mean = mean_stokes(st);
  rep.theta_x = st.theta_x;
  rep.omega = ay_spectrum.omega;
  rep.params_hash = ay_spectrum.params_hash;

  std::size_t iw_opt = 0;
  ay_spectrum.global_min(&iw_opt);
  rep.theta_sq = optimal_theta_sq(st.theta_x, ay_spectrum.theta_opt[iw_opt]);
  const double phi = st.theta_x - rep.theta_sq;
  rep.squeezed_combo = {std::cos(phi), std::sin(phi)};

  const std::size_t nw = rep.omega.size();
  rep.v_sy.resize(nw);
  rep.v_sz.resize(nw);
  rep.v_sq.resize(nw);
  rep.v_antisq.resize(nw);
  const double th_sq = 2.0 * st.theta_x - rep.theta_sq;
  for (std::size_t i = 0; i < nw; ++i) {
    rep.v_sy[i] = ay_spectrum.power_at(i, st.theta_x);
    rep.v_sz[i] = ay_spectrum.power_at(i, st.theta_x + PI / 2.0);
    rep.v_sq[i] = ay_spectrum.power_at(i, th_sq);
    rep.v_antisq[i] = ay_spectrum.power_at(i, th_sq - PI / 2.0);
    if (rep.v_sy[i] < 1.0 - 1e-9 || rep.v_sz[i] < 1.0 - 1e-9)
      rep.polarization_squeezed = true;
  }
  return rep;
}

// Coefficient pairs of (S_sq, S_antisq) in the (Sy, Sz) basis.
inline std::pair<std::array<double, 2>, std::array<double, 2>>
squeezed_decomposition(double theta_x, double theta_sq) {
  const double phi = theta_x - theta_sq;
  return {{std::cos(phi), std::sin(phi)}, {std::sin(phi), -std::cos(phi)}};
}

}  // namespace polsqz

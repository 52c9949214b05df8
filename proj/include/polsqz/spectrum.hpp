#pragma once
// Quadrature-noise spectrum container shared by the full and analytic
// engines. Per frequency the output field correlations reduce to
//   S(theta, omega) = viso + 2 Re(e^{-2 i theta} v11),
// with v11 = <dA dA> and viso = <dA dA^dag> + <dA^dag dA> spectral densities,
// symmetrized over +-omega and normalized so vacuum = 1 (shot noise).

#include <cmath>
#include <string>
#include <vector>

#include "polsqz/params.hpp"

namespace polsqz {

struct SpectrumResult {
  std::vector<double> omega;  // units of gamma, one-sided (>= 0)
  std::vector<double> theta;  // quadrature angles in [0, pi)
  std::vector<cplx> v11;      // symmetrized <dA dA> density per omega
  std::vector<double> viso;   // symmetrized isotropic part per omega
  std::vector<std::vector<double>> power;  // [i_theta][i_omega]
  std::vector<double> s_min;
  std::vector<double> s_max_trace;
  std::vector<double> theta_opt;
  std::string mode;    // "x" | "y"
  std::string engine;  // "full" | "kerr" | "sr" | "combined"
  SystemParams params;
  std::string params_hash;

  // Exact quadrature evaluation at arbitrary angle.
  double power_at(std::size_t i_omega, double th) const {
    const cplx rot = std::exp(cplx(0.0, -2.0 * th));
    return viso[i_omega] + 2.0 * std::real(rot * v11[i_omega]);
  }

  double global_min(std::size_t* i_omega = nullptr) const {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t i = 0; i < omega.size(); ++i)
      if (s_min[i] < best) { best = s_min[i]; arg = i; }
    if (i_omega) *i_omega = arg;
    return best;
  }
};

inline std::vector<double> default_theta_grid(int n = 180) {
  std::vector<double> th(n);
  for (int i = 0; i < n; ++i) th[i] = PI * double(i) / n;
  return th;
}

inline std::vector<double> log_omega_grid(double lo, double hi, int n) {
  std::vector<double> w(n);
  if (n == 1) { w[0] = lo; return w; }
  for (int i = 0; i < n; ++i)
    w[i] = lo * std::pow(hi / lo, double(i) / (n - 1));
  return w;
}

inline std::vector<double> linear_omega_grid(double lo, double hi, int n) {
  std::vector<double> w(n);
  if (n == 1) { w[0] = lo; return w; }
  for (int i = 0; i < n; ++i) w[i] = lo + (hi - lo) * double(i) / (n - 1);
  return w;
}

inline std::vector<double> default_omega_grid() {
  return log_omega_grid(1e-3, 1e2, 400);
}

namespace detail {

// Fill the derived fields from (v11, viso). Minimum over theta is
// viso - 2|v11| at theta = (arg v11 + pi)/2 (mod pi).
inline void finalize_spectrum(SpectrumResult& r) {
  const std::size_t nw = r.omega.size();
  r.s_min.resize(nw);
  r.s_max_trace.resize(nw);
  r.theta_opt.resize(nw);
  r.power.assign(r.theta.size(), std::vector<double>(nw));
  for (std::size_t i = 0; i < nw; ++i) {
    const double a = std::abs(r.v11[i]);
    r.s_min[i] = r.viso[i] - 2.0 * a;
    r.s_max_trace[i] = r.viso[i] + 2.0 * a;
    double th = 0.5 * (std::arg(r.v11[i]) + PI);
    th = std::fmod(th, PI);
    if (th < 0.0) th += PI;
    r.theta_opt[i] = (a > 0.0) ? th : 0.0;
    for (std::size_t j = 0; j < r.theta.size(); ++j)
      r.power[j][i] = r.power_at(i, r.theta[j]);
  }
}

}  // namespace detail

}  // namespace polsqz

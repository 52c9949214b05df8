#pragma once
// Physical parameters for a driven 4-level X scheme in a ring cavity, plus the
// circular<->linear polarization basis map.
//
// Unit conventions:
//  - gamma = gamma_perp + gamma_par (dipole decay 3->1/4->2 resp. 3->2/4->1)
//    sets the rate unit. `delta` and spectral frequencies are in units of
//    gamma; kappa = kappa_over_gamma * gamma = T/(2 tau).
//  - delta_c = 2 Phi_c/T is the normalized cavity dephasing, s_max = (2/T)
//    s_x^in the maximal intracavity intensity without absorption. The drive is
//    always specified through s_max; incident intensity is derived from it.
//  - dimensionless mode: g^2 = gamma, so n_atoms alone sets the collective
//    coupling N g^2. With the optional keys g2_hz (g^2 in 1/s) and gamma_hz
//    (gamma/2pi in Hz) the coupling is taken from experiment instead; this
//    only matters when quoting the cooperativity against absolute numbers.
//  - field envelopes are photon-flux normalized; the intracavity mean field
//    phase convention is theta_x = 0 (<A_x> real, positive) and all
//    phase-sensitive results quote angles relative to theta_x.

#include <cctype>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "polsqz/common.hpp"

namespace polsqz {

struct SystemParams {
  double gamma_perp = 1.0 / 3.0;
  double gamma_par = 2.0 / 3.0;
  double delta = 20.0;
  double n_atoms = 1.0;
  double cavity_T = 0.1;
  double kappa_over_gamma = 2.0;
  double delta_c = 0.0;
  double s_max = 0.0;
  std::optional<double> g2_hz;
  std::optional<double> gamma_hz;

  double gamma() const { return gamma_perp + gamma_par; }
  double delta_abs() const { return delta * gamma(); }
  double kappa() const { return kappa_over_gamma * gamma(); }
  double g2() const {
    if (g2_hz && gamma_hz) return *g2_hz / (2.0 * PI * *gamma_hz) * gamma();
    return gamma();
  }
  double ng2() const { return n_atoms * g2(); }
};

inline void validate(const SystemParams& p) {
  if (!(p.gamma_perp >= 0.0) || !(p.gamma_par >= 0.0) || !(p.gamma() > 0.0))
    throw config_error("gamma_perp + gamma_par must be positive");
  if (!(p.cavity_T > 0.0) || !(p.cavity_T <= 1.0))
    throw config_error("cavity_T must lie in (0, 1]");
  if (!(p.s_max >= 0.0)) throw config_error("s_max must be >= 0");
  // n_atoms = 0 is allowed as the empty-cavity reference
  if (!(p.n_atoms >= 0.0)) throw config_error("n_atoms must be >= 0");
  if (!(p.kappa_over_gamma > 0.0))
    throw config_error("kappa_over_gamma must be > 0");
  if (p.g2_hz.has_value() != p.gamma_hz.has_value())
    throw config_error("g2_hz and gamma_hz must be given together");
  if (p.g2_hz && (!(*p.g2_hz > 0.0) || !(*p.gamma_hz > 0.0)))
    throw config_error("g2_hz and gamma_hz must be positive");
}

struct DerivedScales {
  double delta0 = 0.0;          // 2 Phi0/T, Phi0 = N g^2 Delta / 2(Delta^2+gamma^2)
  double alpha0 = 0.0;          // 2 a0/T,   a0   = N g^2 gamma / 2(Delta^2+gamma^2)
  double kappa = 0.0;
  double cooperativity = 0.0;   // g^2 N / (T gamma)
  double gamma_p_per_sx = 0.0;  // gamma_p = gamma_perp * s_x
  // base quantities carried along for downstream modules
  double gamma = 0.0;
  double gamma_perp = 0.0;
  double gamma_par = 0.0;
  double delta_abs = 0.0;
  double g2 = 0.0;
  double n_atoms = 0.0;
  double cavity_T = 0.0;
};

inline DerivedScales derive_scales(const SystemParams& p) {
  if (!(p.gamma() > 0.0)) throw config_error("derive_scales: gamma must be > 0");
  DerivedScales s;
  s.gamma = p.gamma();
  s.gamma_perp = p.gamma_perp;
  s.gamma_par = p.gamma_par;
  s.delta_abs = p.delta_abs();
  s.g2 = p.g2();
  s.n_atoms = p.n_atoms;
  s.cavity_T = p.cavity_T;
  const double d2g2 = sqr(s.delta_abs) + sqr(s.gamma);
  const double phi0 = p.ng2() * s.delta_abs / (2.0 * d2g2);
  const double a0 = p.ng2() * s.gamma / (2.0 * d2g2);
  s.delta0 = 2.0 * phi0 / p.cavity_T;
  s.alpha0 = 2.0 * a0 / p.cavity_T;
  s.kappa = p.kappa();
  s.cooperativity = p.ng2() / (p.cavity_T * s.gamma);
  s.gamma_p_per_sx = p.gamma_perp;
  return s;
}

// alpha0 * Delta = delta0 * gamma holds exactly; the ratio form is undefined
// at Delta = 0.
inline double absorption_dephasing_ratio(const DerivedScales& s) {
  if (s.delta_abs == 0.0)
    throw physics_error("alpha0/delta0 ratio undefined at Delta = 0");
  return s.alpha0 / s.delta0;
}

struct FieldAmplitudePair {
  cplx a_plus;
  cplx a_minus;
};

// Eq.: A+ = -(Ax - i Ay)/sqrt(2), A- = (Ax + i Ay)/sqrt(2). Unitary, so the
// total intensity is preserved and the round trip is the identity.
inline FieldAmplitudePair to_circular(cplx a_x, cplx a_y) {
  const double r = 1.0 / std::sqrt(2.0);
  return {-(a_x - iu() * a_y) * r, (a_x + iu() * a_y) * r};
}

inline std::pair<cplx, cplx> to_linear(const FieldAmplitudePair& f) {
  const double r = 1.0 / std::sqrt(2.0);
  return {(f.a_minus - f.a_plus) * r, -iu() * (f.a_plus + f.a_minus) * r};
}

// --- flat key-value config ------------------------------------------------
//
// One `key = value` (or `key value`) pair per line, '#' starts a comment.
// Unknown keys are a hard error.

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw config_error("config: bad numeric value '" + value + "' for key '" +
                       key + "'");
  }
}

}  // namespace detail

inline SystemParams parse_config(std::istream& in, const std::string& origin) {
  SystemParams p;
  bool saw_g2 = false, saw_gamma_hz = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos)
      line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    std::string key, value;
    if (auto eq = line.find('='); eq != std::string::npos) {
      key = detail::trim(line.substr(0, eq));
      value = detail::trim(line.substr(eq + 1));
    } else {
      std::istringstream ls(line);
      ls >> key;
      std::getline(ls, value);
      value = detail::trim(value);
    }
    if (key.empty() || value.empty())
      throw config_error(origin + ":" + std::to_string(lineno) +
                         ": expected 'key = value'");
    const double v = detail::parse_double(key, value);
    if (key == "gamma_perp") p.gamma_perp = v;
    else if (key == "gamma_par") p.gamma_par = v;
    else if (key == "delta") p.delta = v;
    else if (key == "n_atoms") p.n_atoms = v;
    else if (key == "cavity_T") p.cavity_T = v;
    else if (key == "kappa_over_gamma") p.kappa_over_gamma = v;
    else if (key == "delta_c") p.delta_c = v;
    else if (key == "s_max") p.s_max = v;
    else if (key == "g2_hz") { p.g2_hz = v; saw_g2 = true; }
    else if (key == "gamma_hz") { p.gamma_hz = v; saw_gamma_hz = true; }
    else
      throw config_error(origin + ":" + std::to_string(lineno) +
                         ": unknown key '" + key + "'");
  }
  if (saw_g2 != saw_gamma_hz)
    throw config_error(origin + ": g2_hz and gamma_hz must be given together");
  validate(p);
  return p;
}

inline SystemParams load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw config_error("cannot open config file '" + path + "'");
  return parse_config(f, path);
}

}  // namespace polsqz

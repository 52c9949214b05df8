#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace polsqz {

using cplx = std::complex<double>;

inline constexpr double PI = 3.14159265358979323846;

// Malformed config file, unknown key, bad flag value.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Inputs are well formed but the requested physics does not exist
// (unstable working point, degenerate limit, no solution in range).
struct physics_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline cplx iu() { return cplx(0.0, 1.0); }

inline double sqr(double x) { return x * x; }

}  // namespace polsqz

// Exponential and logarithmic maps on the flat torus R/Z, applied per
// fractional-coordinate component.

#ifndef MCFLOW_TORUS_HPP_
#define MCFLOW_TORUS_HPP_

#include <cmath>

namespace mcflow {

// x mod 1 in [0, 1).
inline double wrap01(double x) {
  double r = x - std::floor(x);
  return r >= 1.0 ? 0.0 : r;
}

// Shortest signed arc from f to f_prime, in [-0.5, 0.5].
// Same value as atan2(sin(2 pi d), cos(2 pi d)) / (2 pi) with d = f_prime - f,
// including the antipodal tie atan2(0, -1) = +pi, i.e. +0.5.
inline double torus_log(double f, double f_prime) {
  double d = f_prime - f;
  return d - std::ceil(d - 0.5);
}

inline double torus_exp(double f, double v) { return wrap01(f + v); }

} // namespace mcflow
#endif

#pragma once

#include <cmath>
#include <limits>

namespace falign {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

// log(x) with log(0) = -inf; keeps zero-probability arcs out of the DPs
// without ever producing NaN.
inline double log_safe(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

// log(exp(a) + exp(b)), stable against overflow. -inf is the identity.
inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) {
    double t = a;
    a = b;
    b = t;
  }
  return a + std::log1p(std::exp(b - a));
}

}  // namespace falign

#pragma once

// Small numerical helpers shared across modules.

#include <cmath>
#include <stdexcept>

namespace catlab {

inline constexpr double kSqrt2 = 1.4142135623730950488016887242097;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267793994605993438;

inline double normal_pdf(double z) {
  return kInvSqrt2Pi * std::exp(-0.5 * z * z);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

/// Upper tail 1 - Phi(z), accurate far into the tail.
inline double normal_sf(double z) { return 0.5 * std::erfc(z / kSqrt2); }

/// Inverse Mills ratio phi(z) / (1 - Phi(z)).  erfc underflows past
/// z ~ 37; beyond that the continued-fraction asymptote
/// z + 1/(z + 2/(z + 3/(z + ...))) is exact to double precision.
inline double inverse_mills(double z) {
  if (z > 30.0) {
    double tail = 0.0;
    for (int k = 10; k >= 1; --k) tail = static_cast<double>(k) / (z + tail);
    return z + tail;
  }
  const double sf = normal_sf(z);
  if (sf <= 0.0) throw std::runtime_error("inverse_mills: survival underflow");
  return normal_pdf(z) / sf;
}

}  // namespace catlab

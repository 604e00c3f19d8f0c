#pragma once

// Affine term structure of default-free interest rates.
//
// Bond prices take the exponential-affine form
//     P(t, T) = F * exp(A(t, T) - B(t, T) * r_t)
// where (A, B) solve a pair of backward ODEs driven by the short-rate
// drift and diffusion coefficients:
//     1 + dB/dt + alpha(t) B - (1/2) gamma(t) B^2 = 0,   B(T, T) = 0
//         dA/dt - beta(t) B + (1/2) delta(t)  B^2 = 0,   A(T, T) = 0
// The Vasicek model admits closed forms for both; the ODE route is kept
// alongside it so either implementation can check the other.

#include <functional>
#include <utility>
#include <vector>

namespace catlab {

/// Ornstein-Uhlenbeck short rate dr = a (m - r) dt + s dW.
struct VasicekParams {
  double mean_reversion = 0.2;  // a, per year
  double long_run_mean = 0.03;  // m
  double volatility = 0.02;     // s, absolute, per sqrt(year)

  /// Throws std::invalid_argument unless a > 0 and s >= 0.
  void validate() const;
};

/// Time-dependent coefficients of the affine bond-price ODEs above.
/// Each callable takes calendar time t in years.
struct AffineCoefficients {
  std::function<double(double)> alpha;
  std::function<double(double)> beta;
  std::function<double(double)> gamma;
  std::function<double(double)> delta;
};

/// The coefficient set reproducing the Vasicek model:
/// alpha = -a, beta = a*m, gamma = 0, delta = s^2.
AffineCoefficients vasicek_coefficients(const VasicekParams& p);

/// Closed-form (A, B) for Vasicek.  Requires 0 <= t <= T; (0, 0) at t == T.
std::pair<double, double> vasicek_ab(const VasicekParams& p, double t,
                                     double T);

/// Closed-form zero-coupon bond price F * exp(A - B * r0).
double zcb_price(const VasicekParams& p, double r0, double face, double t,
                 double T);

/// (A, B) at a single (t, T) by RK4 backward integration of the affine
/// ODEs with step size at most `step` (the last step is shortened so the
/// grid lands on t exactly).
std::pair<double, double> riccati_ab(const AffineCoefficients& c, double t,
                                     double T, double step = 1e-4);

/// Backward solve for one terminal date, retaining the whole grid.
/// times is ascending from 0 to terminal; a.back() == b.back() == 0.
struct DiscountCurve {
  double terminal = 0.0;
  std::vector<double> times;
  std::vector<double> a;
  std::vector<double> b;

  /// Linear interpolation between grid nodes; t must lie in [0, terminal].
  double a_at(double t) const;
  double b_at(double t) const;
};

DiscountCurve riccati_solve(const AffineCoefficients& c, double terminal,
                            double step = 1e-4);

}  // namespace catlab

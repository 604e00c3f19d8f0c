#include "catlab/term_structure.hpp"

#include <cmath>
#include <stdexcept>

namespace catlab {

void VasicekParams::validate() const {
  if (!(mean_reversion > 0.0))
    throw std::invalid_argument("VasicekParams: mean_reversion must be > 0");
  if (!(volatility >= 0.0))
    throw std::invalid_argument("VasicekParams: volatility must be >= 0");
  if (!std::isfinite(long_run_mean))
    throw std::invalid_argument("VasicekParams: long_run_mean must be finite");
}

AffineCoefficients vasicek_coefficients(const VasicekParams& p) {
  p.validate();
  const double a = p.mean_reversion;
  const double m = p.long_run_mean;
  const double s2 = p.volatility * p.volatility;
  return AffineCoefficients{
      [a](double) { return -a; },
      [a, m](double) { return a * m; },
      [](double) { return 0.0; },
      [s2](double) { return s2; },
  };
}

std::pair<double, double> vasicek_ab(const VasicekParams& p, double t,
                                     double T) {
  p.validate();
  if (!(t >= 0.0) || !(T >= t))
    throw std::invalid_argument("vasicek_ab: need 0 <= t <= T");
  const double a = p.mean_reversion;
  const double m = p.long_run_mean;
  const double s2 = p.volatility * p.volatility;
  const double tau = T - t;
  const double b = (1.0 - std::exp(-a * tau)) / a;
  const double A =
      (m - s2 / (2.0 * a * a)) * (b - tau) - s2 * b * b / (4.0 * a);
  return {A, b};
}

double zcb_price(const VasicekParams& p, double r0, double face, double t,
                 double T) {
  if (!(face > 0.0)) throw std::invalid_argument("zcb_price: face must be > 0");
  const auto [A, b] = vasicek_ab(p, t, T);
  const double price = face * std::exp(A - b * r0);
  if (!std::isfinite(price))
    throw std::runtime_error("zcb_price: non-finite price");
  return price;
}

namespace {

struct OdeState {
  double A;
  double B;
};

// Right-hand side in calendar time s (integration runs backward from T):
//   dB/ds = -1 - alpha(s) B + (1/2) gamma(s) B^2
//   dA/ds =      beta(s)  B - (1/2) delta(s) B^2
OdeState rhs(const AffineCoefficients& c, double s, const OdeState& y) {
  const double b2 = y.B * y.B;
  return OdeState{c.beta(s) * y.B - 0.5 * c.delta(s) * b2,
                  -1.0 - c.alpha(s) * y.B + 0.5 * c.gamma(s) * b2};
}

OdeState rk4_step(const AffineCoefficients& c, double s, const OdeState& y,
                  double h) {
  const OdeState k1 = rhs(c, s, y);
  const OdeState k2 =
      rhs(c, s + 0.5 * h, {y.A + 0.5 * h * k1.A, y.B + 0.5 * h * k1.B});
  const OdeState k3 =
      rhs(c, s + 0.5 * h, {y.A + 0.5 * h * k2.A, y.B + 0.5 * h * k2.B});
  const OdeState k4 = rhs(c, s + h, {y.A + h * k3.A, y.B + h * k3.B});
  return OdeState{y.A + h / 6.0 * (k1.A + 2.0 * k2.A + 2.0 * k3.A + k4.A),
                  y.B + h / 6.0 * (k1.B + 2.0 * k2.B + 2.0 * k3.B + k4.B)};
}

void check_state(const OdeState& y) {
  if (!std::isfinite(y.A) || !std::isfinite(y.B))
    throw std::runtime_error("riccati: ODE state diverged");
}

}  // namespace

std::pair<double, double> riccati_ab(const AffineCoefficients& c, double t,
                                     double T, double step) {
  if (!(t >= 0.0) || !(T >= t))
    throw std::invalid_argument("riccati_ab: need 0 <= t <= T");
  if (!(step > 0.0)) throw std::invalid_argument("riccati_ab: step must be > 0");
  const double span = T - t;
  if (span == 0.0) return {0.0, 0.0};
  const auto n = static_cast<long>(std::ceil(span / step - 1e-12));
  const double h = span / static_cast<double>(n);
  OdeState y{0.0, 0.0};
  for (long i = 0; i < n; ++i) {
    const double s = T - static_cast<double>(i) * h;
    y = rk4_step(c, s, y, -h);
    check_state(y);
  }
  return {y.A, y.B};
}

DiscountCurve riccati_solve(const AffineCoefficients& c, double terminal,
                            double step) {
  if (!(terminal > 0.0))
    throw std::invalid_argument("riccati_solve: terminal must be > 0");
  if (!(step > 0.0))
    throw std::invalid_argument("riccati_solve: step must be > 0");
  const auto n = static_cast<long>(std::ceil(terminal / step - 1e-12));
  const double h = terminal / static_cast<double>(n);

  DiscountCurve curve;
  curve.terminal = terminal;
  curve.times.resize(static_cast<std::size_t>(n) + 1);
  curve.a.resize(curve.times.size());
  curve.b.resize(curve.times.size());

  OdeState y{0.0, 0.0};
  curve.times.back() = terminal;
  curve.a.back() = 0.0;
  curve.b.back() = 0.0;
  for (long i = n - 1; i >= 0; --i) {
    const double s = terminal - static_cast<double>(n - 1 - i) * h;
    y = rk4_step(c, s, y, -h);
    check_state(y);
    const auto idx = static_cast<std::size_t>(i);
    curve.times[idx] = static_cast<double>(i) * h;
    curve.a[idx] = y.A;
    curve.b[idx] = y.B;
  }
  return curve;
}

namespace {

double interp(const std::vector<double>& xs, const std::vector<double>& ys,
              double terminal, double t) {
  if (!(t >= 0.0) || !(t <= terminal))
    throw std::invalid_argument("DiscountCurve: t outside [0, terminal]");
  const auto n = xs.size();
  const double h = xs[1] - xs[0];
  auto idx = static_cast<std::size_t>(t / h);
  if (idx >= n - 1) idx = n - 2;
  const double w = (t - xs[idx]) / (xs[idx + 1] - xs[idx]);
  return ys[idx] * (1.0 - w) + ys[idx + 1] * w;
}

}  // namespace

double DiscountCurve::a_at(double t) const {
  return interp(times, a, terminal, t);
}

double DiscountCurve::b_at(double t) const {
  return interp(times, b, terminal, t);
}

}  // namespace catlab

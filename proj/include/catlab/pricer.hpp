#pragma once

// Risk-neutral CAT bond prices.
//
// Under independence of the rate and loss drivers, each promised cash
// flow at date t is worth (riskless discount) * (survival of the trigger):
//
//   price = sum_i  c_i * P(1, 0, t_i) * (1 - theta(t_i))
//         + F * P(1, 0, T) * ((1 - E[R]) * (1 - theta(T)) + E[R])
//
// with theta(t) = P(L(t) >= D) estimated per date.  A zero-coupon bond is
// the empty-schedule, zero-recovery case; a coupon bond without partial
// payback is the zero-recovery case.  Those degenerate forms are priced
// by the one engine below, so they coincide term by term.

#include <cstdint>
#include <vector>

#include "catlab/estimators.hpp"
#include "catlab/term_structure.hpp"

namespace catlab {

/// Which trigger-probability estimator prices each cash-flow date.
/// auto_switch uses importance sampling at dates where the expected
/// aggregate loss is still below the threshold (the rare regime) and
/// plain Monte Carlo once it is not.
enum class MethodPolicy { auto_switch, force_mc, force_is };

struct BondSpec {
  double face = 1.0;
  double maturity = 1.0;  // years
  std::vector<double> coupon_times;    // strictly ascending, in (0, maturity]
  std::vector<double> coupon_amounts;  // same length, each >= 0
  double threshold = 9e9;
  double expected_recovery = 0.0;  // E[R], fraction of face paid on trigger

  void validate() const;
};

/// n_coupons equally spaced payment dates i * maturity / n_coupons, each
/// paying coupon_rate * face.
BondSpec make_coupon_bond(double face, double maturity_years, int n_coupons,
                          double coupon_rate, double threshold,
                          double expected_recovery = 0.0);

struct DateEstimate {
  double time = 0.0;        // payment date, years
  double cash_flow = 0.0;   // promised amount
  double discount = 0.0;    // riskless P(1, 0, time)
  double prob_raw = 0.0;    // estimator output, unclamped
  double prob = 0.0;        // clamped to [0, 1], used in the price
  bool is_principal = false;
  EstimatorResult detail;
};

struct PriceResult {
  double price = 0.0;
  std::vector<DateEstimate> dates;  // coupons in schedule order, principal last
};

/// Prices the bond with n_paths simulation paths per payment date.
/// Date streams are derived from `seed`: index 0 for the principal date,
/// index i for the i-th coupon, so adding coupons never perturbs the
/// principal estimate and an empty schedule reproduces the zero-coupon
/// price exactly.
PriceResult price_cat_bond(const VasicekParams& rates, double r0,
                           const LossModel& model, const BondSpec& bond,
                           long n_paths, std::uint64_t seed,
                           MethodPolicy policy = MethodPolicy::auto_switch);

/// Zero-coupon convenience wrapper: empty schedule, zero recovery.
PriceResult price_zero_coupon_cat(const VasicekParams& rates, double r0,
                                  const LossModel& model, double face,
                                  double maturity_years, double threshold,
                                  long n_paths, std::uint64_t seed,
                                  MethodPolicy policy = MethodPolicy::auto_switch);

}  // namespace catlab

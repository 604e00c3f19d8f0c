#include "catlab/pricer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace catlab {

void BondSpec::validate() const {
  if (!(face > 0.0)) throw std::invalid_argument("BondSpec: face must be > 0");
  if (!(maturity > 0.0))
    throw std::invalid_argument("BondSpec: maturity must be > 0");
  if (coupon_times.size() != coupon_amounts.size())
    throw std::invalid_argument("BondSpec: schedule length mismatch");
  double prev = 0.0;
  for (double t : coupon_times) {
    if (!(t > prev) || !(t <= maturity))
      throw std::invalid_argument(
          "BondSpec: coupon dates must be strictly ascending in (0, maturity]");
    prev = t;
  }
  for (double c : coupon_amounts)
    if (!(c >= 0.0))
      throw std::invalid_argument("BondSpec: coupon amounts must be >= 0");
  if (!(expected_recovery >= 0.0) || !(expected_recovery <= 1.0))
    throw std::invalid_argument("BondSpec: expected_recovery must be in [0, 1]");
  if (!std::isfinite(threshold))
    throw std::invalid_argument("BondSpec: threshold must be finite");
}

BondSpec make_coupon_bond(double face, double maturity_years, int n_coupons,
                          double coupon_rate, double threshold,
                          double expected_recovery) {
  if (n_coupons < 0)
    throw std::invalid_argument("make_coupon_bond: n_coupons must be >= 0");
  if (!(coupon_rate >= 0.0))
    throw std::invalid_argument("make_coupon_bond: coupon_rate must be >= 0");
  BondSpec bond;
  bond.face = face;
  bond.maturity = maturity_years;
  bond.threshold = threshold;
  bond.expected_recovery = expected_recovery;
  bond.coupon_times.reserve(static_cast<std::size_t>(n_coupons));
  bond.coupon_amounts.reserve(static_cast<std::size_t>(n_coupons));
  for (int i = 1; i <= n_coupons; ++i) {
    // The final date is pinned to maturity: the quotient can land one ulp
    // past it and fail validation otherwise.
    bond.coupon_times.push_back(
        i == n_coupons ? maturity_years
                       : maturity_years * static_cast<double>(i) /
                             static_cast<double>(n_coupons));
    bond.coupon_amounts.push_back(coupon_rate * face);
  }
  bond.validate();
  return bond;
}

namespace {

EstimatorResult estimate_for_date(const LossModel& model, double threshold,
                                  double date, long n_paths,
                                  std::uint64_t stream_seed,
                                  MethodPolicy policy) {
  const TriggerSpec trigger{threshold, date};
  bool use_is = false;
  switch (policy) {
    case MethodPolicy::force_mc:
      use_is = false;
      break;
    case MethodPolicy::force_is:
      use_is = true;
      break;
    case MethodPolicy::auto_switch:
      use_is = expected_aggregate_loss(model, date) < threshold;
      break;
  }
  if (use_is)
    return is_trigger_probability(model, trigger, n_paths, stream_seed);
  return mc_trigger_probability(model, trigger, n_paths, stream_seed);
}

DateEstimate make_date_estimate(double time, double cash_flow, double discount,
                                bool is_principal, EstimatorResult detail) {
  DateEstimate d;
  d.time = time;
  d.cash_flow = cash_flow;
  d.discount = discount;
  d.prob_raw = detail.estimate;
  d.prob = std::clamp(detail.estimate, 0.0, 1.0);
  d.is_principal = is_principal;
  d.detail = std::move(detail);
  return d;
}

}  // namespace

PriceResult price_cat_bond(const VasicekParams& rates, double r0,
                           const LossModel& model, const BondSpec& bond,
                           long n_paths, std::uint64_t seed,
                           MethodPolicy policy) {
  rates.validate();
  model.validate();
  bond.validate();
  if (n_paths < 1)
    throw std::invalid_argument("price_cat_bond: need n_paths >= 1");

  PriceResult result;
  result.dates.reserve(bond.coupon_times.size() + 1);

  double price = 0.0;
  for (std::size_t i = 0; i < bond.coupon_times.size(); ++i) {
    const double t = bond.coupon_times[i];
    const double df = zcb_price(rates, r0, 1.0, 0.0, t);
    EstimatorResult est =
        estimate_for_date(model, bond.threshold, t, n_paths,
                          derive_seed(seed, static_cast<std::uint64_t>(i + 1)),
                          policy);
    DateEstimate d = make_date_estimate(t, bond.coupon_amounts[i], df, false,
                                        std::move(est));
    price += d.cash_flow * d.discount * (1.0 - d.prob);
    result.dates.push_back(std::move(d));
  }

  const double df_T = zcb_price(rates, r0, 1.0, 0.0, bond.maturity);
  EstimatorResult est_T = estimate_for_date(
      model, bond.threshold, bond.maturity, n_paths, derive_seed(seed, 0),
      policy);
  DateEstimate principal = make_date_estimate(bond.maturity, bond.face, df_T,
                                              true, std::move(est_T));
  price += bond.face * df_T *
           ((1.0 - bond.expected_recovery) * (1.0 - principal.prob) +
            bond.expected_recovery);
  result.dates.push_back(std::move(principal));

  if (!std::isfinite(price))
    throw std::runtime_error("price_cat_bond: non-finite price");
  result.price = price;
  return result;
}

PriceResult price_zero_coupon_cat(const VasicekParams& rates, double r0,
                                  const LossModel& model, double face,
                                  double maturity_years, double threshold,
                                  long n_paths, std::uint64_t seed,
                                  MethodPolicy policy) {
  BondSpec bond;
  bond.face = face;
  bond.maturity = maturity_years;
  bond.threshold = threshold;
  bond.expected_recovery = 0.0;
  return price_cat_bond(rates, r0, model, bond, n_paths, seed, policy);
}

}  // namespace catlab

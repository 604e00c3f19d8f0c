#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "catlab/loss_model.hpp"
#include "catlab/rng.hpp"
#include "fixtures/frozen_values.hpp"

using namespace catlab;
namespace fx = catlab_fixtures;

TEST_CASE("severity helpers: names, means, cdfs") {
  const SeverityDistribution g = GammaSeverity{};
  const SeverityDistribution l = LognormalSeverity{};
  CHECK(severity_name(g) == "gamma");
  CHECK(severity_name(l) == "lognormal");
  CHECK(severity_mean(g) == doctest::Approx(1.635e8).epsilon(1e-15));
  // E[logn] = exp(mu + sigma^2 / 2).
  CHECK(severity_mean(l) ==
        doctest::Approx(std::exp(18.4 + 0.5)).epsilon(1e-13));
  CHECK(severity_cdf(g, 0.0) == 0.0);
  CHECK(severity_cdf(l, 0.0) == 0.0);
  CHECK(severity_cdf(l, -1.0) == 0.0);
  // Gamma with shape 1 is exponential: F(x) = 1 - exp(-x / scale).
  const double x = 2.0e8;
  CHECK(severity_cdf(g, x) ==
        doctest::Approx(1.0 - std::exp(-x / 1.635e8)).epsilon(1e-12));
  // Lognormal median sits at exp(mu).
  CHECK(severity_cdf(l, std::exp(18.4)) == doctest::Approx(0.5).epsilon(1e-12));
  // Survival complements the cdf in the bulk and keeps precision in the
  // tail where 1 - cdf would round to zero.
  CHECK(severity_sf(g, x) ==
        doctest::Approx(1.0 - severity_cdf(g, x)).epsilon(1e-12));
  CHECK(severity_sf(g, 0.0) == 1.0);
  const double deep = 9e9;  // ~55 mean severities out
  CHECK(1.0 - severity_cdf(g, deep) == 0.0);
  CHECK(severity_sf(g, deep) > 0.0);
  CHECK(severity_sf(g, deep) ==
        doctest::Approx(std::exp(-deep / 1.635e8)).epsilon(1e-12));
  CHECK(severity_sf(l, deep) > 0.0);
}

TEST_CASE("model and trigger validation") {
  CHECK_NOTHROW(LossModel{}.validate());
  CHECK_NOTHROW(TriggerSpec{}.validate());
  CHECK_THROWS_AS((LossModel{-1.0, GammaSeverity{}}.validate()),
                  std::invalid_argument);
  CHECK_THROWS_AS((LossModel{35.0, GammaSeverity{0.0, 1.0}}.validate()),
                  std::invalid_argument);
  CHECK_THROWS_AS((LossModel{35.0, LognormalSeverity{0.0, -1.0}}.validate()),
                  std::invalid_argument);
  CHECK_THROWS_AS((TriggerSpec{9e9, 0.0}.validate()), std::invalid_argument);
}

TEST_CASE("compound path sampling matches first and second moments") {
  const LossModel model{};  // lambda = 35, gamma(1, 1.635e8)
  const double horizon = 1.0;
  const double mean_count = model.intensity * horizon;
  const int n = 20000;
  double sum = 0.0, sum_sq = 0.0, events = 0.0;
  RngStream stream(derive_seed(77, 0));
  for (int i = 0; i < n; ++i) {
    const CompoundPathSample s =
        sample_compound(mean_count, model.severity, stream);
    sum += s.total_loss;
    sum_sq += s.total_loss * s.total_loss;
    events += static_cast<double>(s.event_count);
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  // E[L] = lambda * t * E[X]; Var[L] = lambda * t * E[X^2] (shape 1: 2 scale^2).
  const double want_mean = mean_count * 1.635e8;
  const double want_var = mean_count * 2.0 * 1.635e8 * 1.635e8;
  CHECK(mean == doctest::Approx(want_mean).epsilon(0.02));
  CHECK(var == doctest::Approx(want_var).epsilon(0.06));
  CHECK(events / n == doctest::Approx(mean_count).epsilon(0.01));
  CHECK(expected_aggregate_loss(model, horizon) ==
        doctest::Approx(want_mean).epsilon(1e-13));
}

TEST_CASE("lognormal paths carry the log-severity sum for reweighting") {
  const LossModel model{35.0, LognormalSeverity{}};
  RngStream stream(derive_seed(3, 0));
  for (int i = 0; i < 50; ++i) {
    const CompoundPathSample s = sample_compound(35.0, model.severity, stream);
    if (s.event_count == 0) {
      CHECK(s.sum_log_severity == 0.0);
      CHECK(s.total_loss == 0.0);
    } else {
      CHECK(s.sum_log_severity > 0.0);
      // log-sum of positives is below log of the sum times the count bound.
      CHECK(s.total_loss > 0.0);
    }
  }
}

TEST_CASE("conditional trigger intensity steps down at the threshold") {
  const LossModel model{};
  const double threshold = 9e9;
  const double base = conditional_trigger_intensity(model, threshold, 0.0);
  const double mid = conditional_trigger_intensity(model, threshold, 5e9);
  const double near = conditional_trigger_intensity(model, threshold, 8.9e9);
  CHECK(base > 0.0);
  // Remaining gap shrinks, so the jump-to-trigger rate grows in l.
  CHECK(mid > base);
  CHECK(near > mid);
  CHECK(near <= model.intensity);
  CHECK(conditional_trigger_intensity(model, threshold, 9e9) == 0.0);
  CHECK(conditional_trigger_intensity(model, threshold, 1e10) == 0.0);
}

TEST_CASE("series oracle reproduces the frozen trigger probabilities") {
  const LossModel model{};
  const TriggerSpec base{};
  const struct {
    double horizon;
    double want;
  } rows[] = {
      {0.50, fx::kThetaGammaT050}, {0.75, fx::kThetaGammaT075},
      {1.00, fx::kThetaGammaT100}, {1.25, fx::kThetaGammaT125},
      {1.50, fx::kThetaGammaT150}, {2.00, fx::kThetaGammaT200},
  };
  for (const auto& row : rows) {
    const double got =
        trigger_prob_series_gamma(model, TriggerSpec{base.threshold, row.horizon});
    CHECK(got == doctest::Approx(row.want).epsilon(1e-9));
  }
}

TEST_CASE("series oracle edge cases and monotonicity") {
  const LossModel model{};
  // Longer horizon piles up more losses.
  double prev = 0.0;
  for (const double t : {0.25, 0.5, 1.0, 1.5, 2.0, 3.0}) {
    const double p = trigger_prob_series_gamma(model, TriggerSpec{9e9, t});
    CHECK(p > prev);
    CHECK(p < 1.0);
    prev = p;
  }
  // Zero or negative threshold is hit immediately.
  CHECK(trigger_prob_series_gamma(model, TriggerSpec{0.0, 1.0}) == 1.0);
  // Enormous threshold is unreachable at practical precision.
  CHECK(trigger_prob_series_gamma(model, TriggerSpec{1e15, 1.0}) ==
        doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  // Lognormal models are outside this oracle's closed-form reach.
  const LossModel logn{35.0, LognormalSeverity{}};
  CHECK_THROWS_AS((void)trigger_prob_series_gamma(logn, TriggerSpec{}),
                  std::invalid_argument);
}

TEST_CASE("direct simulation of the aggregate agrees with the oracle") {
  const LossModel model{};
  const TriggerSpec trigger{9e9, 2.0};  // p ~ 0.9, easy for plain sampling
  const double want = trigger_prob_series_gamma(model, trigger);
  const int n = 40000;
  int hits = 0;
  RngStream stream(derive_seed(11, 0));
  for (int i = 0; i < n; ++i)
    if (simulate_aggregate_loss(model, trigger.horizon, stream).total_loss >=
        trigger.threshold)
      ++hits;
  const double p_hat = static_cast<double>(hits) / n;
  const double se = std::sqrt(want * (1.0 - want) / n);
  CHECK(std::abs(p_hat - want) < 4.0 * se);
}

#pragma once

// Aggregate catastrophe losses as a compound Poisson process
//     L(t) = sum_{i=1}^{M(t)} X_i,
// with M a Poisson counting process of annual intensity lambda and X_i
// i.i.d. positive severities (Gamma or Lognormal).  The payout trigger is
// the first-passage event {L(T) >= D} for a contract threshold D.

#include <cstdint>
#include <string>
#include <variant>

#include "catlab/rng.hpp"

namespace catlab {

struct GammaSeverity {
  double shape = 1.0;
  double scale = 1.635e8;
};

struct LognormalSeverity {
  double log_mean = 18.4;
  double log_sd = 1.0;
};

using SeverityDistribution = std::variant<GammaSeverity, LognormalSeverity>;

/// "gamma" or "lognormal"; the spelling used in CSV columns and CLI flags.
std::string severity_name(const SeverityDistribution& sev);

double severity_mean(const SeverityDistribution& sev);

/// P(X <= x); 0 for x <= 0.
double severity_cdf(const SeverityDistribution& sev, double x);

/// P(X > x); 1 for x <= 0.  Computed directly (not as 1 - cdf), so deep
/// tail values keep full relative precision instead of underflowing.
double severity_sf(const SeverityDistribution& sev, double x);

struct LossModel {
  double intensity = 35.0;  // events per year
  SeverityDistribution severity = GammaSeverity{};

  /// Throws std::invalid_argument unless intensity > 0 and the severity
  /// parameters are positive and finite.
  void validate() const;
};

/// Payout condition: aggregate loss reaches `threshold` by `horizon` years.
struct TriggerSpec {
  double threshold = 9e9;
  double horizon = 1.0;

  /// Throws std::invalid_argument unless horizon > 0 and threshold finite.
  void validate() const;
};

/// One draw of (M, L(t)).  sum_log_severity accumulates ln X_i for
/// Lognormal severities (the importance-sampling weight needs it) and is
/// 0 for Gamma.
struct CompoundPathSample {
  long event_count = 0;
  double total_loss = 0.0;
  double sum_log_severity = 0.0;
};

/// Compound draw with Poisson count of the given mean.  The horizon is
/// already folded into count_mean, so tilted measures reuse this directly.
CompoundPathSample sample_compound(double count_mean,
                                   const SeverityDistribution& sev,
                                   RngStream& stream);

/// Physical-measure draw of L(horizon): count mean = intensity * horizon.
CompoundPathSample simulate_aggregate_loss(const LossModel& model,
                                           double horizon, RngStream& stream);

/// E[L(horizon)] = intensity * horizon * E[X].
double expected_aggregate_loss(const LossModel& model, double horizon);

/// Arrival rate of the payout event given current aggregate loss l:
/// lambda * (1 - F_X(D - l)) for l < D, and 0 once the trigger has fired.
/// This is the intensity under which the first-passage time is doubly
/// stochastic, and it is non-decreasing in l on [0, D).
double conditional_trigger_intensity(const LossModel& model, double threshold,
                                     double current_loss);

/// P(L(horizon) >= D) for Gamma severities by conditioning on the event
/// count: sum over n >= 1 of Poisson(n; lambda*t) * Q(n*shape, D/scale)
/// with Q the regularized upper incomplete gamma.  Terms are added until
/// the residual Poisson tail mass drops below tol.  Deterministic; serves
/// as the exact reference the sampling estimators are checked against.
double trigger_prob_series_gamma(const LossModel& model,
                                 const TriggerSpec& trigger, double tol = 1e-12);

}  // namespace catlab

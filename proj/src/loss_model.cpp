#include "catlab/loss_model.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <stdexcept>

#include "catlab/stats_math.hpp"

namespace catlab {

std::string severity_name(const SeverityDistribution& sev) {
  return std::holds_alternative<GammaSeverity>(sev) ? "gamma" : "lognormal";
}

double severity_mean(const SeverityDistribution& sev) {
  if (const auto* g = std::get_if<GammaSeverity>(&sev))
    return g->shape * g->scale;
  const auto& ln = std::get<LognormalSeverity>(sev);
  return std::exp(ln.log_mean + 0.5 * ln.log_sd * ln.log_sd);
}

double severity_cdf(const SeverityDistribution& sev, double x) {
  if (x <= 0.0) return 0.0;
  if (const auto* g = std::get_if<GammaSeverity>(&sev))
    return boost::math::gamma_p(g->shape, x / g->scale);
  const auto& ln = std::get<LognormalSeverity>(sev);
  return normal_cdf((std::log(x) - ln.log_mean) / ln.log_sd);
}

double severity_sf(const SeverityDistribution& sev, double x) {
  if (x <= 0.0) return 1.0;
  if (const auto* g = std::get_if<GammaSeverity>(&sev))
    return boost::math::gamma_q(g->shape, x / g->scale);
  const auto& ln = std::get<LognormalSeverity>(sev);
  return normal_sf((std::log(x) - ln.log_mean) / ln.log_sd);
}

namespace {

void validate_severity(const SeverityDistribution& sev) {
  if (const auto* g = std::get_if<GammaSeverity>(&sev)) {
    if (!(g->shape > 0.0) || !(g->scale > 0.0))
      throw std::invalid_argument(
          "GammaSeverity: shape and scale must be > 0");
    return;
  }
  const auto& ln = std::get<LognormalSeverity>(sev);
  if (!(ln.log_sd > 0.0) || !std::isfinite(ln.log_mean))
    throw std::invalid_argument(
        "LognormalSeverity: log_sd must be > 0 and log_mean finite");
}

}  // namespace

void LossModel::validate() const {
  if (!(intensity > 0.0))
    throw std::invalid_argument("LossModel: intensity must be > 0");
  validate_severity(severity);
}

void TriggerSpec::validate() const {
  if (!(horizon > 0.0))
    throw std::invalid_argument("TriggerSpec: horizon must be > 0");
  if (!std::isfinite(threshold))
    throw std::invalid_argument("TriggerSpec: threshold must be finite");
}

CompoundPathSample sample_compound(double count_mean,
                                   const SeverityDistribution& sev,
                                   RngStream& stream) {
  CompoundPathSample out;
  out.event_count = stream.poisson(count_mean);
  if (const auto* g = std::get_if<GammaSeverity>(&sev)) {
    for (long i = 0; i < out.event_count; ++i)
      out.total_loss += stream.gamma(g->shape, g->scale);
    return out;
  }
  const auto& ln = std::get<LognormalSeverity>(sev);
  for (long i = 0; i < out.event_count; ++i) {
    const double y = stream.normal(ln.log_mean, ln.log_sd);
    out.sum_log_severity += y;
    out.total_loss += std::exp(y);
  }
  return out;
}

CompoundPathSample simulate_aggregate_loss(const LossModel& model,
                                           double horizon, RngStream& stream) {
  model.validate();
  if (!(horizon >= 0.0))
    throw std::invalid_argument("simulate_aggregate_loss: horizon must be >= 0");
  return sample_compound(model.intensity * horizon, model.severity, stream);
}

double expected_aggregate_loss(const LossModel& model, double horizon) {
  model.validate();
  if (!(horizon >= 0.0))
    throw std::invalid_argument("expected_aggregate_loss: horizon must be >= 0");
  return model.intensity * horizon * severity_mean(model.severity);
}

double conditional_trigger_intensity(const LossModel& model, double threshold,
                                     double current_loss) {
  model.validate();
  if (current_loss >= threshold) return 0.0;
  return model.intensity * severity_sf(model.severity,
                                       threshold - current_loss);
}

double trigger_prob_series_gamma(const LossModel& model,
                                 const TriggerSpec& trigger, double tol) {
  model.validate();
  trigger.validate();
  const auto* g = std::get_if<GammaSeverity>(&model.severity);
  if (g == nullptr)
    throw std::invalid_argument(
        "trigger_prob_series_gamma: Gamma severities only");
  if (!(tol > 0.0))
    throw std::invalid_argument("trigger_prob_series_gamma: tol must be > 0");
  if (trigger.threshold <= 0.0) return 1.0;

  const double mean_count = model.intensity * trigger.horizon;
  const double x = trigger.threshold / g->scale;
  // pmf recursion with explicit residual-tail bookkeeping: the dropped
  // remainder is at most the residual Poisson tail since Q <= 1.
  double pmf = std::exp(-mean_count);
  double tail = 1.0 - pmf;  // P(M > 0)
  double total = 0.0;
  for (long n = 1; n <= 2000000; ++n) {
    pmf *= mean_count / static_cast<double>(n);
    tail -= pmf;
    if (tail < 0.0) tail = 0.0;
    total += pmf * boost::math::gamma_q(static_cast<double>(n) * g->shape, x);
    if (tail < tol && static_cast<double>(n) > mean_count) break;
  }
  return total;
}

}  // namespace catlab

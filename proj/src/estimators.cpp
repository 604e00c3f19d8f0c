#include "catlab/estimators.hpp"

#include <cmath>
#include <stdexcept>

#include "catlab/stats_math.hpp"

namespace catlab {

namespace {

struct Welford {
  long n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean);
  }

  double variance() const {
    return n < 2 ? 0.0 : m2 / static_cast<double>(n - 1);
  }
};

EstimatorResult finish(const Welford& acc, EstimatorMethod method,
                       std::optional<TiltParams> tilt) {
  EstimatorResult r;
  r.estimate = acc.mean;
  r.sample_variance = acc.variance();
  r.std_error = std::sqrt(r.sample_variance / static_cast<double>(acc.n));
  r.n_samples = acc.n;
  r.method = method;
  r.tilt = std::move(tilt);
  return r;
}

EstimatorResult degenerate_result(EstimatorMethod method, long n) {
  EstimatorResult r;
  r.estimate = 1.0;
  r.n_samples = n;
  r.method = method;
  r.degenerate_threshold = true;
  return r;
}

void check_inputs(const LossModel& model, const TriggerSpec& trigger, long n) {
  model.validate();
  trigger.validate();
  if (n < 1) throw std::invalid_argument("estimator: need n >= 1 paths");
}

}  // namespace

double mc_path_value(const LossModel& model, const TriggerSpec& trigger,
                     RngStream& stream) {
  const CompoundPathSample path = sample_compound(
      model.intensity * trigger.horizon, model.severity, stream);
  return path.total_loss >= trigger.threshold ? 1.0 : 0.0;
}

double is_path_value(const LossModel& model, const TriggerSpec& trigger,
                     const TiltParams& tilt, RngStream& stream) {
  const double mean_count = model.intensity * trigger.horizon;
  const double log_count_term = mean_count * (std::exp(tilt.count_tilt) - 1.0);
  const CompoundPathSample path =
      sample_compound(tilt.tilted_count_mean, tilt.tilted_severity, stream);
  if (path.total_loss < trigger.threshold) return 0.0;

  if (const auto* g = std::get_if<GammaSeverity>(&model.severity)) {
    if (!std::holds_alternative<GammaSeverity>(tilt.tilted_severity))
      throw std::invalid_argument("is_path_value: tilt family mismatch");
    const double beta_b = g->scale * tilt.severity_tilt;
    if (!(beta_b < 1.0))
      throw std::invalid_argument(
          "is_path_value: severity tilt must keep b < 1/scale");
    // Weight exp(lambda t (e^a - 1) - a N) (1 - beta b)^{-k N} exp(-b L).
    const double log_w =
        log_count_term +
        static_cast<double>(path.event_count) *
            (-g->shape * std::log1p(-beta_b) - tilt.count_tilt) -
        tilt.severity_tilt * path.total_loss;
    return std::exp(log_w);
  }

  const auto& ln = std::get<LognormalSeverity>(model.severity);
  if (!std::holds_alternative<LognormalSeverity>(tilt.tilted_severity))
    throw std::invalid_argument("is_path_value: tilt family mismatch");
  const double mu = ln.log_mean;
  const double s2 = ln.log_sd * ln.log_sd;
  const double b = tilt.severity_tilt;
  // Per-event factor exp(((mu+b)^2 - mu^2) / (2 sigma^2)) exp(-b Y / sigma^2)
  // undoes the log-mean shift of each severity draw Y = ln X.
  const double log_shift_term = ((mu + b) * (mu + b) - mu * mu) / (2.0 * s2);
  const double log_w =
      log_count_term +
      static_cast<double>(path.event_count) * (log_shift_term - tilt.count_tilt) -
      b * path.sum_log_severity / s2;
  return std::exp(log_w);
}

EstimatorResult mc_trigger_probability(const LossModel& model,
                                       const TriggerSpec& trigger, long n,
                                       std::uint64_t seed) {
  check_inputs(model, trigger, n);
  if (trigger.threshold <= 0.0)
    return degenerate_result(EstimatorMethod::plain_mc, n);
  Welford acc;
  for (long i = 0; i < n; ++i) {
    RngStream stream(derive_seed(seed, static_cast<std::uint64_t>(i)));
    acc.add(mc_path_value(model, trigger, stream));
  }
  return finish(acc, EstimatorMethod::plain_mc, std::nullopt);
}

TiltParams gamma_tilt(const LossModel& model, const TriggerSpec& trigger) {
  model.validate();
  trigger.validate();
  const auto* g = std::get_if<GammaSeverity>(&model.severity);
  if (g == nullptr)
    throw std::invalid_argument("gamma_tilt: Gamma severities only");
  if (!(trigger.threshold > 0.0))
    throw std::invalid_argument("gamma_tilt: threshold must be > 0");

  const double mean_count = model.intensity * trigger.horizon;
  const double d = trigger.threshold;
  TiltParams tilt;
  tilt.count_tilt = 0.5 * std::log(d / (mean_count * g->shape * g->scale));
  tilt.tilted_count_mean = mean_count * std::exp(tilt.count_tilt);
  tilt.severity_tilt = 1.0 / g->scale - tilt.tilted_count_mean * g->shape / d;
  // 1 - beta*b = sqrt(lambda t k beta / d) > 0, so the tilted scale is
  // always admissible and the tilted mean count*shape*scale equals d.
  tilt.tilted_severity =
      GammaSeverity{g->shape, 1.0 / (1.0 / g->scale - tilt.severity_tilt)};
  return tilt;
}

TiltParams lognormal_tilt(const LossModel& model, const TriggerSpec& trigger,
                          double tol) {
  model.validate();
  trigger.validate();
  const auto* ln = std::get_if<LognormalSeverity>(&model.severity);
  if (ln == nullptr)
    throw std::invalid_argument("lognormal_tilt: Lognormal severities only");
  if (!(trigger.threshold > 0.0))
    throw std::invalid_argument("lognormal_tilt: threshold must be > 0");
  if (!(tol > 0.0))
    throw std::invalid_argument("lognormal_tilt: tol must be > 0");

  const double mean_count = model.intensity * trigger.horizon;
  const double mu = ln->log_mean;
  const double sigma = ln->log_sd;
  const double s2 = sigma * sigma;
  const double log_d = std::log(trigger.threshold);

  const auto grad = [&](double b) {
    const double z = (log_d - mu + b) / sigma;
    return (2.0 * mean_count * b / s2) * std::exp(0.5 * b * b / s2) -
           inverse_mills(z) / sigma;
  };

  // grad(0) < 0 and grad is strictly increasing; double the upper bracket
  // until it turns positive, then bisect.
  double lo = 0.0;
  double hi = sigma;
  for (int i = 0; grad(hi) <= 0.0; ++i) {
    hi *= 2.0;
    if (i > 200) throw std::runtime_error("lognormal_tilt: bracket failed");
  }
  for (int i = 0; i < 400 && (hi - lo) > tol * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (grad(mid) < 0.0 ? lo : hi) = mid;
  }
  const double b = 0.5 * (lo + hi);

  TiltParams tilt;
  tilt.severity_tilt = b;
  tilt.count_tilt = 0.5 * b * b / s2;
  tilt.tilted_count_mean = mean_count * std::exp(tilt.count_tilt);
  tilt.tilted_severity = LognormalSeverity{mu + b, sigma};
  return tilt;
}

EstimatorResult is_trigger_probability(
    const LossModel& model, const TriggerSpec& trigger, long n,
    std::uint64_t seed, const std::optional<TiltParams>& tilt_override) {
  check_inputs(model, trigger, n);
  const bool gamma_family =
      std::holds_alternative<GammaSeverity>(model.severity);
  const EstimatorMethod method = gamma_family ? EstimatorMethod::is_gamma
                                              : EstimatorMethod::is_lognormal;
  if (trigger.threshold <= 0.0) return degenerate_result(method, n);
  const TiltParams tilt = tilt_override.has_value()
                              ? *tilt_override
                              : (gamma_family ? gamma_tilt(model, trigger)
                                              : lognormal_tilt(model, trigger));
  Welford acc;
  for (long i = 0; i < n; ++i) {
    RngStream stream(derive_seed(seed, static_cast<std::uint64_t>(i)));
    acc.add(is_path_value(model, trigger, tilt, stream));
  }
  return finish(acc, method, tilt);
}

}  // namespace catlab

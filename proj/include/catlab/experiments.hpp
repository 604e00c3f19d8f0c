#pragma once

// Reproducible experiment harness: dataset generation for the surrogate,
// estimator convergence traces, method comparison tables, and surrogate
// sensitivity sweeps.  Every routine is a pure function of its config
// (timing columns aside) and emits deterministic CSV.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "catlab/estimators.hpp"
#include "catlab/pricer.hpp"
#include "catlab/surrogate.hpp"
#include "catlab/term_structure.hpp"

namespace catlab {

// Default sampling ranges of the training dataset; sweep rows outside
// them are flagged as extrapolation.
inline constexpr double kDatasetR0Min = 0.0;
inline constexpr double kDatasetR0Max = 0.08;
inline constexpr double kDatasetIntensityMin = 30.0;
inline constexpr double kDatasetIntensityMax = 40.0;
inline constexpr double kDatasetThresholdMin = 7e9;
inline constexpr double kDatasetThresholdMax = 13e9;
inline constexpr double kDatasetMaturityDaysMin = 90.0;
inline constexpr double kDatasetMaturityDaysMax = 720.0;

/// Days-per-year convention used to convert maturity_days to year
/// fractions everywhere in this library.
inline constexpr double kDaysPerYear = 360.0;

struct DatasetConfig {
  long n_samples = 50000;
  SeverityDistribution severity = GammaSeverity{};
  double r0_min = kDatasetR0Min;
  double r0_max = kDatasetR0Max;
  double intensity_min = kDatasetIntensityMin;
  double intensity_max = kDatasetIntensityMax;
  double threshold_min = kDatasetThresholdMin;
  double threshold_max = kDatasetThresholdMax;
  double maturity_days_min = kDatasetMaturityDaysMin;
  double maturity_days_max = kDatasetMaturityDaysMax;
  std::vector<int> coupon_counts = {0, 2, 3, 4, 6, 8, 10, 12};
  double coupon_rate = 0.05;
  double face = 1.0;
  VasicekParams rates{};
  long mc_paths_per_date = 5000;
  MethodPolicy policy = MethodPolicy::auto_switch;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Draws row i from stream derive(seed, i) (inputs from child 0, pricing
/// from child 1), prices it, and keeps rows whose label is a valid price
/// in (0, face + total coupons].  Failing rows are reported on stderr and
/// skipped.  Degenerate min == max ranges pin a parameter exactly.
std::vector<TrainingSample> generate_dataset(const DatasetConfig& config);

void write_dataset_csv(const std::string& path,
                       const std::vector<TrainingSample>& rows,
                       const std::string& severity);

struct DatasetFile {
  std::string severity;
  std::vector<TrainingSample> rows;
};

/// Parses the dataset schema
///   r0,lambda,threshold,maturity_days,n_coupons,severity,price
/// requiring one uniform severity family per file.
DatasetFile read_dataset_csv(const std::string& path);

/// Running estimator means after each of 1..n_max paths, plain MC and IS
/// side by side on independent streams.  The k-th running mean uses the
/// same per-path streams as the estimators, so row n_max reproduces
/// mc_trigger_probability / is_trigger_probability exactly.
struct TracePoint {
  long n = 0;
  double mc = 0.0;
  double is = 0.0;
};

struct TraceOptions {
  std::uint64_t mc_seed = 0;
  std::uint64_t is_seed = 0;
  std::optional<TiltParams> tilt_override;  // e.g. zero tilt for parity checks
};

/// Default stream split: MC from derive(seed, 0), IS from derive(seed, 1).
TraceOptions trace_options_from_seed(std::uint64_t seed);

std::vector<TracePoint> convergence_trace(const LossModel& model,
                                          const TriggerSpec& trigger,
                                          long n_max,
                                          const TraceOptions& options);

void write_trace_csv(const std::string& path,
                     const std::vector<TracePoint>& points);

/// Side-by-side pricing table: simulation with the automatic MC/IS switch
/// against the trained surrogate, with an optional column of externally
/// computed integro-PDE reference prices loaded from a fixture file.
struct ComparisonCase {
  int n_coupons = 0;
  double maturity_years = 1.0;
};

struct MethodComparisonConfig {
  std::vector<ComparisonCase> cases = {{0, 1.0}, {2, 1.0}, {4, 1.0},
                                       {8, 2.0}, {12, 2.0}};
  double r0 = 0.03;
  double intensity = 35.0;
  double threshold = 9e9;
  double coupon_rate = 0.05;
  double face = 1.0;
  VasicekParams rates{};
  long n_paths = 100000;  // per payment date, simulation column
  int nn_batch = 1000;    // prices per timed surrogate batch
  std::uint64_t seed = 7;
  std::string model_path_gamma;      // empty: surrogate column left blank
  std::string model_path_lognormal;  // empty: surrogate column left blank
  std::string pide_reference_path;   // empty: reference column left blank
};

struct ComparisonRow {
  std::string severity;
  int n_coupons = 0;
  double maturity_years = 0.0;
  double mc_is_price = 0.0;
  double mc_is_seconds = 0.0;
  std::optional<double> nn_price;
  std::optional<double> nn_seconds_per_price;
  std::optional<double> pide_price;
  std::optional<double> pide_hours;
};

/// Rows come out gamma cases first, then lognormal, in case order; the
/// simulation price of output row j uses seed derive(config.seed, j).
/// Surrogate timing is the median of 5 batches of nn_batch predictions
/// after 3 warmup batches; the simulation column is timed once per cell
/// (its runtime is seconds, self-averaging).
std::vector<ComparisonRow> method_comparison(
    const MethodComparisonConfig& config);

void write_comparison_csv(const std::string& path,
                          const std::vector<ComparisonRow>& rows);

/// Surrogate sensitivity: vary one input over a grid at fixed values of
/// the others, for each coupon count.  Deltas are successive differences
/// along the grid within one coupon-count series (0 for the first row).
/// extrapolated marks grid values outside the default dataset ranges.
enum class SweepParameter { threshold, intensity, short_rate };

std::string sweep_parameter_name(SweepParameter p);

struct SweepSpec {
  SweepParameter varying = SweepParameter::threshold;
  std::vector<double> grid;
  double r0 = 0.03;
  double intensity = 35.0;
  double threshold = 9e9;
  double maturity_days = 360.0;
  std::vector<int> coupon_counts = {0, 4, 8, 12};
  // Reserved for simulation-backed sweeps; surrogate predictions are
  // deterministic, so it has no effect here.
  bool common_seed = true;
};

struct SweepRow {
  std::string parameter;
  double value = 0.0;
  int n_coupons = 0;
  double prediction = 0.0;
  double delta_abs = 0.0;
  double delta_rel = 0.0;
  bool extrapolated = false;
};

std::vector<SweepRow> sensitivity_sweep(const MlpModel& model,
                                        const SweepSpec& spec);

void write_sweep_csv(const std::string& path,
                     const std::vector<SweepRow>& rows);

/// Evenly spaced grid, inclusive of both endpoints (n >= 2).
std::vector<double> linspace(double lo, double hi, int n);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

}  // namespace catlab

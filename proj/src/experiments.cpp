#include "catlab/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace catlab {

std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<double> linspace(double lo, double hi, int n) {
  if (n < 2) throw std::invalid_argument("linspace: need n >= 2");
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] =
        lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

void DatasetConfig::validate() const {
  if (n_samples < 1)
    throw std::invalid_argument("DatasetConfig: n_samples must be >= 1");
  if (!(r0_min <= r0_max) || !(intensity_min <= intensity_max) ||
      !(threshold_min <= threshold_max) ||
      !(maturity_days_min <= maturity_days_max))
    throw std::invalid_argument("DatasetConfig: range bounds out of order");
  if (!(intensity_min > 0.0))
    throw std::invalid_argument("DatasetConfig: intensity range must be > 0");
  if (!(threshold_min > 0.0))
    throw std::invalid_argument("DatasetConfig: threshold range must be > 0");
  if (!(maturity_days_min > 0.0))
    throw std::invalid_argument("DatasetConfig: maturity range must be > 0");
  if (coupon_counts.empty())
    throw std::invalid_argument("DatasetConfig: coupon_counts empty");
  for (int n : coupon_counts)
    if (n < 0)
      throw std::invalid_argument("DatasetConfig: coupon counts must be >= 0");
  if (!(coupon_rate >= 0.0))
    throw std::invalid_argument("DatasetConfig: coupon_rate must be >= 0");
  if (!(face > 0.0))
    throw std::invalid_argument("DatasetConfig: face must be > 0");
  if (mc_paths_per_date < 1)
    throw std::invalid_argument("DatasetConfig: mc_paths_per_date must be >= 1");
  rates.validate();
}

std::vector<TrainingSample> generate_dataset(const DatasetConfig& config) {
  config.validate();
  LossModel model;
  model.severity = config.severity;

  std::vector<TrainingSample> rows;
  rows.reserve(static_cast<std::size_t>(config.n_samples));
  for (long i = 0; i < config.n_samples; ++i) {
    const std::uint64_t row_seed =
        derive_seed(config.seed, static_cast<std::uint64_t>(i));
    RngStream inputs(derive_seed(row_seed, 0));

    TrainingSample row;
    row.r0 = inputs.uniform(config.r0_min, config.r0_max);
    row.intensity = inputs.uniform(config.intensity_min, config.intensity_max);
    row.threshold = inputs.uniform(config.threshold_min, config.threshold_max);
    row.maturity_days =
        inputs.uniform(config.maturity_days_min, config.maturity_days_max);
    const auto pick = static_cast<std::size_t>(
        inputs.next_u64() % config.coupon_counts.size());
    const int n_coupons = config.coupon_counts[pick];
    row.n_coupons = static_cast<double>(n_coupons);

    try {
      model.intensity = row.intensity;
      const BondSpec bond = make_coupon_bond(
          config.face, row.maturity_days / kDaysPerYear, n_coupons,
          config.coupon_rate, row.threshold);
      const PriceResult priced =
          price_cat_bond(config.rates, row.r0, model, bond,
                         config.mc_paths_per_date, derive_seed(row_seed, 1),
                         config.policy);
      row.price = priced.price;
      const double max_price =
          config.face * (1.0 + config.coupon_rate *
                                   static_cast<double>(n_coupons));
      if (!(row.price > 0.0) || !(row.price <= max_price))
        throw std::runtime_error("label outside (0, face + coupons]");
      rows.push_back(row);
    } catch (const std::exception& e) {
      std::cerr << "generate_dataset: skipped row " << i << ": " << e.what()
                << '\n';
    }
  }
  return rows;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double(const std::string& s, const char* what) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc{} || res.ptr != end)
    throw std::runtime_error(std::string("CSV: bad ") + what + " value '" +
                             s + "'");
  return v;
}

}  // namespace

void write_dataset_csv(const std::string& path,
                       const std::vector<TrainingSample>& rows,
                       const std::string& severity) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_dataset_csv: cannot open " + path);
  out << "r0,lambda,threshold,maturity_days,n_coupons,severity,price\n";
  for (const TrainingSample& r : rows) {
    out << format_double(r.r0) << ',' << format_double(r.intensity) << ','
        << format_double(r.threshold) << ',' << format_double(r.maturity_days)
        << ',' << format_double(r.n_coupons) << ',' << severity << ','
        << format_double(r.price) << '\n';
  }
  if (!out) throw std::runtime_error("write_dataset_csv: write failed");
}

DatasetFile read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_dataset_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("read_dataset_csv: empty file " + path);
  if (line == "r0,lambda,threshold,maturity_days,n_coupons,severity,price\r")
    line.pop_back();
  if (line != "r0,lambda,threshold,maturity_days,n_coupons,severity,price")
    throw std::runtime_error("read_dataset_csv: unexpected header in " + path);

  DatasetFile file;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 7)
      throw std::runtime_error("read_dataset_csv: expected 7 fields, got " +
                               std::to_string(fields.size()));
    TrainingSample row;
    row.r0 = parse_double(fields[0], "r0");
    row.intensity = parse_double(fields[1], "lambda");
    row.threshold = parse_double(fields[2], "threshold");
    row.maturity_days = parse_double(fields[3], "maturity_days");
    row.n_coupons = parse_double(fields[4], "n_coupons");
    if (fields[5] != "gamma" && fields[5] != "lognormal")
      throw std::runtime_error("read_dataset_csv: unknown severity '" +
                               fields[5] + "'");
    if (file.rows.empty())
      file.severity = fields[5];
    else if (file.severity != fields[5])
      throw std::runtime_error(
          "read_dataset_csv: mixed severity families in " + path);
    row.price = parse_double(fields[6], "price");
    file.rows.push_back(row);
  }
  return file;
}

TraceOptions trace_options_from_seed(std::uint64_t seed) {
  TraceOptions options;
  options.mc_seed = derive_seed(seed, 0);
  options.is_seed = derive_seed(seed, 1);
  return options;
}

std::vector<TracePoint> convergence_trace(const LossModel& model,
                                          const TriggerSpec& trigger,
                                          long n_max,
                                          const TraceOptions& options) {
  model.validate();
  trigger.validate();
  if (n_max < 1) throw std::invalid_argument("convergence_trace: n_max >= 1");
  const bool gamma_family =
      std::holds_alternative<GammaSeverity>(model.severity);
  const TiltParams tilt = options.tilt_override.has_value()
                              ? *options.tilt_override
                              : (gamma_family
                                     ? gamma_tilt(model, trigger)
                                     : lognormal_tilt(model, trigger));

  std::vector<TracePoint> points(static_cast<std::size_t>(n_max));
  double mc_mean = 0.0;
  double is_mean = 0.0;
  for (long i = 0; i < n_max; ++i) {
    RngStream mc_stream(
        derive_seed(options.mc_seed, static_cast<std::uint64_t>(i)));
    RngStream is_stream(
        derive_seed(options.is_seed, static_cast<std::uint64_t>(i)));
    const double mc_x = mc_path_value(model, trigger, mc_stream);
    const double is_x = is_path_value(model, trigger, tilt, is_stream);
    const double k = static_cast<double>(i + 1);
    mc_mean += (mc_x - mc_mean) / k;
    is_mean += (is_x - is_mean) / k;
    points[static_cast<std::size_t>(i)] = TracePoint{i + 1, mc_mean, is_mean};
  }
  return points;
}

void write_trace_csv(const std::string& path,
                     const std::vector<TracePoint>& points) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_trace_csv: cannot open " + path);
  out << "n,mc_estimate,is_estimate\n";
  for (const TracePoint& p : points)
    out << p.n << ',' << format_double(p.mc) << ',' << format_double(p.is)
        << '\n';
  if (!out) throw std::runtime_error("write_trace_csv: write failed");
}

namespace {

struct PideKey {
  std::string severity;
  int n_coupons;
  double maturity_years;

  bool operator<(const PideKey& o) const {
    if (severity != o.severity) return severity < o.severity;
    if (n_coupons != o.n_coupons) return n_coupons < o.n_coupons;
    return maturity_years < o.maturity_years;
  }
};

std::map<PideKey, std::pair<double, double>> load_pide_reference(
    const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("method_comparison: cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("method_comparison: empty reference " + path);
  std::map<PideKey, std::pair<double, double>> table;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 5)
      throw std::runtime_error("method_comparison: bad reference row");
    PideKey key{fields[0],
                static_cast<int>(parse_double(fields[1], "n_coupons")),
                parse_double(fields[2], "maturity_years")};
    table[key] = {parse_double(fields[3], "pide_price"),
                  parse_double(fields[4], "pide_hours")};
  }
  return table;
}

}  // namespace

std::vector<ComparisonRow> method_comparison(
    const MethodComparisonConfig& config) {
  config.rates.validate();
  if (config.n_paths < 1 || config.nn_batch < 1)
    throw std::invalid_argument("method_comparison: bad budgets");

  std::map<PideKey, std::pair<double, double>> pide;
  if (!config.pide_reference_path.empty())
    pide = load_pide_reference(config.pide_reference_path);

  using clock = std::chrono::steady_clock;
  std::vector<ComparisonRow> rows;
  std::uint64_t out_index = 0;

  const SeverityDistribution families[2] = {GammaSeverity{},
                                            LognormalSeverity{}};
  const std::string* model_paths[2] = {&config.model_path_gamma,
                                       &config.model_path_lognormal};
  for (int f = 0; f < 2; ++f) {
    std::optional<MlpModel> surrogate;
    if (!model_paths[f]->empty()) surrogate = load_mlp(*model_paths[f]);
    LossModel model{config.intensity, families[f]};

    for (const ComparisonCase& c : config.cases) {
      ComparisonRow row;
      row.severity = severity_name(families[f]);
      row.n_coupons = c.n_coupons;
      row.maturity_years = c.maturity_years;

      const BondSpec bond =
          make_coupon_bond(config.face, c.maturity_years, c.n_coupons,
                           config.coupon_rate, config.threshold);
      const auto t0 = clock::now();
      const PriceResult priced =
          price_cat_bond(config.rates, config.r0, model, bond, config.n_paths,
                         derive_seed(config.seed, out_index),
                         MethodPolicy::auto_switch);
      const auto t1 = clock::now();
      row.mc_is_price = priced.price;
      row.mc_is_seconds =
          std::chrono::duration<double>(t1 - t0).count();

      if (surrogate.has_value()) {
        TrainingSample features;
        features.r0 = config.r0;
        features.intensity = config.intensity;
        features.threshold = config.threshold;
        features.maturity_days = c.maturity_years * kDaysPerYear;
        features.n_coupons = static_cast<double>(c.n_coupons);
        row.nn_price = predict(*surrogate, features);

        Eigen::MatrixXd batch(kSurrogateFeatures, config.nn_batch);
        for (int j = 0; j < config.nn_batch; ++j) {
          batch(kFeatR0, j) = features.r0;
          batch(kFeatIntensity, j) = features.intensity;
          batch(kFeatThreshold, j) = features.threshold;
          batch(kFeatMaturityDays, j) = features.maturity_days;
          batch(kFeatNCoupons, j) = features.n_coupons;
        }
        for (int warm = 0; warm < 3; ++warm)
          (void)predict_batch(*surrogate, batch);
        std::vector<double> timings(5);
        for (auto& t : timings) {
          const auto b0 = clock::now();
          volatile double sink = predict_batch(*surrogate, batch).sum();
          (void)sink;
          const auto b1 = clock::now();
          t = std::chrono::duration<double>(b1 - b0).count();
        }
        std::sort(timings.begin(), timings.end());
        row.nn_seconds_per_price =
            timings[2] / static_cast<double>(config.nn_batch);
      }

      const auto it = pide.find(
          PideKey{row.severity, c.n_coupons, c.maturity_years});
      if (it != pide.end()) {
        row.pide_price = it->second.first;
        row.pide_hours = it->second.second;
      }

      rows.push_back(std::move(row));
      ++out_index;
    }
  }
  return rows;
}

void write_comparison_csv(const std::string& path,
                          const std::vector<ComparisonRow>& rows) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("write_comparison_csv: cannot open " + path);
  out << "severity,n_coupons,maturity_years,mc_is_price,mc_is_seconds,"
         "nn_price,nn_seconds_per_price,pide_price,pide_hours\n";
  const auto opt = [](const std::optional<double>& v) {
    return v.has_value() ? format_double(*v) : std::string();
  };
  for (const ComparisonRow& r : rows) {
    out << r.severity << ',' << r.n_coupons << ','
        << format_double(r.maturity_years) << ','
        << format_double(r.mc_is_price) << ','
        << format_double(r.mc_is_seconds) << ',' << opt(r.nn_price) << ','
        << opt(r.nn_seconds_per_price) << ',' << opt(r.pide_price) << ','
        << opt(r.pide_hours) << '\n';
  }
  if (!out) throw std::runtime_error("write_comparison_csv: write failed");
}

std::string sweep_parameter_name(SweepParameter p) {
  switch (p) {
    case SweepParameter::threshold:
      return "threshold";
    case SweepParameter::intensity:
      return "lambda";
    case SweepParameter::short_rate:
      return "r0";
  }
  throw std::invalid_argument("sweep_parameter_name: bad enum");
}

std::vector<SweepRow> sensitivity_sweep(const MlpModel& model,
                                        const SweepSpec& spec) {
  if (spec.grid.empty())
    throw std::invalid_argument("sensitivity_sweep: empty grid");
  if (spec.coupon_counts.empty())
    throw std::invalid_argument("sensitivity_sweep: empty coupon_counts");

  double range_lo = 0.0;
  double range_hi = 0.0;
  switch (spec.varying) {
    case SweepParameter::threshold:
      range_lo = kDatasetThresholdMin;
      range_hi = kDatasetThresholdMax;
      break;
    case SweepParameter::intensity:
      range_lo = kDatasetIntensityMin;
      range_hi = kDatasetIntensityMax;
      break;
    case SweepParameter::short_rate:
      range_lo = kDatasetR0Min;
      range_hi = kDatasetR0Max;
      break;
  }

  const std::string name = sweep_parameter_name(spec.varying);
  std::vector<SweepRow> rows;
  rows.reserve(spec.grid.size() * spec.coupon_counts.size());
  for (int n_coupons : spec.coupon_counts) {
    double prev = 0.0;
    bool have_prev = false;
    for (double value : spec.grid) {
      TrainingSample features;
      features.r0 = spec.r0;
      features.intensity = spec.intensity;
      features.threshold = spec.threshold;
      features.maturity_days = spec.maturity_days;
      features.n_coupons = static_cast<double>(n_coupons);
      switch (spec.varying) {
        case SweepParameter::threshold:
          features.threshold = value;
          break;
        case SweepParameter::intensity:
          features.intensity = value;
          break;
        case SweepParameter::short_rate:
          features.r0 = value;
          break;
      }
      SweepRow row;
      row.parameter = name;
      row.value = value;
      row.n_coupons = n_coupons;
      row.prediction = predict(model, features);
      if (have_prev) {
        row.delta_abs = row.prediction - prev;
        row.delta_rel = prev != 0.0 ? row.delta_abs / prev : 0.0;
      }
      row.extrapolated = value < range_lo || value > range_hi;
      prev = row.prediction;
      have_prev = true;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void write_sweep_csv(const std::string& path,
                     const std::vector<SweepRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_sweep_csv: cannot open " + path);
  out << "parameter,value,n_coupons,prediction,delta_abs,delta_rel,"
         "extrapolated\n";
  for (const SweepRow& r : rows) {
    out << r.parameter << ',' << format_double(r.value) << ',' << r.n_coupons
        << ',' << format_double(r.prediction) << ','
        << format_double(r.delta_abs) << ',' << format_double(r.delta_rel)
        << ',' << (r.extrapolated ? 1 : 0) << '\n';
  }
  if (!out) throw std::runtime_error("write_sweep_csv: write failed");
}

}  // namespace catlab

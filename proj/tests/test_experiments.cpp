#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "catlab/experiments.hpp"

using namespace catlab;

namespace {

// Zeroed network except an output-layer read of one input feature:
// prediction = gain * feature + offset, exactly.
MlpModel linear_probe_model(int feature, double gain, double offset) {
  MlpModel m;
  m.config.hidden = {2};
  m.config.activation = Activation::relu;
  m.config.batch_norm = false;
  m.config.dropout = 0.0;
  m.config.l2 = 0.0;
  m.feat_shift = Eigen::VectorXd::Zero(kSurrogateFeatures);
  m.feat_scale = Eigen::VectorXd::Ones(kSurrogateFeatures);
  m.weights = {Eigen::MatrixXd::Zero(2, kSurrogateFeatures),
               Eigen::MatrixXd::Zero(1, 2)};
  m.biases = {Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(1)};
  m.weights[0](0, feature) = gain;
  m.weights[1](0, 0) = 1.0;
  m.biases[1](0) = offset;
  return m;
}

}  // namespace

TEST_CASE("linspace spans both endpoints evenly") {
  const auto g = linspace(1.0, 3.0, 5);
  REQUIRE(g.size() == 5);
  CHECK(g.front() == 1.0);
  CHECK(g.back() == 3.0);
  CHECK(g[2] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK_THROWS_AS((void)linspace(0.0, 1.0, 1), std::invalid_argument);
}

TEST_CASE("format_double round-trips doubles exactly") {
  for (const double v : {0.1, 1.0 / 3.0, 9.0e9, 1.4657789118983272e-2,
                         -0.0, 1e-12, 123456789.123456789}) {
    const std::string s = format_double(v);
    CHECK(std::strtod(s.c_str(), nullptr) == v);
  }
}

TEST_CASE("dataset config validation") {
  CHECK_NOTHROW(DatasetConfig{}.validate());
  DatasetConfig c;
  c.n_samples = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = DatasetConfig{};
  c.r0_min = 0.05;
  c.r0_max = 0.01;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = DatasetConfig{};
  c.coupon_counts = {};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = DatasetConfig{};
  c.coupon_counts = {2, -1};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = DatasetConfig{};
  c.threshold_min = 0.0;
  c.threshold_max = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("degenerate ranges pin every input and the documented seeds") {
  DatasetConfig config;
  config.n_samples = 3;
  config.r0_min = config.r0_max = 0.03;
  config.intensity_min = config.intensity_max = 35.0;
  config.threshold_min = config.threshold_max = 9e9;
  config.maturity_days_min = config.maturity_days_max = 360.0;
  config.coupon_counts = {2};
  config.mc_paths_per_date = 400;
  config.seed = 42;

  const auto rows = generate_dataset(config);
  REQUIRE(rows.size() == 3);
  const LossModel model{35.0, GammaSeverity{}};
  const BondSpec bond = make_coupon_bond(1.0, 360.0 / kDaysPerYear, 2, 0.05, 9e9);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].r0 == 0.03);
    CHECK(rows[i].intensity == 35.0);
    CHECK(rows[i].threshold == 9e9);
    CHECK(rows[i].maturity_days == 360.0);
    CHECK(rows[i].n_coupons == 2.0);
    const std::uint64_t row_seed =
        derive_seed(config.seed, static_cast<std::uint64_t>(i));
    const PriceResult direct =
        price_cat_bond(config.rates, 0.03, model, bond, 400,
                       derive_seed(row_seed, 1), MethodPolicy::auto_switch);
    CHECK(rows[i].price == direct.price);
  }
  // Distinct row seeds give distinct prices.
  CHECK(rows[0].price != rows[1].price);
}

TEST_CASE("sampled rows respect their ranges and label bounds") {
  DatasetConfig config;
  config.n_samples = 25;
  config.mc_paths_per_date = 60;
  config.seed = 9;
  const auto rows = generate_dataset(config);
  REQUIRE(!rows.empty());
  for (const TrainingSample& r : rows) {
    CHECK(r.r0 >= kDatasetR0Min);
    CHECK(r.r0 <= kDatasetR0Max);
    CHECK(r.intensity >= kDatasetIntensityMin);
    CHECK(r.intensity <= kDatasetIntensityMax);
    CHECK(r.threshold >= kDatasetThresholdMin);
    CHECK(r.threshold <= kDatasetThresholdMax);
    CHECK(r.maturity_days >= kDatasetMaturityDaysMin);
    CHECK(r.maturity_days <= kDatasetMaturityDaysMax);
    const DatasetConfig defaults;
    bool known = false;
    for (int n : defaults.coupon_counts)
      known = known || r.n_coupons == static_cast<double>(n);
    CHECK(known);
    CHECK(r.price > 0.0);
    CHECK(r.price <= 1.0 + 0.05 * r.n_coupons);
  }
}

TEST_CASE("dataset CSV round-trips bit for bit") {
  DatasetConfig config;
  config.n_samples = 8;
  config.mc_paths_per_date = 60;
  config.severity = LognormalSeverity{};
  config.seed = 30;
  const auto rows = generate_dataset(config);
  REQUIRE(!rows.empty());
  const std::string path = "test_exp_dataset.csv";
  write_dataset_csv(path, rows, "lognormal");
  const DatasetFile back = read_dataset_csv(path);
  CHECK(back.severity == "lognormal");
  REQUIRE(back.rows.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back.rows[i].r0 == rows[i].r0);
    CHECK(back.rows[i].intensity == rows[i].intensity);
    CHECK(back.rows[i].threshold == rows[i].threshold);
    CHECK(back.rows[i].maturity_days == rows[i].maturity_days);
    CHECK(back.rows[i].n_coupons == rows[i].n_coupons);
    CHECK(back.rows[i].price == rows[i].price);
  }
  std::remove(path.c_str());
}

TEST_CASE("dataset CSV rejects malformed input") {
  CHECK_THROWS_AS((void)read_dataset_csv("no_such_file.csv"),
                  std::runtime_error);
  const std::string path = "test_exp_bad.csv";
  {
    std::ofstream out(path);
    out << "r0,lambda,threshold\n";
  }
  CHECK_THROWS_AS((void)read_dataset_csv(path), std::runtime_error);
  {
    std::ofstream out(path);
    out << "r0,lambda,threshold,maturity_days,n_coupons,severity,price\n";
    out << "0.03,35,9e9,360,0,gamma,0.95\n";
    out << "0.03,35,9e9,360,0,lognormal,0.95\n";
  }
  CHECK_THROWS_AS((void)read_dataset_csv(path), std::runtime_error);
  {
    std::ofstream out(path);
    out << "r0,lambda,threshold,maturity_days,n_coupons,severity,price\n";
    out << "0.03,35,9e9,360,0,weibull,0.95\n";
  }
  CHECK_THROWS_AS((void)read_dataset_csv(path), std::runtime_error);
  {
    std::ofstream out(path);
    out << "r0,lambda,threshold,maturity_days,n_coupons,severity,price\n";
    out << "0.03,35,bogus,360,0,gamma,0.95\n";
  }
  CHECK_THROWS_AS((void)read_dataset_csv(path), std::runtime_error);
  {
    std::ofstream out(path);
    out << "r0,lambda,threshold,maturity_days,n_coupons,severity,price\n";
    out << "0.03,35,9e9,360,0,gamma\n";
  }
  CHECK_THROWS_AS((void)read_dataset_csv(path), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("trace options derive the documented stream split") {
  const TraceOptions options = trace_options_from_seed(123);
  CHECK(options.mc_seed == derive_seed(123, 0));
  CHECK(options.is_seed == derive_seed(123, 1));
  CHECK(!options.tilt_override.has_value());
}

TEST_CASE("trace tail reproduces the estimators exactly") {
  const LossModel model{};
  const TriggerSpec trigger{};
  const long n = 1500;
  const TraceOptions options = trace_options_from_seed(3);
  const auto points = convergence_trace(model, trigger, n, options);
  REQUIRE(points.size() == static_cast<std::size_t>(n));
  CHECK(points.front().n == 1);
  CHECK(points.back().n == n);
  const EstimatorResult mc =
      mc_trigger_probability(model, trigger, n, options.mc_seed);
  const EstimatorResult is =
      is_trigger_probability(model, trigger, n, options.is_seed);
  CHECK(points.back().mc == mc.estimate);
  CHECK(points.back().is == is.estimate);
}

TEST_CASE("zero tilt makes the two trace columns identical") {
  const LossModel model{};
  const TriggerSpec trigger{9e9, 2.0};
  TraceOptions options;
  options.mc_seed = 55;
  options.is_seed = 55;  // shared streams
  TiltParams zero;
  zero.tilted_count_mean = model.intensity * trigger.horizon;
  zero.tilted_severity = model.severity;
  options.tilt_override = zero;
  const auto points = convergence_trace(model, trigger, 800, options);
  for (const TracePoint& p : points) CHECK(p.mc == p.is);
}

TEST_CASE("trace CSV carries the full precision") {
  const LossModel model{};
  const auto points =
      convergence_trace(model, TriggerSpec{}, 50, trace_options_from_seed(8));
  const std::string path = "test_exp_trace.csv";
  write_trace_csv(path, points);
  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "n,mc_estimate,is_estimate");
  std::size_t count = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    REQUIRE(c2 != std::string::npos);
    const auto& p = points[count];
    CHECK(std::strtol(line.substr(0, c1).c_str(), nullptr, 10) == p.n);
    CHECK(std::strtod(line.substr(c1 + 1, c2 - c1 - 1).c_str(), nullptr) ==
          p.mc);
    CHECK(std::strtod(line.substr(c2 + 1).c_str(), nullptr) == p.is);
    ++count;
  }
  CHECK(count == points.size());
  std::remove(path.c_str());
}

TEST_CASE("method comparison reproduces direct pricing per output row") {
  MethodComparisonConfig config;
  config.cases = {{0, 1.0}, {2, 1.0}};
  config.n_paths = 400;
  config.seed = 7;
  const auto rows = method_comparison(config);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].severity == "gamma");
  CHECK(rows[1].severity == "gamma");
  CHECK(rows[2].severity == "lognormal");
  CHECK(rows[3].severity == "lognormal");

  for (std::size_t j = 0; j < rows.size(); ++j) {
    const ComparisonRow& row = rows[j];
    const LossModel model{config.intensity,
                          j < 2 ? SeverityDistribution{GammaSeverity{}}
                                : SeverityDistribution{LognormalSeverity{}}};
    const BondSpec bond =
        make_coupon_bond(1.0, row.maturity_years, row.n_coupons, 0.05, 9e9);
    const PriceResult direct =
        price_cat_bond(config.rates, config.r0, model, bond, config.n_paths,
                       derive_seed(config.seed, j), MethodPolicy::auto_switch);
    CHECK(row.mc_is_price == direct.price);
    CHECK(row.mc_is_seconds > 0.0);
    CHECK(!row.nn_price.has_value());
    CHECK(!row.pide_price.has_value());
  }
}

TEST_CASE("method comparison joins the surrogate and reference columns") {
  // A trivial linear surrogate stands in for a trained model.
  const MlpModel probe = linear_probe_model(kFeatNCoupons, 0.01, 0.9);
  const std::string model_path = "test_exp_probe.mlp";
  save_mlp(probe, model_path);
  const std::string pide_path = "test_exp_pide.csv";
  {
    std::ofstream out(pide_path);
    out << "severity,n_coupons,maturity_years,pide_price,pide_hours\n";
    out << "gamma,0,1,0.9591,15\n";
    out << "lognormal,2,1,0.9413,46.47\n";
  }

  MethodComparisonConfig config;
  config.cases = {{0, 1.0}, {2, 1.0}};
  config.n_paths = 200;
  config.nn_batch = 64;
  config.model_path_gamma = model_path;
  config.pide_reference_path = pide_path;
  const auto rows = method_comparison(config);
  REQUIRE(rows.size() == 4);

  REQUIRE(rows[0].nn_price.has_value());
  CHECK(*rows[0].nn_price == doctest::Approx(0.9).epsilon(1e-12));
  REQUIRE(rows[1].nn_price.has_value());
  CHECK(*rows[1].nn_price == doctest::Approx(0.92).epsilon(1e-12));
  CHECK(rows[1].nn_seconds_per_price.has_value());
  CHECK(*rows[1].nn_seconds_per_price >= 0.0);
  CHECK(!rows[2].nn_price.has_value());  // no lognormal model given

  REQUIRE(rows[0].pide_price.has_value());
  CHECK(*rows[0].pide_price == 0.9591);
  CHECK(*rows[0].pide_hours == 15.0);
  CHECK(!rows[1].pide_price.has_value());
  REQUIRE(rows[3].pide_price.has_value());
  CHECK(*rows[3].pide_price == 0.9413);

  const std::string out_path = "test_exp_comparison.csv";
  write_comparison_csv(out_path, rows);
  std::ifstream in(out_path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line ==
        "severity,n_coupons,maturity_years,mc_is_price,mc_is_seconds,"
        "nn_price,nn_seconds_per_price,pide_price,pide_hours");
  REQUIRE(std::getline(in, line));  // gamma, 0 coupons: every column filled
  CHECK(line.find(",,") == std::string::npos);
  REQUIRE(std::getline(in, line));  // gamma, 2 coupons: empty pide columns
  CHECK(line.substr(line.size() - 2) == ",,");

  std::remove(model_path.c_str());
  std::remove(pide_path.c_str());
  std::remove(out_path.c_str());
}

TEST_CASE("sensitivity sweep tracks the varied input and flags extrapolation") {
  const MlpModel probe = linear_probe_model(kFeatThreshold, 1e-10, 0.0);
  SweepSpec spec;
  spec.varying = SweepParameter::threshold;
  spec.grid = {8e9, 9e9, 14e9};
  spec.coupon_counts = {0, 4};
  const auto rows = sensitivity_sweep(probe, spec);
  REQUIRE(rows.size() == 6);
  for (const auto& r : rows) CHECK(r.parameter == "threshold");
  CHECK(rows[0].prediction == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(rows[1].prediction == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(rows[2].prediction == doctest::Approx(1.4).epsilon(1e-12));
  // Deltas run along each coupon-count series and reset between them.
  CHECK(rows[0].delta_abs == 0.0);
  CHECK(rows[1].delta_abs == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(rows[2].delta_abs == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(rows[3].delta_abs == 0.0);
  CHECK(rows[1].delta_rel ==
        doctest::Approx(rows[1].delta_abs / 0.8).epsilon(1e-9));
  // 14e9 sits above the training threshold range.
  CHECK(!rows[0].extrapolated);
  CHECK(!rows[1].extrapolated);
  CHECK(rows[2].extrapolated);

  CHECK(sweep_parameter_name(SweepParameter::intensity) == "lambda");
  CHECK(sweep_parameter_name(SweepParameter::short_rate) == "r0");
  SweepSpec empty = spec;
  empty.grid = {};
  CHECK_THROWS_AS((void)sensitivity_sweep(probe, empty), std::invalid_argument);

  const std::string path = "test_exp_sweep.csv";
  write_sweep_csv(path, rows);
  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "parameter,value,n_coupons,prediction,delta_abs,delta_rel,"
                "extrapolated");
  std::size_t count = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++count;
  CHECK(count == rows.size());
  std::remove(path.c_str());
}

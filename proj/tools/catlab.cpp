// catlab: command-line front end for the CAT bond pricing laboratory.
//
// Every command that writes an artifact also writes `<artifact>.manifest`,
// a config file capturing the exact options of the run; feeding it back
// through `--config` reproduces the artifact byte for byte.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "catlab/experiments.hpp"
#include "catlab/loss_model.hpp"
#include "catlab/pricer.hpp"
#include "catlab/surrogate.hpp"
#include "catlab/term_structure.hpp"

namespace {

using namespace catlab;

std::string method_name(EstimatorMethod m) {
  switch (m) {
    case EstimatorMethod::plain_mc:
      return "mc";
    case EstimatorMethod::is_gamma:
      return "is_gamma";
    case EstimatorMethod::is_lognormal:
      return "is_lognormal";
  }
  return "unknown";
}

struct SeverityOpts {
  std::string family = "gamma";
  double shape = 1.0;
  double scale = 1.635e8;
  double log_mean = 18.4;
  double log_sd = 1.0;
};

SeverityDistribution make_severity(const SeverityOpts& o) {
  if (o.family == "gamma") return GammaSeverity{o.shape, o.scale};
  return LognormalSeverity{o.log_mean, o.log_sd};
}

void add_severity_options(CLI::App* cmd, SeverityOpts& o) {
  cmd->add_option("--severity", o.family, "Loss severity family")
      ->transform(CLI::IsMember({"gamma", "lognormal"}))
      ->capture_default_str();
  cmd->add_option("--shape", o.shape, "Gamma severity shape")
      ->capture_default_str();
  cmd->add_option("--scale", o.scale, "Gamma severity scale")
      ->capture_default_str();
  cmd->add_option("--log-mean", o.log_mean, "Lognormal severity log-mean")
      ->capture_default_str();
  cmd->add_option("--log-sd", o.log_sd, "Lognormal severity log-sd")
      ->capture_default_str();
}

struct RateOpts {
  double mean_reversion = 0.2;
  double long_run_mean = 0.03;
  double volatility = 0.02;
};

VasicekParams make_rates(const RateOpts& o) {
  return VasicekParams{o.mean_reversion, o.long_run_mean, o.volatility};
}

void add_rate_options(CLI::App* cmd, RateOpts& o) {
  cmd->add_option("--mean-reversion", o.mean_reversion,
                  "Short-rate mean reversion speed")
      ->capture_default_str();
  cmd->add_option("--long-run-mean", o.long_run_mean,
                  "Short-rate long-run mean")
      ->capture_default_str();
  cmd->add_option("--rate-vol", o.volatility, "Short-rate volatility")
      ->capture_default_str();
}

MethodPolicy to_policy(const std::string& method) {
  if (method == "mc") return MethodPolicy::force_mc;
  if (method == "is") return MethodPolicy::force_is;
  return MethodPolicy::auto_switch;
}

CLI::Option* add_method_option(CLI::App* cmd, std::string& method) {
  return cmd
      ->add_option("--method", method,
                   "Estimator: plain Monte Carlo, importance sampling, or "
                   "automatic (IS while the trigger is rare)")
      ->transform(CLI::IsMember({"auto", "mc", "is"}))
      ->capture_default_str();
}

std::string command_path(const CLI::App* cmd) {
  std::vector<std::string> names;
  for (const CLI::App* a = cmd; a->get_parent() != nullptr;
       a = a->get_parent())
    names.push_back(a->get_name());
  std::string joined;
  for (auto it = names.rbegin(); it != names.rend(); ++it) {
    if (!joined.empty()) joined += '.';
    joined += *it;
  }
  return joined;
}

// The section header keys the options to the subcommand, so the file can
// be replayed with `catlab --config <manifest> <subcommand>`.
void write_manifest(const CLI::App* cmd, const std::string& artifact_path) {
  const std::string path = artifact_path + ".manifest";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open manifest " + path);
  out << '[' << command_path(cmd) << "]\n" << cmd->config_to_str(true, true);
  if (!out) throw std::runtime_error("manifest write failed for " + path);
  std::cout << "manifest: " << path << '\n';
}

// ---- trigger ---------------------------------------------------------

struct TriggerOpts {
  SeverityOpts severity;
  double intensity = 35.0;
  double threshold = 9e9;
  double horizon = 1.0;
  long paths = 100000;
  std::uint64_t seed = 1;
  std::string method = "auto";
  bool oracle = false;
  std::string trace_path;
};

void run_trigger(const TriggerOpts& o, const CLI::App* cmd) {
  const LossModel model{o.intensity, make_severity(o.severity)};
  const TriggerSpec trigger{o.threshold, o.horizon};

  bool use_is = false;
  if (o.method == "is") {
    use_is = true;
  } else if (o.method == "auto") {
    use_is = expected_aggregate_loss(model, o.horizon) < o.threshold;
  }
  const EstimatorResult r =
      use_is ? is_trigger_probability(model, trigger, o.paths, o.seed)
             : mc_trigger_probability(model, trigger, o.paths, o.seed);

  std::cout << "method: " << method_name(r.method) << '\n'
            << "estimate: " << format_double(r.estimate) << '\n'
            << "std_error: " << format_double(r.std_error) << '\n'
            << "paths: " << r.n_samples << '\n';
  if (r.degenerate_threshold) std::cout << "degenerate_threshold: 1\n";
  if (r.tilt.has_value()) {
    std::cout << "count_tilt: " << format_double(r.tilt->count_tilt) << '\n'
              << "severity_tilt: " << format_double(r.tilt->severity_tilt)
              << '\n'
              << "tilted_count_mean: "
              << format_double(r.tilt->tilted_count_mean) << '\n';
  }
  if (o.oracle) {
    const double exact = trigger_prob_series_gamma(model, trigger);
    std::cout << "series_value: " << format_double(exact) << '\n'
              << "abs_error: " << format_double(std::abs(r.estimate - exact))
              << '\n';
  }
  if (!o.trace_path.empty()) {
    const auto points = convergence_trace(model, trigger, o.paths,
                                          trace_options_from_seed(o.seed));
    write_trace_csv(o.trace_path, points);
    std::cout << "trace: " << o.trace_path << '\n';
    write_manifest(cmd, o.trace_path);
  }
}

void register_trigger(CLI::App& app) {
  auto o = std::make_shared<TriggerOpts>();
  CLI::App* cmd = app.add_subcommand(
      "trigger", "Estimate the probability that aggregate losses reach the "
                 "threshold within the horizon");
  add_severity_options(cmd, o->severity);
  cmd->add_option("--lambda", o->intensity, "Event intensity per year")
      ->capture_default_str();
  cmd->add_option("--threshold", o->threshold, "Trigger threshold")
      ->capture_default_str();
  cmd->add_option("--horizon", o->horizon, "Horizon in years")
      ->capture_default_str();
  cmd->add_option("--paths", o->paths, "Simulation paths")
      ->capture_default_str();
  cmd->add_option("--seed", o->seed, "Stream seed")->capture_default_str();
  add_method_option(cmd, o->method);
  cmd->add_flag("--oracle", o->oracle,
                "Also print the exact series value (Gamma severities only)");
  cmd->add_option("--trace", o->trace_path,
                  "Write a CSV of running MC and IS estimates (uses streams "
                  "derived from --seed)");
  cmd->callback([o, cmd]() { run_trigger(*o, cmd); });
}

// ---- price -----------------------------------------------------------

struct PriceOpts {
  RateOpts rates;
  SeverityOpts severity;
  double r0 = 0.03;
  double intensity = 35.0;
  double face = 1.0;
  double maturity = 1.0;
  int coupons = 0;
  double coupon_rate = 0.05;
  double threshold = 9e9;
  double recovery = 0.0;
  long paths = 20000;
  std::uint64_t seed = 1;
  std::string method = "auto";
};

void run_price(const PriceOpts& o) {
  const LossModel model{o.intensity, make_severity(o.severity)};
  const BondSpec bond = make_coupon_bond(o.face, o.maturity, o.coupons,
                                         o.coupon_rate, o.threshold,
                                         o.recovery);
  const PriceResult r =
      price_cat_bond(make_rates(o.rates), o.r0, model, bond, o.paths, o.seed,
                     to_policy(o.method));
  std::cout << "price: " << format_double(r.price) << '\n';
  for (const DateEstimate& d : r.dates) {
    std::cout << (d.is_principal ? "principal" : "coupon") << " t="
              << format_double(d.time) << " cash=" << format_double(d.cash_flow)
              << " discount=" << format_double(d.discount)
              << " trigger_prob=" << format_double(d.prob)
              << " method=" << method_name(d.detail.method) << '\n';
  }
}

void register_price(CLI::App& app) {
  auto o = std::make_shared<PriceOpts>();
  CLI::App* cmd = app.add_subcommand(
      "price", "Price a CAT bond under the affine rate model");
  add_rate_options(cmd, o->rates);
  add_severity_options(cmd, o->severity);
  cmd->add_option("--r0", o->r0, "Initial short rate")->capture_default_str();
  cmd->add_option("--lambda", o->intensity, "Event intensity per year")
      ->capture_default_str();
  cmd->add_option("--face", o->face, "Face value")->capture_default_str();
  cmd->add_option("--maturity", o->maturity, "Maturity in years")
      ->capture_default_str();
  cmd->add_option("--coupons", o->coupons, "Number of coupon payments")
      ->capture_default_str();
  cmd->add_option("--coupon-rate", o->coupon_rate,
                  "Coupon as a fraction of face")
      ->capture_default_str();
  cmd->add_option("--threshold", o->threshold, "Trigger threshold")
      ->capture_default_str();
  cmd->add_option("--recovery", o->recovery,
                  "Expected recovered fraction of face on trigger")
      ->capture_default_str();
  cmd->add_option("--paths", o->paths, "Simulation paths per payment date")
      ->capture_default_str();
  cmd->add_option("--seed", o->seed, "Stream seed")->capture_default_str();
  add_method_option(cmd, o->method);
  cmd->callback([o]() { run_price(*o); });
}

// ---- gen-dataset -----------------------------------------------------

struct GenOpts {
  DatasetConfig config;
  SeverityOpts severity;
  std::string out;
};

void run_gen_dataset(GenOpts& o, const CLI::App* cmd) {
  o.config.severity = make_severity(o.severity);
  const auto rows = generate_dataset(o.config);
  write_dataset_csv(o.out, rows, severity_name(o.config.severity));
  std::cout << "rows: " << rows.size() << '\n'
            << "dataset: " << o.out << '\n';
  write_manifest(cmd, o.out);
}

void register_gen_dataset(CLI::App& app) {
  auto o = std::make_shared<GenOpts>();
  CLI::App* cmd = app.add_subcommand(
      "gen-dataset",
      "Simulate a labelled pricing dataset for surrogate training");
  cmd->add_option("--out", o->out, "Output CSV path")->required();
  cmd->add_option("--n", o->config.n_samples, "Rows to draw")
      ->capture_default_str();
  add_severity_options(cmd, o->severity);
  cmd->add_option("--r0-min", o->config.r0_min, "Initial short rate, low end")
      ->capture_default_str();
  cmd->add_option("--r0-max", o->config.r0_max, "Initial short rate, high end")
      ->capture_default_str();
  cmd->add_option("--lambda-min", o->config.intensity_min,
                  "Event intensity, low end")
      ->capture_default_str();
  cmd->add_option("--lambda-max", o->config.intensity_max,
                  "Event intensity, high end")
      ->capture_default_str();
  cmd->add_option("--threshold-min", o->config.threshold_min,
                  "Trigger threshold, low end")
      ->capture_default_str();
  cmd->add_option("--threshold-max", o->config.threshold_max,
                  "Trigger threshold, high end")
      ->capture_default_str();
  cmd->add_option("--maturity-days-min", o->config.maturity_days_min,
                  "Maturity in days, low end")
      ->capture_default_str();
  cmd->add_option("--maturity-days-max", o->config.maturity_days_max,
                  "Maturity in days, high end")
      ->capture_default_str();
  cmd->add_option("--coupon-counts", o->config.coupon_counts,
                  "Coupon counts sampled uniformly")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--coupon-rate", o->config.coupon_rate,
                  "Coupon as a fraction of face")
      ->capture_default_str();
  cmd->add_option("--paths-per-date", o->config.mc_paths_per_date,
                  "Simulation paths per payment date")
      ->capture_default_str();
  cmd->add_option("--seed", o->config.seed, "Dataset seed")
      ->capture_default_str();
  cmd->callback([o, cmd]() { run_gen_dataset(*o, cmd); });
}

// ---- train -----------------------------------------------------------

struct TrainOpts {
  std::string data;
  std::string out;
  MlpConfig config;
  std::string activation = "relu";
};

void run_train(TrainOpts& o, const CLI::App* cmd) {
  o.config.activation =
      o.activation == "relu" ? Activation::relu : Activation::tanh_act;
  const DatasetFile file = read_dataset_csv(o.data);
  if (file.rows.empty()) throw std::runtime_error("train: empty dataset");
  TrainReport report;
  const MlpModel model = train_mlp(file.rows, o.config, &report);
  save_mlp(model, o.out);
  std::cout << "rows: " << file.rows.size() << '\n'
            << "severity: " << file.severity << '\n'
            << "epochs_run: " << report.epochs_run << '\n'
            << "train_mse: " << format_double(report.train_mse) << '\n'
            << "val_mse: " << format_double(report.val_mse) << '\n'
            << "model: " << o.out << '\n';
  write_manifest(cmd, o.out);
}

void register_train(CLI::App& app) {
  auto o = std::make_shared<TrainOpts>();
  CLI::App* cmd = app.add_subcommand(
      "train", "Fit the neural pricing surrogate to a dataset CSV");
  cmd->add_option("--data", o->data, "Training dataset CSV")->required();
  cmd->add_option("--out", o->out, "Output model path")->required();
  cmd->add_option("--hidden", o->config.hidden, "Hidden layer widths")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--activation", o->activation, "Hidden activation")
      ->transform(CLI::IsMember({"relu", "tanh"}))
      ->capture_default_str();
  cmd->add_option("--l2", o->config.l2, "L2 penalty coefficient")
      ->capture_default_str();
  cmd->add_option("--dropout", o->config.dropout, "Dropout probability")
      ->capture_default_str();
  cmd->add_flag("--batch-norm,!--no-batch-norm", o->config.batch_norm,
                "Batch normalization on hidden layers")
      ->capture_default_str();
  cmd->add_option("--lr", o->config.learning_rate, "Adam learning rate")
      ->capture_default_str();
  cmd->add_option("--batch-size", o->config.batch_size, "Minibatch size")
      ->capture_default_str();
  cmd->add_option("--epochs", o->config.max_epochs, "Epoch cap")
      ->capture_default_str();
  cmd->add_option("--patience", o->config.patience,
                  "Early-stopping patience in epochs (0 disables)")
      ->capture_default_str();
  cmd->add_option("--val-fraction", o->config.validation_fraction,
                  "Held-out fraction for early stopping")
      ->capture_default_str();
  cmd->add_flag("--standardize,!--no-standardize",
                o->config.standardize_features,
                "Standardize features to zero mean, unit variance")
      ->capture_default_str();
  cmd->add_option("--seed", o->config.seed, "Training seed")
      ->capture_default_str();
  cmd->callback([o, cmd]() { run_train(*o, cmd); });
}

// ---- predict ---------------------------------------------------------

struct PredictOpts {
  std::string model_path;
  std::string data;
  TrainingSample features{0.03, 35.0, 9e9, 360.0, 0.0, 0.0};
};

void run_predict(const PredictOpts& o) {
  const MlpModel model = load_mlp(o.model_path);
  if (!o.data.empty()) {
    const DatasetFile file = read_dataset_csv(o.data);
    if (file.rows.empty()) throw std::runtime_error("predict: empty dataset");
    std::cout << "rows: " << file.rows.size() << '\n'
              << "mse: " << format_double(mse(model, file.rows)) << '\n'
              << "mae: " << format_double(mean_abs_error(model, file.rows))
              << '\n';
    return;
  }
  std::cout << "price: " << format_double(predict(model, o.features)) << '\n';
}

void register_predict(CLI::App& app) {
  auto o = std::make_shared<PredictOpts>();
  CLI::App* cmd = app.add_subcommand(
      "predict", "Evaluate a trained surrogate: one price, or error "
                 "metrics over a labelled CSV");
  cmd->add_option("--model", o->model_path, "Trained model path")->required();
  cmd->add_option("--data", o->data,
                  "Labelled CSV to score (overrides the single-price flags)");
  cmd->add_option("--r0", o->features.r0, "Initial short rate")
      ->capture_default_str();
  cmd->add_option("--lambda", o->features.intensity, "Event intensity")
      ->capture_default_str();
  cmd->add_option("--threshold", o->features.threshold, "Trigger threshold")
      ->capture_default_str();
  cmd->add_option("--maturity-days", o->features.maturity_days,
                  "Maturity in days (360-day years)")
      ->capture_default_str();
  cmd->add_option("--coupons", o->features.n_coupons,
                  "Number of coupon payments")
      ->capture_default_str();
  cmd->callback([o]() { run_predict(*o); });
}

// ---- experiment ------------------------------------------------------

struct CompareOpts {
  MethodComparisonConfig config;
  std::string out;
};

void run_compare(const CompareOpts& o, const CLI::App* cmd) {
  const auto rows = method_comparison(o.config);
  write_comparison_csv(o.out, rows);
  for (const ComparisonRow& r : rows) {
    std::cout << r.severity << " n=" << r.n_coupons
              << " T=" << format_double(r.maturity_years)
              << " sim=" << format_double(r.mc_is_price);
    if (r.nn_price.has_value())
      std::cout << " nn=" << format_double(*r.nn_price);
    if (r.pide_price.has_value())
      std::cout << " pide=" << format_double(*r.pide_price);
    std::cout << '\n';
  }
  std::cout << "table: " << o.out << '\n';
  write_manifest(cmd, o.out);
}

void register_compare(CLI::App& experiment) {
  auto o = std::make_shared<CompareOpts>();
  CLI::App* cmd = experiment.add_subcommand(
      "compare", "Price the benchmark cells by simulation, surrogate, and "
                 "an external reference table");
  cmd->add_option("--out", o->out, "Output CSV path")->required();
  cmd->add_option("--model-gamma", o->config.model_path_gamma,
                  "Surrogate trained on Gamma-severity prices");
  cmd->add_option("--model-lognormal", o->config.model_path_lognormal,
                  "Surrogate trained on Lognormal-severity prices");
  cmd->add_option("--pide", o->config.pide_reference_path,
                  "External reference CSV "
                  "(severity,n_coupons,maturity_years,pide_price,pide_hours)");
  cmd->add_option("--r0", o->config.r0, "Initial short rate")
      ->capture_default_str();
  cmd->add_option("--lambda", o->config.intensity, "Event intensity")
      ->capture_default_str();
  cmd->add_option("--threshold", o->config.threshold, "Trigger threshold")
      ->capture_default_str();
  cmd->add_option("--paths", o->config.n_paths,
                  "Simulation paths per payment date")
      ->capture_default_str();
  cmd->add_option("--nn-batch", o->config.nn_batch,
                  "Predictions per timed surrogate batch")
      ->capture_default_str();
  cmd->add_option("--seed", o->config.seed, "Simulation seed")
      ->capture_default_str();
  cmd->callback([o, cmd]() { run_compare(*o, cmd); });
}

struct SweepOpts {
  SweepSpec spec;
  std::string model_path;
  std::string param = "threshold";
  double lo = 7e9;
  double hi = 13e9;
  int n = 21;
  std::string out;
};

void run_sweep(SweepOpts& o, const CLI::App* cmd) {
  if (o.param == "threshold")
    o.spec.varying = SweepParameter::threshold;
  else if (o.param == "lambda")
    o.spec.varying = SweepParameter::intensity;
  else
    o.spec.varying = SweepParameter::short_rate;
  o.spec.grid = linspace(o.lo, o.hi, o.n);
  const MlpModel model = load_mlp(o.model_path);
  const auto rows = sensitivity_sweep(model, o.spec);
  write_sweep_csv(o.out, rows);
  std::cout << "rows: " << rows.size() << '\n'
            << "sweep: " << o.out << '\n';
  write_manifest(cmd, o.out);
}

void register_sweep(CLI::App& experiment) {
  auto o = std::make_shared<SweepOpts>();
  CLI::App* cmd = experiment.add_subcommand(
      "sweep", "Sweep one surrogate input over a grid and record the "
               "prediction deltas");
  cmd->add_option("--model", o->model_path, "Trained model path")->required();
  cmd->add_option("--out", o->out, "Output CSV path")->required();
  cmd->add_option("--param", o->param, "Input to vary")
      ->transform(CLI::IsMember({"threshold", "lambda", "r0"}))
      ->capture_default_str();
  cmd->add_option("--lo", o->lo, "Grid start")->capture_default_str();
  cmd->add_option("--hi", o->hi, "Grid end")->capture_default_str();
  cmd->add_option("--steps", o->n, "Grid points")->capture_default_str();
  cmd->add_option("--r0", o->spec.r0, "Fixed initial short rate")
      ->capture_default_str();
  cmd->add_option("--lambda", o->spec.intensity, "Fixed event intensity")
      ->capture_default_str();
  cmd->add_option("--threshold", o->spec.threshold, "Fixed trigger threshold")
      ->capture_default_str();
  cmd->add_option("--maturity-days", o->spec.maturity_days,
                  "Fixed maturity in days")
      ->capture_default_str();
  cmd->add_option("--coupon-counts", o->spec.coupon_counts,
                  "Coupon counts, one series each")
      ->delimiter(',')
      ->capture_default_str();
  cmd->callback([o, cmd]() { run_sweep(*o, cmd); });
}

struct TraceOpts {
  SeverityOpts severity;
  double intensity = 35.0;
  double threshold = 9e9;
  double horizon = 1.0;
  long paths = 10000;
  std::uint64_t seed = 1;
  std::string out;
};

void run_trace(const TraceOpts& o, const CLI::App* cmd) {
  const LossModel model{o.intensity, make_severity(o.severity)};
  const TriggerSpec trigger{o.threshold, o.horizon};
  const auto points = convergence_trace(model, trigger, o.paths,
                                        trace_options_from_seed(o.seed));
  write_trace_csv(o.out, points);
  std::cout << "rows: " << points.size() << '\n'
            << "trace: " << o.out << '\n';
  write_manifest(cmd, o.out);
}

void register_trace(CLI::App& experiment) {
  auto o = std::make_shared<TraceOpts>();
  CLI::App* cmd = experiment.add_subcommand(
      "trace", "Record running MC and IS trigger-probability estimates "
               "path by path");
  cmd->add_option("--out", o->out, "Output CSV path")->required();
  add_severity_options(cmd, o->severity);
  cmd->add_option("--lambda", o->intensity, "Event intensity per year")
      ->capture_default_str();
  cmd->add_option("--threshold", o->threshold, "Trigger threshold")
      ->capture_default_str();
  cmd->add_option("--horizon", o->horizon, "Horizon in years")
      ->capture_default_str();
  cmd->add_option("--paths", o->paths, "Paths per estimator")
      ->capture_default_str();
  cmd->add_option("--seed", o->seed, "Stream seed")->capture_default_str();
  cmd->callback([o, cmd]() { run_trace(*o, cmd); });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CAT bond pricing laboratory"};
  app.name("catlab");  // stable usage lines regardless of argv[0]
  app.require_subcommand(1);
  app.set_version_flag("--version", "catlab 1.0.0");
  app.set_config("--config", "",
                 "Replay a run manifest (place before the subcommand)");

  register_trigger(app);
  register_price(app);
  register_gen_dataset(app);
  register_train(app);
  register_predict(app);

  CLI::App* experiment = app.add_subcommand(
      "experiment", "Reproducible comparison, sweep, and trace harnesses");
  experiment->require_subcommand(1);
  register_compare(*experiment);
  register_sweep(*experiment);
  register_trace(*experiment);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "catlab: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

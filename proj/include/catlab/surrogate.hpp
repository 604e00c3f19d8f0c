#pragma once

// Feed-forward pricing surrogate.
//
// A multilayer perceptron maps contract and market inputs
//     (r0, lambda, threshold, maturity_days, n_coupons)
// to the simulated bond price, replacing minutes of Monte Carlo per quote
// with microseconds of linear algebra.  The network, its initializer, the
// optimizer, batch normalization, dropout, and the training loop are all
// implemented here; Eigen supplies the dense matrix kernels only.
//
// Architecture per hidden layer: affine -> (batch norm) -> activation ->
// (inverted dropout); the output layer is affine scalar.  Training
// minimizes mean squared error plus an L2 penalty 0.5 * l2 * sum ||W||^2
// with Adam.  All randomness (init, shuffles, dropout masks) derives from
// one seed, so training is reproducible bit for bit.

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace catlab {

inline constexpr int kSurrogateFeatures = 5;

/// Fixed feature order used across CSV files, scalers, and model files.
/// maturity is carried in days (360-day years elsewhere in the library).
enum SurrogateFeature : int {
  kFeatR0 = 0,
  kFeatIntensity = 1,
  kFeatThreshold = 2,
  kFeatMaturityDays = 3,
  kFeatNCoupons = 4,
};

/// One labelled row of the pricing dataset.
struct TrainingSample {
  double r0 = 0.0;
  double intensity = 0.0;
  double threshold = 0.0;
  double maturity_days = 0.0;
  double n_coupons = 0.0;
  double price = 0.0;
};

enum class Activation { relu, tanh_act };

struct MlpConfig {
  std::vector<int> hidden = {256, 128, 64, 32};
  Activation activation = Activation::relu;
  double l2 = 1e-4;
  double dropout = 0.1;  // drop probability, last hidden layer only
  bool batch_norm = true;
  double learning_rate = 1e-5;
  int batch_size = 256;
  // A 50k-row epoch is ~176 optimizer steps, an order less than the
  // data scale these budgets are usually quoted at, so the cap and the
  // stopping grace are sized in steps rather than epochs.
  int max_epochs = 1200;
  int patience = 60;               // early-stopping epochs; <= 0 disables
  double validation_fraction = 0.1;
  bool standardize_features = true;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Trained network.  Weight matrices are (fan_out x fan_in); the batch
/// norm vectors are per hidden layer and empty when batch_norm is off.
/// Features are standardized as (x - feat_shift) / feat_scale on entry.
struct MlpModel {
  MlpConfig config;
  Eigen::VectorXd feat_shift;
  Eigen::VectorXd feat_scale;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  std::vector<Eigen::VectorXd> bn_gamma;
  std::vector<Eigen::VectorXd> bn_beta;
  std::vector<Eigen::VectorXd> bn_mean;  // running statistics
  std::vector<Eigen::VectorXd> bn_var;
};

/// Columns are samples, rows follow SurrogateFeature order.
Eigen::MatrixXd feature_matrix(const std::vector<TrainingSample>& rows);
Eigen::VectorXd label_vector(const std::vector<TrainingSample>& rows);

struct TrainReport {
  int epochs_run = 0;
  double train_mse = 0.0;  // final, inference mode, training inputs
  double val_mse = 0.0;    // best seen on the internal validation split
};

/// Trains on the given rows (carving config.validation_fraction of them,
/// after a seeded shuffle, for early stopping) and returns the best
/// weights by validation MSE.  Deterministic in (rows, config).
MlpModel train_mlp(const std::vector<TrainingSample>& rows,
                   const MlpConfig& config, TrainReport* report = nullptr);

/// Inference: batch norm uses running statistics, dropout is off.
double predict(const MlpModel& model, const TrainingSample& row);
Eigen::VectorXd predict_batch(const MlpModel& model,
                              const Eigen::MatrixXd& raw_features);

double mse(const MlpModel& model, const std::vector<TrainingSample>& rows);
double mean_abs_error(const MlpModel& model,
                      const std::vector<TrainingSample>& rows);

/// Text serialization; numbers at 17 significant digits round-trip
/// doubles exactly.  load_mlp throws std::runtime_error on malformed or
/// version-mismatched files.
void save_mlp(const MlpModel& model, const std::string& path);
MlpModel load_mlp(const std::string& path);

/// Loss and parameter gradients for one standardized batch, exposed so
/// the analytic backward pass can be checked against finite differences.
/// use_batch_stats selects batch-norm training semantics (batch mean and
/// variance, with gradients flowing through them) versus inference
/// semantics (running statistics as constants).  Dropout never applies.
struct MlpGradients {
  double loss = 0.0;
  std::vector<Eigen::MatrixXd> d_weights;
  std::vector<Eigen::VectorXd> d_biases;
  std::vector<Eigen::VectorXd> d_gamma;
  std::vector<Eigen::VectorXd> d_beta;
};

MlpGradients mlp_loss_gradients(const MlpModel& model,
                                const Eigen::MatrixXd& x_std,
                                const Eigen::VectorXd& y,
                                bool use_batch_stats);

double mlp_loss(const MlpModel& model, const Eigen::MatrixXd& x_std,
                const Eigen::VectorXd& y, bool use_batch_stats);

/// K-fold cross-validation over candidate configurations.  Folds are
/// contiguous blocks of one seeded shuffle (derived from fold_seed), the
/// same blocks for every candidate.  Returns mean validation MSE per
/// candidate and the index of the best one.
struct CrossValResult {
  std::vector<double> mean_val_mse;       // one entry per candidate
  std::vector<std::vector<double>> fold_val_mse;
  std::size_t best_index = 0;
};

CrossValResult cross_validate(const std::vector<TrainingSample>& rows,
                              const std::vector<MlpConfig>& candidates,
                              int k_folds, std::uint64_t fold_seed);

}  // namespace catlab

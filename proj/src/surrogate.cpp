#include "catlab/surrogate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "catlab/rng.hpp"

namespace catlab {

namespace {

constexpr double kBnEps = 1e-5;

// Seed-stream indices; fixed so a (rows, config) pair maps to one model.
constexpr std::uint64_t kSeedInitBase = 100;    // + layer index
constexpr std::uint64_t kSeedSplit = 9999;
constexpr std::uint64_t kSeedShuffleBase = 10000;  // + epoch
constexpr std::uint64_t kSeedDropoutBase = 20000;  // + epoch

}  // namespace

void MlpConfig::validate() const {
  if (hidden.empty())
    throw std::invalid_argument("MlpConfig: need at least one hidden layer");
  for (int h : hidden)
    if (h < 1) throw std::invalid_argument("MlpConfig: hidden dims must be >= 1");
  if (!(l2 >= 0.0)) throw std::invalid_argument("MlpConfig: l2 must be >= 0");
  if (!(dropout >= 0.0) || !(dropout < 1.0))
    throw std::invalid_argument("MlpConfig: dropout must be in [0, 1)");
  if (!(learning_rate > 0.0))
    throw std::invalid_argument("MlpConfig: learning_rate must be > 0");
  if (batch_size < 1)
    throw std::invalid_argument("MlpConfig: batch_size must be >= 1");
  if (max_epochs < 1)
    throw std::invalid_argument("MlpConfig: max_epochs must be >= 1");
  if (!(validation_fraction >= 0.0) || !(validation_fraction < 1.0))
    throw std::invalid_argument(
        "MlpConfig: validation_fraction must be in [0, 1)");
}

Eigen::MatrixXd feature_matrix(const std::vector<TrainingSample>& rows) {
  Eigen::MatrixXd x(kSurrogateFeatures, static_cast<Eigen::Index>(rows.size()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const TrainingSample& r = rows[static_cast<std::size_t>(j)];
    x(kFeatR0, j) = r.r0;
    x(kFeatIntensity, j) = r.intensity;
    x(kFeatThreshold, j) = r.threshold;
    x(kFeatMaturityDays, j) = r.maturity_days;
    x(kFeatNCoupons, j) = r.n_coupons;
  }
  return x;
}

Eigen::VectorXd label_vector(const std::vector<TrainingSample>& rows) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (Eigen::Index j = 0; j < y.size(); ++j)
    y(j) = rows[static_cast<std::size_t>(j)].price;
  return y;
}

namespace {

Eigen::MatrixXd activate(const Eigen::MatrixXd& u, Activation act) {
  if (act == Activation::relu) return u.array().max(0.0).matrix();
  return u.array().tanh().matrix();
}

Eigen::MatrixXd activate_grad(const Eigen::MatrixXd& u, Activation act) {
  if (act == Activation::relu)
    return (u.array() > 0.0).cast<double>().matrix();
  const Eigen::ArrayXXd t = u.array().tanh();
  return (1.0 - t.square()).matrix();
}

struct ForwardCache {
  std::vector<Eigen::MatrixXd> z;      // z[l]: input to layer l; z[H] feeds output
  std::vector<Eigen::MatrixXd> s;      // affine outputs of hidden layers
  std::vector<Eigen::MatrixXd> s_hat;  // normalized s (batch norm only)
  std::vector<Eigen::MatrixXd> u;      // activation inputs
  std::vector<Eigen::VectorXd> mean;   // statistics used for normalization
  std::vector<Eigen::VectorXd> var;
  Eigen::RowVectorXd y_hat;
};

// Forward through the hidden stack and output layer.  masks, when given,
// are inverted-dropout keep masks already scaled by 1/(1-p).
ForwardCache forward_pass(const MlpModel& model, const Eigen::MatrixXd& x_std,
                          bool use_batch_stats,
                          const std::vector<Eigen::MatrixXd>* masks) {
  const auto n_hidden = model.config.hidden.size();
  const auto batch = static_cast<double>(x_std.cols());
  ForwardCache cache;
  cache.z.resize(n_hidden + 1);
  cache.s.resize(n_hidden);
  cache.s_hat.resize(n_hidden);
  cache.u.resize(n_hidden);
  cache.mean.resize(n_hidden);
  cache.var.resize(n_hidden);

  cache.z[0] = x_std;
  for (std::size_t l = 0; l < n_hidden; ++l) {
    cache.s[l] = (model.weights[l] * cache.z[l]).colwise() + model.biases[l];
    if (model.config.batch_norm) {
      if (use_batch_stats) {
        cache.mean[l] = cache.s[l].rowwise().mean();
        const Eigen::MatrixXd centered =
            cache.s[l].colwise() - cache.mean[l];
        cache.var[l] =
            (centered.array().square().rowwise().sum() / batch).matrix();
        const Eigen::ArrayXd inv_std =
            (cache.var[l].array() + kBnEps).rsqrt();
        cache.s_hat[l] = (centered.array().colwise() * inv_std).matrix();
      } else {
        cache.mean[l] = model.bn_mean[l];
        cache.var[l] = model.bn_var[l];
        const Eigen::ArrayXd inv_std =
            (cache.var[l].array() + kBnEps).rsqrt();
        cache.s_hat[l] = ((cache.s[l].colwise() - cache.mean[l])
                              .array()
                              .colwise() *
                          inv_std)
                             .matrix();
      }
      cache.u[l] =
          ((cache.s_hat[l].array().colwise() * model.bn_gamma[l].array())
               .colwise() +
           model.bn_beta[l].array())
              .matrix();
    } else {
      cache.u[l] = cache.s[l];
    }
    Eigen::MatrixXd h = activate(cache.u[l], model.config.activation);
    if (masks != nullptr) h = h.cwiseProduct((*masks)[l]);
    cache.z[l + 1] = std::move(h);
  }
  cache.y_hat =
      (model.weights[n_hidden] * cache.z[n_hidden]).colwise() +
      model.biases[n_hidden];
  return cache;
}

double l2_penalty(const MlpModel& model) {
  double sum = 0.0;
  for (const auto& w : model.weights) sum += w.squaredNorm();
  return 0.5 * model.config.l2 * sum;
}

double loss_from_cache(const MlpModel& model, const ForwardCache& cache,
                       const Eigen::VectorXd& y) {
  const double batch = static_cast<double>(y.size());
  const double mse_term =
      (cache.y_hat.transpose() - y).squaredNorm() / batch;
  return mse_term + l2_penalty(model);
}

// Backward pass; masks must match the ones used in the forward.
MlpGradients backward_pass(const MlpModel& model, const ForwardCache& cache,
                           const Eigen::VectorXd& y, bool use_batch_stats,
                           const std::vector<Eigen::MatrixXd>* masks) {
  const auto n_hidden = model.config.hidden.size();
  const double batch = static_cast<double>(y.size());

  MlpGradients g;
  g.loss = loss_from_cache(model, cache, y);
  g.d_weights.resize(n_hidden + 1);
  g.d_biases.resize(n_hidden + 1);
  if (model.config.batch_norm) {
    g.d_gamma.resize(n_hidden);
    g.d_beta.resize(n_hidden);
  }

  // Output layer.
  Eigen::RowVectorXd gy =
      (2.0 / batch) * (cache.y_hat - y.transpose());
  g.d_weights[n_hidden] =
      gy * cache.z[n_hidden].transpose() +
      model.config.l2 * model.weights[n_hidden];
  g.d_biases[n_hidden] = Eigen::VectorXd::Constant(1, gy.sum());
  Eigen::MatrixXd gz = model.weights[n_hidden].transpose() * gy;

  for (std::size_t l = n_hidden; l-- > 0;) {
    if (masks != nullptr) gz = gz.cwiseProduct((*masks)[l]);
    Eigen::MatrixXd du =
        gz.cwiseProduct(activate_grad(cache.u[l], model.config.activation));
    Eigen::MatrixXd ds;
    if (model.config.batch_norm) {
      g.d_beta[l] = du.rowwise().sum();
      g.d_gamma[l] = du.cwiseProduct(cache.s_hat[l]).rowwise().sum();
      const Eigen::ArrayXd inv_std = (cache.var[l].array() + kBnEps).rsqrt();
      const Eigen::MatrixXd d_hat =
          (du.array().colwise() * model.bn_gamma[l].array()).matrix();
      if (use_batch_stats) {
        // Gradients flow through the batch mean and variance.
        const Eigen::MatrixXd centered =
            cache.s[l].colwise() - cache.mean[l];
        const Eigen::ArrayXd d_var =
            (d_hat.cwiseProduct(centered).rowwise().sum().array()) * (-0.5) *
            inv_std.pow(3);
        const Eigen::ArrayXd d_mean =
            -(d_hat.rowwise().sum().array()) * inv_std;
        ds = ((d_hat.array().colwise() * inv_std) +
              (centered.array().colwise() * (d_var * (2.0 / batch))))
                 .matrix();
        ds = (ds.array().colwise() + d_mean / batch).matrix();
      } else {
        ds = (d_hat.array().colwise() * inv_std).matrix();
      }
    } else {
      ds = std::move(du);
    }
    g.d_weights[l] = ds * cache.z[l].transpose() +
                     model.config.l2 * model.weights[l];
    g.d_biases[l] = ds.rowwise().sum();
    if (l > 0) gz = model.weights[l].transpose() * ds;
  }
  return g;
}

Eigen::MatrixXd standardize(const MlpModel& model,
                            const Eigen::MatrixXd& raw) {
  Eigen::MatrixXd x = raw.colwise() - model.feat_shift;
  x.array().colwise() /= model.feat_scale.array();
  return x;
}

}  // namespace

MlpGradients mlp_loss_gradients(const MlpModel& model,
                                const Eigen::MatrixXd& x_std,
                                const Eigen::VectorXd& y,
                                bool use_batch_stats) {
  const ForwardCache cache =
      forward_pass(model, x_std, use_batch_stats, nullptr);
  return backward_pass(model, cache, y, use_batch_stats, nullptr);
}

double mlp_loss(const MlpModel& model, const Eigen::MatrixXd& x_std,
                const Eigen::VectorXd& y, bool use_batch_stats) {
  const ForwardCache cache =
      forward_pass(model, x_std, use_batch_stats, nullptr);
  return loss_from_cache(model, cache, y);
}

namespace {

struct AdamState {
  std::vector<Eigen::MatrixXd> mw, vw;
  std::vector<Eigen::VectorXd> mb, vb, mg, vg, mbeta, vbeta;
  long step = 0;
};

void adam_update_matrix(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad,
                        Eigen::MatrixXd& m, Eigen::MatrixXd& v, double lr,
                        double c1, double c2) {
  m = 0.9 * m + 0.1 * grad;
  v.array() = 0.999 * v.array() + 0.001 * grad.array().square();
  param.array() -=
      lr * (m.array() / c1) / ((v.array() / c2).sqrt() + 1e-8);
}

void adam_update_vector(Eigen::VectorXd& param, const Eigen::VectorXd& grad,
                        Eigen::VectorXd& m, Eigen::VectorXd& v, double lr,
                        double c1, double c2) {
  m = 0.9 * m + 0.1 * grad;
  v.array() = 0.999 * v.array() + 0.001 * grad.array().square();
  param.array() -=
      lr * (m.array() / c1) / ((v.array() / c2).sqrt() + 1e-8);
}

struct Snapshot {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases, bn_gamma, bn_beta, bn_mean, bn_var;
};

Snapshot take_snapshot(const MlpModel& m) {
  return Snapshot{m.weights, m.biases, m.bn_gamma,
                  m.bn_beta, m.bn_mean, m.bn_var};
}

void restore_snapshot(MlpModel& m, const Snapshot& s) {
  m.weights = s.weights;
  m.biases = s.biases;
  m.bn_gamma = s.bn_gamma;
  m.bn_beta = s.bn_beta;
  m.bn_mean = s.bn_mean;
  m.bn_var = s.bn_var;
}

double inference_mse(const MlpModel& model, const Eigen::MatrixXd& x_std,
                     const Eigen::VectorXd& y) {
  const ForwardCache cache = forward_pass(model, x_std, false, nullptr);
  return (cache.y_hat.transpose() - y).squaredNorm() /
         static_cast<double>(y.size());
}

}  // namespace

MlpModel train_mlp(const std::vector<TrainingSample>& rows,
                   const MlpConfig& config, TrainReport* report) {
  config.validate();
  if (rows.empty()) throw std::invalid_argument("train_mlp: empty dataset");

  const Eigen::MatrixXd raw = feature_matrix(rows);
  const Eigen::VectorXd labels = label_vector(rows);
  const auto n = raw.cols();

  MlpModel model;
  model.config = config;

  // Feature scaler from the full input set; constant columns pass through.
  model.feat_shift = Eigen::VectorXd::Zero(kSurrogateFeatures);
  model.feat_scale = Eigen::VectorXd::Ones(kSurrogateFeatures);
  if (config.standardize_features) {
    model.feat_shift = raw.rowwise().mean();
    for (int f = 0; f < kSurrogateFeatures; ++f) {
      const double ss =
          (raw.row(f).array() - model.feat_shift(f)).square().sum();
      const double sd =
          n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
      model.feat_scale(f) = sd > 1e-12 ? sd : 1.0;
    }
  }
  const Eigen::MatrixXd x_all = standardize(model, raw);

  // He (relu) or Glorot (tanh) normal initialization; biases zero except
  // the output bias, which starts at the label mean.  Adam moves each
  // coordinate by at most ~lr per step, so starting the output at zero
  // would spend most of the step budget walking up to the price scale
  // before any structure gets fit.
  const auto n_hidden = config.hidden.size();
  std::vector<int> dims;
  dims.push_back(kSurrogateFeatures);
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(1);
  model.weights.resize(n_hidden + 1);
  model.biases.resize(n_hidden + 1);
  for (std::size_t l = 0; l <= n_hidden; ++l) {
    const int fan_in = dims[l];
    const int fan_out = dims[l + 1];
    const double sd =
        config.activation == Activation::relu
            ? std::sqrt(2.0 / static_cast<double>(fan_in))
            : std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
    RngStream stream(derive_seed(config.seed, kSeedInitBase + l));
    model.weights[l].resize(fan_out, fan_in);
    for (int i = 0; i < fan_out; ++i)
      for (int j = 0; j < fan_in; ++j)
        model.weights[l](i, j) = sd * stream.normal01();
    model.biases[l] = Eigen::VectorXd::Zero(fan_out);
  }
  model.biases[n_hidden](0) = labels.mean();
  if (config.batch_norm) {
    model.bn_gamma.resize(n_hidden);
    model.bn_beta.resize(n_hidden);
    model.bn_mean.resize(n_hidden);
    model.bn_var.resize(n_hidden);
    for (std::size_t l = 0; l < n_hidden; ++l) {
      model.bn_gamma[l] = Eigen::VectorXd::Ones(config.hidden[l]);
      model.bn_beta[l] = Eigen::VectorXd::Zero(config.hidden[l]);
      model.bn_mean[l] = Eigen::VectorXd::Zero(config.hidden[l]);
      model.bn_var[l] = Eigen::VectorXd::Ones(config.hidden[l]);
    }
  }

  // Validation split for early stopping: one seeded shuffle, tail block.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  {
    RngStream stream(derive_seed(config.seed, kSeedSplit));
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(stream.next_u64() % i);
      std::swap(order[i - 1], order[j]);
    }
  }
  const auto n_val = static_cast<std::size_t>(
      config.validation_fraction * static_cast<double>(n));
  std::vector<Eigen::Index> train_idx(order.begin(),
                                      order.end() - static_cast<long>(n_val));
  Eigen::MatrixXd x_val(kSurrogateFeatures, static_cast<Eigen::Index>(n_val));
  Eigen::VectorXd y_val(static_cast<Eigen::Index>(n_val));
  for (std::size_t i = 0; i < n_val; ++i) {
    const Eigen::Index src = order[train_idx.size() + i];
    x_val.col(static_cast<Eigen::Index>(i)) = x_all.col(src);
    y_val(static_cast<Eigen::Index>(i)) = labels(src);
  }
  if (train_idx.empty())
    throw std::invalid_argument("train_mlp: validation split leaves no data");

  AdamState adam;
  adam.mw.resize(n_hidden + 1);
  adam.vw.resize(n_hidden + 1);
  adam.mb.resize(n_hidden + 1);
  adam.vb.resize(n_hidden + 1);
  for (std::size_t l = 0; l <= n_hidden; ++l) {
    adam.mw[l] = Eigen::MatrixXd::Zero(model.weights[l].rows(),
                                       model.weights[l].cols());
    adam.vw[l] = adam.mw[l];
    adam.mb[l] = Eigen::VectorXd::Zero(model.biases[l].size());
    adam.vb[l] = adam.mb[l];
  }
  if (config.batch_norm) {
    adam.mg.resize(n_hidden);
    adam.vg.resize(n_hidden);
    adam.mbeta.resize(n_hidden);
    adam.vbeta.resize(n_hidden);
    for (std::size_t l = 0; l < n_hidden; ++l) {
      adam.mg[l] = Eigen::VectorXd::Zero(config.hidden[l]);
      adam.vg[l] = adam.mg[l];
      adam.mbeta[l] = adam.mg[l];
      adam.vbeta[l] = adam.mg[l];
    }
  }

  const bool early_stop = config.patience > 0 && n_val > 0;
  double best_val = std::numeric_limits<double>::infinity();
  Snapshot best = take_snapshot(model);
  int stale_epochs = 0;
  int epochs_run = 0;

  std::vector<Eigen::MatrixXd> masks(n_hidden);
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    ++epochs_run;
    RngStream shuffle_stream(
        derive_seed(config.seed, kSeedShuffleBase + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = train_idx.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(shuffle_stream.next_u64() % i);
      std::swap(train_idx[i - 1], train_idx[j]);
    }
    RngStream dropout_stream(
        derive_seed(config.seed, kSeedDropoutBase + static_cast<std::uint64_t>(epoch)));

    for (std::size_t start = 0; start < train_idx.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const auto size = std::min(static_cast<std::size_t>(config.batch_size),
                                 train_idx.size() - start);
      // Batch statistics need at least two samples.
      if (config.batch_norm && size < 2) break;
      Eigen::MatrixXd xb(kSurrogateFeatures, static_cast<Eigen::Index>(size));
      Eigen::VectorXd yb(static_cast<Eigen::Index>(size));
      for (std::size_t i = 0; i < size; ++i) {
        xb.col(static_cast<Eigen::Index>(i)) = x_all.col(train_idx[start + i]);
        yb(static_cast<Eigen::Index>(i)) = labels(train_idx[start + i]);
      }

      // Dropout only on the last hidden layer.  Earlier placements feed
      // dropout noise into the next layer's batch statistics, so the
      // running variance overshoots what inference activations have and
      // the deployed net degrades while the training objective improves.
      const std::vector<Eigen::MatrixXd>* mask_ptr = nullptr;
      if (config.dropout > 0.0 && n_hidden > 0) {
        const double keep = 1.0 - config.dropout;
        for (std::size_t l = 0; l + 1 < n_hidden; ++l) {
          masks[l].resize(config.hidden[l], static_cast<Eigen::Index>(size));
          masks[l].setOnes();
        }
        Eigen::MatrixXd& last = masks[n_hidden - 1];
        last.resize(config.hidden[n_hidden - 1],
                    static_cast<Eigen::Index>(size));
        for (Eigen::Index c = 0; c < last.cols(); ++c)
          for (Eigen::Index r = 0; r < last.rows(); ++r)
            last(r, c) = dropout_stream.uniform01() < keep ? 1.0 / keep : 0.0;
        mask_ptr = &masks;
      }

      const ForwardCache cache = forward_pass(model, xb, true, mask_ptr);
      const MlpGradients grads =
          backward_pass(model, cache, yb, true, mask_ptr);

      if (config.batch_norm) {
        // Running statistics: momentum 0.9, unbiased batch variance.
        const double bessel =
            size > 1 ? static_cast<double>(size) / static_cast<double>(size - 1)
                     : 1.0;
        for (std::size_t l = 0; l < n_hidden; ++l) {
          model.bn_mean[l] = 0.9 * model.bn_mean[l] + 0.1 * cache.mean[l];
          model.bn_var[l] =
              0.9 * model.bn_var[l] + 0.1 * bessel * cache.var[l];
        }
      }

      ++adam.step;
      const double c1 = 1.0 - std::pow(0.9, static_cast<double>(adam.step));
      const double c2 = 1.0 - std::pow(0.999, static_cast<double>(adam.step));
      for (std::size_t l = 0; l <= n_hidden; ++l) {
        adam_update_matrix(model.weights[l], grads.d_weights[l], adam.mw[l],
                           adam.vw[l], config.learning_rate, c1, c2);
        adam_update_vector(model.biases[l], grads.d_biases[l], adam.mb[l],
                           adam.vb[l], config.learning_rate, c1, c2);
      }
      if (config.batch_norm) {
        for (std::size_t l = 0; l < n_hidden; ++l) {
          adam_update_vector(model.bn_gamma[l], grads.d_gamma[l], adam.mg[l],
                             adam.vg[l], config.learning_rate, c1, c2);
          adam_update_vector(model.bn_beta[l], grads.d_beta[l], adam.mbeta[l],
                             adam.vbeta[l], config.learning_rate, c1, c2);
        }
      }
    }

    if (early_stop) {
      const double val = inference_mse(model, x_val, y_val);
      if (val < best_val) {
        best_val = val;
        best = take_snapshot(model);
        stale_epochs = 0;
      } else if (++stale_epochs >= config.patience) {
        break;
      }
    }
  }

  if (early_stop) restore_snapshot(model, best);

  if (report != nullptr) {
    report->epochs_run = epochs_run;
    report->train_mse = inference_mse(model, x_all, labels);
    report->val_mse = early_stop ? best_val : report->train_mse;
  }
  return model;
}

double predict(const MlpModel& model, const TrainingSample& row) {
  Eigen::MatrixXd x(kSurrogateFeatures, 1);
  x(kFeatR0, 0) = row.r0;
  x(kFeatIntensity, 0) = row.intensity;
  x(kFeatThreshold, 0) = row.threshold;
  x(kFeatMaturityDays, 0) = row.maturity_days;
  x(kFeatNCoupons, 0) = row.n_coupons;
  return predict_batch(model, x)(0);
}

Eigen::VectorXd predict_batch(const MlpModel& model,
                              const Eigen::MatrixXd& raw_features) {
  if (raw_features.rows() != kSurrogateFeatures)
    throw std::invalid_argument("predict_batch: feature row count mismatch");
  const Eigen::MatrixXd x_std = standardize(model, raw_features);
  const ForwardCache cache = forward_pass(model, x_std, false, nullptr);
  return cache.y_hat.transpose();
}

double mse(const MlpModel& model, const std::vector<TrainingSample>& rows) {
  if (rows.empty()) throw std::invalid_argument("mse: empty dataset");
  const Eigen::VectorXd pred = predict_batch(model, feature_matrix(rows));
  return (pred - label_vector(rows)).squaredNorm() /
         static_cast<double>(rows.size());
}

double mean_abs_error(const MlpModel& model,
                      const std::vector<TrainingSample>& rows) {
  if (rows.empty()) throw std::invalid_argument("mean_abs_error: empty dataset");
  const Eigen::VectorXd pred = predict_batch(model, feature_matrix(rows));
  return (pred - label_vector(rows)).cwiseAbs().sum() /
         static_cast<double>(rows.size());
}

namespace {

std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_vector(std::ostream& out, const char* tag, std::size_t index,
                  const Eigen::VectorXd& v) {
  out << tag << ' ' << index << ' ' << v.size();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    out << ' ' << format_double(v(i));
  out << '\n';
}

Eigen::VectorXd read_vector(std::istream& in, const char* tag,
                            std::size_t index) {
  std::string t;
  std::size_t idx = 0;
  Eigen::Index size = 0;
  in >> t >> idx >> size;
  if (!in || t != tag || idx != index || size < 0)
    throw std::runtime_error("model file: expected " + std::string(tag));
  Eigen::VectorXd v(size);
  for (Eigen::Index i = 0; i < size; ++i)
    if (!(in >> v(i))) throw std::runtime_error("model file: truncated vector");
  return v;
}

}  // namespace

void save_mlp(const MlpModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_mlp: cannot open " + path);
  const auto& c = model.config;
  out << "catlab-mlp 1\n";
  out << "activation " << (c.activation == Activation::relu ? "relu" : "tanh")
      << '\n';
  out << "batch_norm " << (c.batch_norm ? 1 : 0) << '\n';
  out << "l2 " << format_double(c.l2) << '\n';
  out << "dropout " << format_double(c.dropout) << '\n';
  out << "learning_rate " << format_double(c.learning_rate) << '\n';
  out << "batch_size " << c.batch_size << '\n';
  out << "max_epochs " << c.max_epochs << '\n';
  out << "patience " << c.patience << '\n';
  out << "validation_fraction " << format_double(c.validation_fraction)
      << '\n';
  out << "standardize " << (c.standardize_features ? 1 : 0) << '\n';
  out << "seed " << c.seed << '\n';
  out << "hidden " << c.hidden.size();
  for (int h : c.hidden) out << ' ' << h;
  out << '\n';
  write_vector(out, "feat_shift", 0, model.feat_shift);
  write_vector(out, "feat_scale", 0, model.feat_scale);
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    out << "W " << l << ' ' << model.weights[l].rows() << ' '
        << model.weights[l].cols();
    for (Eigen::Index i = 0; i < model.weights[l].rows(); ++i)
      for (Eigen::Index j = 0; j < model.weights[l].cols(); ++j)
        out << ' ' << format_double(model.weights[l](i, j));
    out << '\n';
    write_vector(out, "b", l, model.biases[l]);
  }
  if (c.batch_norm) {
    for (std::size_t l = 0; l < model.bn_gamma.size(); ++l) {
      write_vector(out, "gamma", l, model.bn_gamma[l]);
      write_vector(out, "beta", l, model.bn_beta[l]);
      write_vector(out, "mean", l, model.bn_mean[l]);
      write_vector(out, "var", l, model.bn_var[l]);
    }
  }
  out << "end\n";
  if (!out) throw std::runtime_error("save_mlp: write failed for " + path);
}

MlpModel load_mlp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_mlp: cannot open " + path);
  std::string token;
  int version = 0;
  in >> token >> version;
  if (!in || token != "catlab-mlp" || version != 1)
    throw std::runtime_error("load_mlp: unsupported model file " + path);

  MlpModel model;
  auto expect_key = [&](const char* key) {
    in >> token;
    if (!in || token != key)
      throw std::runtime_error("load_mlp: expected key " + std::string(key));
  };
  expect_key("activation");
  in >> token;
  if (token == "relu")
    model.config.activation = Activation::relu;
  else if (token == "tanh")
    model.config.activation = Activation::tanh_act;
  else
    throw std::runtime_error("load_mlp: unknown activation " + token);
  int flag = 0;
  expect_key("batch_norm");
  in >> flag;
  model.config.batch_norm = flag != 0;
  expect_key("l2");
  in >> model.config.l2;
  expect_key("dropout");
  in >> model.config.dropout;
  expect_key("learning_rate");
  in >> model.config.learning_rate;
  expect_key("batch_size");
  in >> model.config.batch_size;
  expect_key("max_epochs");
  in >> model.config.max_epochs;
  expect_key("patience");
  in >> model.config.patience;
  expect_key("validation_fraction");
  in >> model.config.validation_fraction;
  expect_key("standardize");
  in >> flag;
  model.config.standardize_features = flag != 0;
  expect_key("seed");
  in >> model.config.seed;
  expect_key("hidden");
  std::size_t n_hidden = 0;
  in >> n_hidden;
  if (!in || n_hidden == 0 || n_hidden > 64)
    throw std::runtime_error("load_mlp: bad hidden layer count");
  model.config.hidden.resize(n_hidden);
  for (auto& h : model.config.hidden) in >> h;
  if (!in) throw std::runtime_error("load_mlp: truncated header");

  model.feat_shift = read_vector(in, "feat_shift", 0);
  model.feat_scale = read_vector(in, "feat_scale", 0);
  if (model.feat_shift.size() != kSurrogateFeatures)
    throw std::runtime_error("load_mlp: feature count mismatch");

  model.weights.resize(n_hidden + 1);
  model.biases.resize(n_hidden + 1);
  for (std::size_t l = 0; l <= n_hidden; ++l) {
    std::size_t idx = 0;
    Eigen::Index rows = 0, cols = 0;
    in >> token >> idx >> rows >> cols;
    if (!in || token != "W" || idx != l || rows < 1 || cols < 1)
      throw std::runtime_error("load_mlp: expected weight matrix");
    model.weights[l].resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j)
        if (!(in >> model.weights[l](i, j)))
          throw std::runtime_error("load_mlp: truncated weights");
    model.biases[l] = read_vector(in, "b", l);
  }
  if (model.config.batch_norm) {
    model.bn_gamma.resize(n_hidden);
    model.bn_beta.resize(n_hidden);
    model.bn_mean.resize(n_hidden);
    model.bn_var.resize(n_hidden);
    for (std::size_t l = 0; l < n_hidden; ++l) {
      model.bn_gamma[l] = read_vector(in, "gamma", l);
      model.bn_beta[l] = read_vector(in, "beta", l);
      model.bn_mean[l] = read_vector(in, "mean", l);
      model.bn_var[l] = read_vector(in, "var", l);
    }
  }
  in >> token;
  if (!in || token != "end")
    throw std::runtime_error("load_mlp: missing end marker");
  return model;
}

CrossValResult cross_validate(const std::vector<TrainingSample>& rows,
                              const std::vector<MlpConfig>& candidates,
                              int k_folds, std::uint64_t fold_seed) {
  if (candidates.empty())
    throw std::invalid_argument("cross_validate: no candidates");
  if (k_folds < 2) throw std::invalid_argument("cross_validate: need k >= 2");
  if (rows.size() < static_cast<std::size_t>(k_folds))
    throw std::invalid_argument("cross_validate: fewer rows than folds");

  // One shuffle shared by all candidates; folds are contiguous blocks.
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  RngStream stream(derive_seed(fold_seed, 0));
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(stream.next_u64() % i);
    std::swap(order[i - 1], order[j]);
  }

  CrossValResult result;
  result.mean_val_mse.resize(candidates.size(), 0.0);
  result.fold_val_mse.assign(candidates.size(),
                             std::vector<double>(static_cast<std::size_t>(k_folds), 0.0));

  for (std::size_t c = 0; c < candidates.size(); ++c) {
    for (int f = 0; f < k_folds; ++f) {
      const std::size_t lo = rows.size() * static_cast<std::size_t>(f) /
                             static_cast<std::size_t>(k_folds);
      const std::size_t hi = rows.size() * static_cast<std::size_t>(f + 1) /
                             static_cast<std::size_t>(k_folds);
      std::vector<TrainingSample> train_rows;
      std::vector<TrainingSample> val_rows;
      train_rows.reserve(rows.size() - (hi - lo));
      val_rows.reserve(hi - lo);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        (i >= lo && i < hi ? val_rows : train_rows).push_back(rows[order[i]]);
      }
      // Fold-specific training seed so folds are not init-correlated.
      MlpConfig cfg = candidates[c];
      cfg.seed = derive_seed(candidates[c].seed,
                             static_cast<std::uint64_t>(f) + 1);
      const MlpModel model = train_mlp(train_rows, cfg, nullptr);
      const double val = mse(model, val_rows);
      result.fold_val_mse[c][static_cast<std::size_t>(f)] = val;
      result.mean_val_mse[c] += val / static_cast<double>(k_folds);
    }
  }
  result.best_index = static_cast<std::size_t>(
      std::min_element(result.mean_val_mse.begin(), result.mean_val_mse.end()) -
      result.mean_val_mse.begin());
  return result;
}

}  // namespace catlab

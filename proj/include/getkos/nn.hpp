#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "getkos/encoding.hpp"
#include "getkos/error.hpp"
#include "getkos/matrix.hpp"
#include "getkos/rng.hpp"

namespace getkos::nn {

enum class Activation : std::uint8_t { linear = 0, relu = 1 };

/// input_dim -> hidden widths (ReLU each) -> one linear output.
struct ArchSpec {
  std::size_t input_dim = kNumFeatures;
  std::vector<std::size_t> hidden;

  void validate() const {
    if (input_dim < 1) throw Error(ErrorKind::shape, "input_dim must be >= 1");
    for (auto w : hidden) {
      if (w < 1) throw Error(ErrorKind::shape, "hidden widths must be >= 1");
    }
  }

  /// "4-256-512-128-1"
  std::string summary() const {
    std::ostringstream os;
    os << input_dim;
    for (auto w : hidden) os << '-' << w;
    os << "-1";
    return os.str();
  }

  bool operator==(const ArchSpec&) const = default;
};

struct DenseLayer {
  Matrix weights;  // in_dim x out_dim
  std::vector<double> bias;
  Activation activation = Activation::relu;

  std::size_t in_dim() const { return weights.rows(); }
  std::size_t out_dim() const { return weights.cols(); }

  bool operator==(const DenseLayer&) const = default;
};

struct MLPModel {
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const {
    return layers.empty() ? 0 : layers.front().in_dim();
  }
  std::size_t depth() const { return layers.empty() ? 0 : layers.size() - 1; }

  ArchSpec arch() const {
    ArchSpec a{input_dim(), {}};
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
      a.hidden.push_back(layers[l].out_dim());
    }
    return a;
  }

  bool operator==(const MLPModel&) const = default;
};

/// Same shape as the model's parameters.
struct LayerGrad {
  Matrix weights;
  std::vector<double> bias;
};
using Gradients = std::vector<LayerGrad>;

inline Gradients zeros_like(const MLPModel& m) {
  Gradients g;
  g.reserve(m.layers.size());
  for (const auto& l : m.layers) {
    g.push_back({Matrix(l.in_dim(), l.out_dim()),
                 std::vector<double>(l.out_dim(), 0.0)});
  }
  return g;
}

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  std::uint64_t seed = 42;
  bool target_scaling = true;

  bool operator==(const TrainConfig&) const = default;
};

struct AdamState {
  Gradients m;
  Gradients v;
  std::uint64_t t = 0;
};

inline AdamState make_adam_state(const MLPModel& m) {
  return {zeros_like(m), zeros_like(m), 0};
}

/// Per-epoch MAE in IDR. val_mae stays empty when no validation rows exist.
struct TrainHistory {
  std::vector<double> train_mae;
  std::vector<double> val_mae;
};

struct ParamCount {
  std::size_t total = 0;
  std::size_t trainable = 0;
  std::size_t non_trainable = 0;
  std::vector<std::size_t> per_layer;
};

/// Trainable parameters of every dense layer plus the frozen normalization
/// scalars (2 per feature + count).
inline ParamCount param_count(const ArchSpec& arch, std::size_t n_features) {
  arch.validate();
  ParamCount pc;
  std::size_t in = arch.input_dim;
  auto add = [&](std::size_t out) {
    pc.per_layer.push_back(in * out + out);
    pc.trainable += in * out + out;
    in = out;
  };
  for (auto w : arch.hidden) add(w);
  add(1);
  pc.non_trainable = n_features == 0 ? 0 : 2 * n_features + 1;
  pc.total = pc.trainable + pc.non_trainable;
  return pc;
}

/// Glorot-uniform weights, zero biases.
inline MLPModel init_model(const ArchSpec& arch, std::uint64_t seed) {
  arch.validate();
  Rng rng(seed);
  MLPModel m;
  std::size_t in = arch.input_dim;
  auto add = [&](std::size_t out, Activation act) {
    DenseLayer l{Matrix(in, out), std::vector<double>(out, 0.0), act};
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    for (auto& w : l.weights.values()) w = rng.uniform(-limit, limit);
    m.layers.push_back(std::move(l));
    in = out;
  };
  for (auto w : arch.hidden) add(w, Activation::relu);
  add(1, Activation::linear);
  return m;
}

namespace detail {

/// Z = A * W + b, skipping zero inputs (frequent after ReLU).
inline void affine(const Matrix& A, const DenseLayer& layer, Matrix& Z) {
  const std::size_t n = A.rows(), in = layer.in_dim(), out = layer.out_dim();
  Z = Matrix(n, out);
  for (std::size_t i = 0; i < n; ++i) {
    double* z = Z.row(i).data();
    std::copy(layer.bias.begin(), layer.bias.end(), z);
    const double* a = A.row(i).data();
    for (std::size_t k = 0; k < in; ++k) {
      const double ak = a[k];
      if (ak == 0.0) continue;
      const double* w = layer.weights.row(k).data();
#pragma omp simd
      for (std::size_t j = 0; j < out; ++j) z[j] += ak * w[j];
    }
  }
}

inline void relu_inplace(Matrix& Z) {
  for (auto& v : Z.values()) v = v > 0.0 ? v : 0.0;
}

/// Activations of every layer; acts[0] is the input.
struct Tape {
  std::vector<Matrix> acts;
};

inline void check_input(const MLPModel& model, const Matrix& X) {
  if (model.layers.empty()) throw Error(ErrorKind::shape, "model has no layers");
  require_shape(X.cols() == model.input_dim(), "input columns",
                model.input_dim(), X.cols());
}

inline Tape run_forward(const MLPModel& model, const Matrix& X) {
  check_input(model, X);
  Tape tape;
  tape.acts.reserve(model.layers.size() + 1);
  tape.acts.push_back(X);
  for (const auto& layer : model.layers) {
    Matrix Z;
    affine(tape.acts.back(), layer, Z);
    if (layer.activation == Activation::relu) relu_inplace(Z);
    tape.acts.push_back(std::move(Z));
  }
  return tape;
}

}  // namespace detail

inline std::vector<double> forward(const MLPModel& model, const Matrix& X) {
  auto tape = detail::run_forward(model, X);
  return std::move(tape.acts.back().values());
}

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Mean absolute error and its subgradient (sign(0) = 0).
inline LossAndGrad mae_loss(std::span<const double> pred,
                            std::span<const double> target) {
  if (pred.empty()) throw Error(ErrorKind::empty_batch, "MAE of an empty batch");
  require_shape(pred.size() == target.size(), "target length", pred.size(),
                target.size());
  const auto n = static_cast<double>(pred.size());
  LossAndGrad out{0.0, std::vector<double>(pred.size())};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = pred[i] - target[i];
    out.loss += std::abs(r);
    out.grad[i] = (r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0)) / n;
  }
  out.loss /= n;
  return out;
}

struct BackwardResult {
  double loss = 0.0;
  Gradients grads;
};

/// Reverse-mode gradients of mean absolute error through the network.
inline BackwardResult loss_and_gradients(const MLPModel& model, const Matrix& X,
                                         std::span<const double> target) {
  const auto tape = detail::run_forward(model, X);
  require_shape(target.size() == X.rows(), "target length", X.rows(),
                target.size());
  auto lg = mae_loss(tape.acts.back().values(), target);

  BackwardResult out{lg.loss, zeros_like(model)};
  const std::size_t n = X.rows();
  Matrix delta(n, 1);
  delta.values() = std::move(lg.grad);

  for (std::size_t l = model.layers.size(); l-- > 0;) {
    const auto& layer = model.layers[l];
    const Matrix& A_in = tape.acts[l];
    const Matrix& A_out = tape.acts[l + 1];
    const std::size_t in = layer.in_dim(), out_dim = layer.out_dim();

    // delta becomes dL/dZ; a ReLU output of exactly 0 passes no gradient
    if (layer.activation == Activation::relu) {
      auto& d = delta.values();
      const auto& a = A_out.values();
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (a[i] <= 0.0) d[i] = 0.0;
      }
    }

    auto& g = out.grads[l];
    for (std::size_t i = 0; i < n; ++i) {
      const double* dz = delta.row(i).data();
      for (std::size_t j = 0; j < out_dim; ++j) g.bias[j] += dz[j];
      const double* a = A_in.row(i).data();
      for (std::size_t k = 0; k < in; ++k) {
        const double ak = a[k];
        if (ak == 0.0) continue;
        double* gw = g.weights.row(k).data();
#pragma omp simd
        for (std::size_t j = 0; j < out_dim; ++j) gw[j] += ak * dz[j];
      }
    }

    if (l == 0) break;
    Matrix prev(n, in);
    const Matrix& A_prev_out = tape.acts[l];
    for (std::size_t i = 0; i < n; ++i) {
      const double* dz = delta.row(i).data();
      const double* act = A_prev_out.row(i).data();
      double* dp = prev.row(i).data();
      for (std::size_t k = 0; k < in; ++k) {
        if (act[k] <= 0.0) continue;  // masked by the ReLU below anyway
        const double* w = layer.weights.row(k).data();
        double s = 0.0;
#pragma omp simd reduction(+ : s)
        for (std::size_t j = 0; j < out_dim; ++j) s += dz[j] * w[j];
        dp[k] = s;
      }
    }
    delta = std::move(prev);
  }
  return out;
}

inline Gradients backward(const MLPModel& model, const Matrix& X,
                          std::span<const double> target) {
  return loss_and_gradients(model, X, target).grads;
}

/// One Adam update with bias correction, in place.
inline void adam_step(MLPModel& model, const Gradients& grads, AdamState& state,
                      const TrainConfig& cfg) {
  require_shape(grads.size() == model.layers.size(), "gradient layer count",
                model.layers.size(), grads.size());
  require_shape(state.m.size() == model.layers.size(), "adam state layer count",
                model.layers.size(), state.m.size());
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    const std::size_t expected = layer.weights.size();
    require_shape(grads[l].weights.size() == expected, "gradient size", expected,
                  grads[l].weights.size());
    require_shape(state.m[l].weights.size() == expected, "adam state size",
                  expected, state.m[l].weights.size());
    require_shape(grads[l].bias.size() == layer.bias.size(), "gradient bias size",
                  layer.bias.size(), grads[l].bias.size());
  }

  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  auto update = [&](std::vector<double>& theta, const std::vector<double>& g,
                    std::vector<double>& m, std::vector<double>& v) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      theta[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  };
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto& layer = model.layers[l];
    update(layer.weights.values(), grads[l].weights.values(),
           state.m[l].weights.values(), state.v[l].weights.values());
    update(layer.bias, grads[l].bias, state.m[l].bias, state.v[l].bias);
  }
}

/// Affine map applied to targets during training: y_scaled = (y - mean) / scale.
struct TargetScaling {
  double mean = 0.0;
  double scale = 1.0;

  static TargetScaling fit(std::span<const double> y, bool enabled) {
    if (!enabled || y.empty()) return {};
    const auto n = static_cast<double>(y.size());
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : y) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / n);
    return {mean, sd > 0.0 ? sd : 1.0};
  }
};

/// Folds the target scaling into the linear head so the model predicts in
/// target units directly.
inline void fold_scaling(MLPModel& m, const TargetScaling& s) {
  auto& head = m.layers.back();
  for (auto& w : head.weights.values()) w *= s.scale;
  for (auto& b : head.bias) b = b * s.scale + s.mean;
}

inline void unfold_scaling(MLPModel& m, const TargetScaling& s) {
  auto& head = m.layers.back();
  for (auto& w : head.weights.values()) w /= s.scale;
  for (auto& b : head.bias) b = (b - s.mean) / s.scale;
}

inline std::string format_lr(double lr) {
  std::ostringstream os;
  os << lr;
  return os.str();
}

namespace detail {

/// Mini-batch Adam over a model that already lives in scaled-target space.
inline TrainHistory run_epochs(MLPModel& model, const Matrix& X,
                               std::span<const double> y, const Matrix& X_val,
                               std::span<const double> y_val,
                               const TrainConfig& cfg, const TargetScaling& ts) {
  if (X.rows() == 0) throw Error(ErrorKind::empty_batch, "training set is empty");
  if (cfg.epochs < 1 || cfg.batch_size < 1) {
    throw Error(ErrorKind::shape, "epochs and batch_size must be >= 1");
  }
  require_shape(y.size() == X.rows(), "training target length", X.rows(),
                y.size());
  require_shape(y_val.size() == X_val.rows(), "validation target length",
                X_val.rows(), y_val.size());

  std::vector<double> y_scaled(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    y_scaled[i] = (y[i] - ts.mean) / ts.scale;
  }

  const std::size_t n = X.rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(cfg.seed));
  AdamState state = make_adam_state(model);
  TrainHistory history;
  std::vector<double> yb;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double abs_sum = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      const Matrix Xb = X.gather_rows(idx);
      yb.resize(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) yb[i] = y_scaled[idx[i]];
      auto br = loss_and_gradients(model, Xb, yb);
      if (!std::isfinite(br.loss)) {
        throw Error(ErrorKind::divergence,
                    "non-finite loss at epoch " + std::to_string(epoch) +
                        " (learning rate " + format_lr(cfg.learning_rate) + ")");
      }
      abs_sum += br.loss * static_cast<double>(idx.size());
      adam_step(model, br.grads, state, cfg);
    }
    history.train_mae.push_back(abs_sum / static_cast<double>(n) * ts.scale);

    if (X_val.rows() > 0) {
      auto pred = forward(model, X_val);
      for (auto& p : pred) p = p * ts.scale + ts.mean;
      const double val = mae_loss(pred, y_val).loss;
      if (!std::isfinite(val)) {
        throw Error(ErrorKind::divergence,
                    "non-finite validation loss at epoch " +
                        std::to_string(epoch) + " (learning rate " +
                        format_lr(cfg.learning_rate) + ")");
      }
      history.val_mae.push_back(val);
    }
  }
  return history;
}

}  // namespace detail

struct TrainResult {
  MLPModel model;
  TrainHistory history;
};

/// Trains from a fresh Glorot initialization seeded by cfg.seed. The returned
/// model predicts in target units whether or not target scaling was used.
inline TrainResult train(const ArchSpec& arch, const Matrix& X_train,
                         std::span<const double> y_train, const Matrix& X_val,
                         std::span<const double> y_val, const TrainConfig& cfg) {
  if (X_train.rows() == 0) {
    throw Error(ErrorKind::empty_batch, "training set is empty");
  }
  require_shape(X_train.cols() == arch.input_dim, "input columns",
                arch.input_dim, X_train.cols());
  TrainResult r{init_model(arch, cfg.seed), {}};
  const auto ts = TargetScaling::fit(y_train, cfg.target_scaling);
  r.history = detail::run_epochs(r.model, X_train, y_train, X_val, y_val, cfg, ts);
  fold_scaling(r.model, ts);
  return r;
}

/// Continues training an existing model (fresh optimizer state).
inline TrainResult fine_tune(MLPModel model, const Matrix& X_train,
                             std::span<const double> y_train, const Matrix& X_val,
                             std::span<const double> y_val,
                             const TrainConfig& cfg) {
  const auto ts = TargetScaling::fit(y_train, cfg.target_scaling);
  unfold_scaling(model, ts);
  TrainResult r{std::move(model), {}};
  r.history = detail::run_epochs(r.model, X_train, y_train, X_val, y_val, cfg, ts);
  fold_scaling(r.model, ts);
  return r;
}

/// MAE in IDR of the model on an encoded dataset.
inline double evaluate(const MLPModel& model, const FeatureEncoder& encoder,
                       const CleanDataset& test) {
  if (test.empty()) throw Error(ErrorKind::empty_batch, "test set is empty");
  const auto data = encode_matrix(encoder, test);
  return mae_loss(forward(model, data.X), data.y).loss;
}

}  // namespace getkos::nn

#pragma once

// Fully connected feed-forward networks: forward pass, backpropagation and
// Adam. Used by the perceptron classifier, the supervised head and the
// autoencoder.

#include "alimit/core.hpp"

#include <limits>
#include <optional>
#include <string_view>

namespace alimit::nn {

enum class Activation { relu, softmax, linear };
enum class Loss { categorical_crossentropy, mean_squared_error };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::softmax: return "softmax";
    case Activation::linear: return "linear";
  }
  return "?";
}

struct LayerSpec {
  std::size_t input_size = 0;
  std::size_t output_size = 0;
  Activation activation = Activation::relu;
};

/// Layer k maps activations of width specs[k].input_size to specs[k].output_size
/// through weights[k] (output x input) and biases[k].
struct MlpModel {
  std::vector<LayerSpec> specs;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  std::size_t layer_count() const { return specs.size(); }
  std::size_t input_size() const { return specs.empty() ? 0 : specs.front().input_size; }
  std::size_t output_size() const { return specs.empty() ? 0 : specs.back().output_size; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& s : specs) n += s.output_size * s.input_size + s.output_size;
    return n;
  }
};

/// Same shapes as the model's parameters.
struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
};

struct TrainConfig {
  Loss loss = Loss::categorical_crossentropy;
  std::size_t batch_size = 128;
  std::size_t max_epochs = 50;
  double validation_fraction = 0.2;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t patience = 5;
  std::uint64_t seed = 0;

  void validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
      throw ConfigError("validation_fraction must lie in [0, 1)");
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
      throw ConfigError("Adam betas must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be > 0");
  }
};

inline void validate_specs(std::span<const LayerSpec> specs) {
  if (specs.empty()) throw ConfigError("network needs at least one layer");
  for (std::size_t k = 0; k < specs.size(); ++k) {
    if (specs[k].input_size < 1 || specs[k].output_size < 1)
      throw ConfigError("layer " + std::to_string(k) + " has a zero size");
    if (specs[k].activation == Activation::softmax && k + 1 != specs.size())
      throw ConfigError("softmax is only allowed on the final layer");
    if (k > 0 && specs[k - 1].output_size != specs[k].input_size)
      throw ConfigError("layer " + std::to_string(k - 1) + " outputs " + std::to_string(specs[k - 1].output_size) +
                        " values but layer " + std::to_string(k) + " expects " +
                        std::to_string(specs[k].input_size));
  }
}

/// Weights uniform in +-sqrt(6 / fan_in), biases zero.
inline MlpModel init_model(std::span<const LayerSpec> specs, std::uint64_t seed) {
  validate_specs(specs);
  MlpModel model;
  model.specs.assign(specs.begin(), specs.end());
  Rng rng(seed);
  for (const auto& s : specs) {
    const double limit = std::sqrt(6.0 / static_cast<double>(s.input_size));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix w(static_cast<Eigen::Index>(s.output_size), static_cast<Eigen::Index>(s.input_size));
    // Fill row by row so the draw order does not depend on storage order.
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
    model.weights.push_back(std::move(w));
    model.biases.push_back(Vector::Zero(static_cast<Eigen::Index>(s.output_size)));
  }
  return model;
}

/// Row-wise softmax with max subtraction.
inline Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    auto e = (logits.row(r).array() - m).exp();
    out.row(r) = e / e.sum();
  }
  return out;
}

inline void apply_activation(Activation a, Matrix& z) {
  switch (a) {
    case Activation::relu: z = z.cwiseMax(0.0); break;
    case Activation::softmax: z = softmax_rows(z); break;
    case Activation::linear: break;
  }
}

namespace detail {

inline void check_input(const MlpModel& model, const Matrix& batch) {
  if (model.specs.empty()) throw ConfigError("model has no layers");
  if (static_cast<std::size_t>(batch.cols()) != model.input_size())
    throw ShapeError("batch has " + std::to_string(batch.cols()) + " columns, model expects " +
                     std::to_string(model.input_size()));
}

struct ForwardCache {
  std::vector<Matrix> activations;      // input plus one per layer
  std::vector<Matrix> pre_activations;  // one per layer
};

inline ForwardCache forward_cached(const MlpModel& model, const Matrix& batch) {
  check_input(model, batch);
  ForwardCache cache;
  cache.activations.reserve(model.layer_count() + 1);
  cache.pre_activations.reserve(model.layer_count());
  cache.activations.push_back(batch);
  for (std::size_t k = 0; k < model.layer_count(); ++k) {
    Matrix z = cache.activations.back() * model.weights[k].transpose();
    z.rowwise() += model.biases[k].transpose();
    Matrix a = z;
    apply_activation(model.specs[k].activation, a);
    cache.pre_activations.push_back(std::move(z));
    cache.activations.push_back(std::move(a));
  }
  return cache;
}

inline void check_loss_pairing(const MlpModel& model, Loss loss) {
  const Activation out = model.specs.back().activation;
  if (loss == Loss::categorical_crossentropy && out != Activation::softmax)
    throw ConfigError("categorical crossentropy needs a softmax output layer");
  if (loss == Loss::mean_squared_error && out == Activation::softmax)
    throw ConfigError("softmax output is reserved for categorical crossentropy");
}

}  // namespace detail

/// Activations of every layer, the input batch first.
inline std::vector<Matrix> forward(const MlpModel& model, const Matrix& batch) {
  return detail::forward_cached(model, batch).activations;
}

/// Final-layer output only.
inline Matrix predict(const MlpModel& model, const Matrix& batch) {
  detail::check_input(model, batch);
  Matrix a = batch;
  for (std::size_t k = 0; k < model.layer_count(); ++k) {
    Matrix z = a * model.weights[k].transpose();
    z.rowwise() += model.biases[k].transpose();
    apply_activation(model.specs[k].activation, z);
    a = std::move(z);
  }
  return a;
}

/// Mean over the batch. Crossentropy sums -t log p over outputs; squared
/// error sums (p - t)^2 over outputs.
inline double loss_value(const Matrix& prediction, const Matrix& targets, Loss loss) {
  if (prediction.rows() != targets.rows() || prediction.cols() != targets.cols())
    throw ShapeError("prediction and target shapes differ");
  const double n = static_cast<double>(prediction.rows());
  if (loss == Loss::categorical_crossentropy) {
    const double tiny = std::numeric_limits<double>::min();
    return -(targets.array() * prediction.array().max(tiny).log()).sum() / n;
  }
  return (prediction - targets).array().square().sum() / n;
}

inline double evaluate_loss(const MlpModel& model, const Matrix& batch, const Matrix& targets, Loss loss) {
  detail::check_loss_pairing(model, loss);
  return loss_value(predict(model, batch), targets, loss);
}

/// Gradient of `loss_value` with respect to every weight and bias.
inline Gradients backward(const MlpModel& model, const Matrix& batch, const Matrix& targets, Loss loss) {
  detail::check_input(model, batch);
  detail::check_loss_pairing(model, loss);
  if (!batch.allFinite() || !targets.allFinite()) throw NumericError("non-finite value in batch or targets");
  if (targets.rows() != batch.rows() || static_cast<std::size_t>(targets.cols()) != model.output_size())
    throw ShapeError("targets do not match the final layer");

  const auto cache = detail::forward_cached(model, batch);
  const double n = static_cast<double>(batch.rows());
  const std::size_t layers = model.layer_count();

  Gradients g;
  g.weights.resize(layers);
  g.biases.resize(layers);

  // Error signal at the pre-activation of the output layer.
  Matrix delta;
  const Matrix& out = cache.activations.back();
  if (loss == Loss::categorical_crossentropy) {
    delta = (out - targets) / n;
  } else {
    delta = 2.0 * (out - targets) / n;
    if (model.specs.back().activation == Activation::relu)
      delta = delta.cwiseProduct((cache.pre_activations.back().array() > 0.0).cast<double>().matrix());
  }

  for (std::size_t k = layers; k-- > 0;) {
    g.weights[k] = delta.transpose() * cache.activations[k];
    g.biases[k] = delta.colwise().sum().transpose();
    if (k == 0) break;
    Matrix upstream = delta * model.weights[k];
    switch (model.specs[k - 1].activation) {
      case Activation::relu:
        upstream = upstream.cwiseProduct((cache.pre_activations[k - 1].array() > 0.0).cast<double>().matrix());
        break;
      case Activation::linear: break;
      case Activation::softmax: throw ConfigError("softmax on a hidden layer");
    }
    delta = std::move(upstream);
  }

  for (std::size_t k = 0; k < layers; ++k)
    if (!g.weights[k].allFinite() || !g.biases[k].allFinite()) throw NumericError("non-finite gradient");
  return g;
}

/// First and second moment accumulators of Adam.
class AdamState {
 public:
  explicit AdamState(const MlpModel& model) {
    for (std::size_t k = 0; k < model.layer_count(); ++k) {
      m_w_.push_back(Matrix::Zero(model.weights[k].rows(), model.weights[k].cols()));
      v_w_.push_back(Matrix::Zero(model.weights[k].rows(), model.weights[k].cols()));
      m_b_.push_back(Vector::Zero(model.biases[k].size()));
      v_b_.push_back(Vector::Zero(model.biases[k].size()));
    }
  }

  std::uint64_t step() const { return step_; }

  void apply(MlpModel& model, const Gradients& g, const TrainConfig& cfg) {
    ++step_;
    const double t = static_cast<double>(step_);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t k = 0; k < model.layer_count(); ++k) {
      update(model.weights[k], g.weights[k], m_w_[k], v_w_[k], cfg, c1, c2);
      update(model.biases[k], g.biases[k], m_b_[k], v_b_[k], cfg, c1, c2);
    }
  }

 private:
  template <typename P>
  static void update(P& param, const P& grad, P& m, P& v, const TrainConfig& cfg, double c1, double c2) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    param.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
  }

  std::vector<Matrix> m_w_, v_w_;
  std::vector<Vector> m_b_, v_b_;
  std::uint64_t step_ = 0;
};

struct TrainResult {
  MlpModel model;
  std::vector<double> loss_history;        // mean training loss per epoch
  std::vector<double> val_loss_history;    // empty without a validation split
  std::size_t best_epoch = 0;              // 1-based epoch whose weights were kept
};

namespace detail {

inline Matrix gather_rows(const Matrix& m, std::span<const std::size_t> index) {
  Matrix out(static_cast<Eigen::Index>(index.size()), m.cols());
  for (std::size_t i = 0; i < index.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(index[i]));
  return out;
}

}  // namespace detail

/// Mini-batch Adam. The last `validation_fraction` of a seeded permutation is
/// held out; training stops after `patience` epochs without a lower
/// validation loss and the best weights are returned. Without a validation
/// split every epoch runs and the final weights are returned.
inline TrainResult train(MlpModel model, const Matrix& inputs, const Matrix& targets, const TrainConfig& cfg) {
  cfg.validate();
  if (inputs.rows() == 0) throw InputError("training data is empty");
  if (inputs.rows() != targets.rows()) throw ShapeError("inputs and targets have different row counts");
  detail::check_input(model, inputs);
  detail::check_loss_pairing(model, cfg.loss);
  if (static_cast<std::size_t>(targets.cols()) != model.output_size())
    throw ShapeError("targets do not match the final layer");

  Rng rng(cfg.seed);
  const std::size_t n = static_cast<std::size_t>(inputs.rows());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * (1.0 - cfg.validation_fraction)));
  const std::size_t n_fit = std::max<std::size_t>(n_train, 1);
  std::vector<std::size_t> fit_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_fit));
  std::vector<std::size_t> val_idx(order.begin() + static_cast<std::ptrdiff_t>(n_fit), order.end());
  const bool early_stopping = !val_idx.empty();

  Matrix val_x, val_t;
  if (early_stopping) {
    val_x = detail::gather_rows(inputs, val_idx);
    val_t = detail::gather_rows(targets, val_idx);
  }

  TrainResult result;
  AdamState adam(model);
  MlpModel best = model;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(fit_idx.begin(), fit_idx.end(), rng);
    double weighted = 0.0;
    for (std::size_t start = 0; start < fit_idx.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(fit_idx.size(), start + cfg.batch_size);
      const std::span<const std::size_t> idx(fit_idx.data() + start, stop - start);
      const Matrix bx = detail::gather_rows(inputs, idx);
      const Matrix bt = detail::gather_rows(targets, idx);
      weighted += loss_value(predict(model, bx), bt, cfg.loss) * static_cast<double>(idx.size());
      adam.apply(model, backward(model, bx, bt, cfg.loss), cfg);
    }
    result.loss_history.push_back(weighted / static_cast<double>(fit_idx.size()));

    if (!early_stopping) {
      result.best_epoch = epoch;
      continue;
    }
    const double val = loss_value(predict(model, val_x), val_t, cfg.loss);
    result.val_loss_history.push_back(val);
    if (val < best_val) {
      best_val = val;
      best = model;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  result.model = early_stopping ? std::move(best) : std::move(model);
  return result;
}

/// Row-wise argmax of the network output; ties go to the lowest index.
inline Labels predict_classes(const MlpModel& model, const Matrix& batch) {
  const Matrix out = predict(model, batch);
  Labels labels(static_cast<std::size_t>(out.rows()));
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < out.cols(); ++c)
      if (out(r, c) > out(r, best)) best = c;
    labels[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return labels;
}

}  // namespace alimit::nn

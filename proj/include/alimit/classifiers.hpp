#pragma once

// The three classifier families compared against the accuracy limit: naive
// Bayes over per-feature Gaussian KDEs, Bayes with correlated multivariate
// Gaussian likelihoods (CMVG), and a one-hidden-layer perceptron. Random
// dimensionality expansion (RDE) wraps any of them.

#include "alimit/core.hpp"
#include "alimit/neuralnet.hpp"

#include <numbers>
#include <optional>
#include <string_view>
#include <variant>

namespace alimit::clf {

/// Densities below exp(-745) are floored there before taking logs.
inline constexpr double kLogLikelihoodFloor = -745.0;

namespace detail {

/// Class count of a training set; every class in [0, K) must be present.
inline std::size_t checked_class_count(const LabeledDataset& train, std::size_t min_per_class) {
  train.validate();
  if (train.rows() == 0) throw FitError("training set is empty");
  const std::size_t k = train.class_count();
  if (k < 2) throw FitError("training set must contain at least two classes");
  std::vector<std::size_t> counts(k, 0);
  for (int l : train.labels) ++counts[static_cast<std::size_t>(l)];
  for (std::size_t c = 0; c < k; ++c)
    if (counts[c] < min_per_class)
      throw FitError("class " + std::to_string(c) + " has " + std::to_string(counts[c]) + " training samples, needs " +
                     std::to_string(min_per_class));
  return k;
}

/// Normalized posterior from per-class log-likelihoods under a flat prior.
inline Vector flat_posterior(const Vector& log_likelihood) {
  const double best = log_likelihood.maxCoeff();
  Vector p = (log_likelihood.array() - best).exp();
  return p / p.sum();
}

inline int argmax(const Vector& p) {
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < p.size(); ++c)
    if (p(c) > p(best)) best = c;
  return static_cast<int>(best);
}

inline void check_point(std::span<const double> u, std::size_t dims) {
  if (u.size() != dims) throw ShapeError("point has " + std::to_string(u.size()) + " features, model expects " +
                                         std::to_string(dims));
  for (double v : u)
    if (std::isnan(v)) throw NumericError("NaN in input point");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Naive Bayes with Gaussian kernel density marginals

/// Per class c and feature f: the retained training values and the Scott
/// bandwidth h = sigma * n^(-1/5).
struct NaiveBayesModel {
  std::size_t classes = 0;
  std::size_t dims = 0;
  std::vector<std::vector<Eigen::ArrayXd>> samples;  // [class][feature]
  Matrix bandwidth;                                  // classes x dims

  /// Log of the KDE marginal of feature f under class c, floored.
  double log_marginal(std::size_t c, std::size_t f, double u) const {
    const Eigen::ArrayXd& xs = samples[c][f];
    const double h = bandwidth(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(f));
    const double inv_h = 1.0 / h;
    const double s = (((xs - u) * inv_h).square() * -0.5).exp().sum();
    const double density = s / (static_cast<double>(xs.size()) * h * std::sqrt(2.0 * std::numbers::pi));
    return density > 0.0 ? std::max(std::log(density), kLogLikelihoodFloor) : kLogLikelihoodFloor;
  }

  Vector log_likelihoods(std::span<const double> u) const {
    detail::check_point(u, dims);
    Vector ll = Vector::Zero(static_cast<Eigen::Index>(classes));
    for (std::size_t c = 0; c < classes; ++c)
      for (std::size_t f = 0; f < dims; ++f) ll(static_cast<Eigen::Index>(c)) += log_marginal(c, f, u[f]);
    return ll;
  }

  Vector posterior(std::span<const double> u) const { return detail::flat_posterior(log_likelihoods(u)); }
};

/// Scott's rule for one feature: sigma * n^(-1/5), sigma the sample standard
/// deviation. Degenerate features fall back to 1e-6 * (1 + |mean|).
inline double scott_bandwidth(const Eigen::ArrayXd& xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = xs.mean();
  double sigma = 0.0;
  if (xs.size() > 1) sigma = std::sqrt((xs - mean).square().sum() / (n - 1.0));
  const double floor = 1e-6 * (1.0 + std::abs(mean));
  return std::max(sigma * std::pow(n, -0.2), floor);
}

inline NaiveBayesModel fit_naive_bayes(const LabeledDataset& train) {
  const std::size_t k = detail::checked_class_count(train, 1);
  NaiveBayesModel m;
  m.classes = k;
  m.dims = train.dims();
  m.samples.assign(k, std::vector<Eigen::ArrayXd>(m.dims));
  m.bandwidth.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m.dims));
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < train.rows(); ++i)
      if (train.labels[i] == static_cast<int>(c)) rows.push_back(static_cast<Eigen::Index>(i));
    for (std::size_t f = 0; f < m.dims; ++f) {
      Eigen::ArrayXd xs(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r)
        xs(static_cast<Eigen::Index>(r)) = train.features(rows[r], static_cast<Eigen::Index>(f));
      if (!xs.allFinite()) throw NumericError("non-finite training feature");
      m.bandwidth(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(f)) = scott_bandwidth(xs);
      m.samples[c][f] = std::move(xs);
    }
  }
  return m;
}

inline Vector nb_posterior(const NaiveBayesModel& model, std::span<const double> u) { return model.posterior(u); }

// ---------------------------------------------------------------------------
// Correlated multivariate Gaussian Bayes

struct CmvgClass {
  Vector mu;
  Matrix sigma;
  Matrix precision;
  double log_det = 0.0;
  bool ridge_applied = false;
};

struct CmvgModel {
  std::size_t dims = 0;
  std::vector<CmvgClass> classes;

  Vector log_likelihoods(std::span<const double> u) const {
    detail::check_point(u, dims);
    const Eigen::Map<const Vector> x(u.data(), static_cast<Eigen::Index>(u.size()));
    const double log2pi = std::log(2.0 * std::numbers::pi);
    Vector ll(static_cast<Eigen::Index>(classes.size()));
    for (std::size_t c = 0; c < classes.size(); ++c) {
      const Vector diff = x - classes[c].mu;
      const double q = diff.dot(classes[c].precision * diff);
      const double v = -0.5 * (q + classes[c].log_det + static_cast<double>(dims) * log2pi);
      ll(static_cast<Eigen::Index>(c)) = std::isnan(v) ? kLogLikelihoodFloor : std::max(v, kLogLikelihoodFloor);
    }
    return ll;
  }

  Vector posterior(std::span<const double> u) const { return detail::flat_posterior(log_likelihoods(u)); }
};

/// Precision and log-determinant of a covariance, adding a ridge of
/// 1e-6 * mean(diag) when its smallest eigenvalue is below 1e-10.
inline CmvgClass make_cmvg_class(Vector mu, Matrix sigma) {
  CmvgClass c;
  c.mu = std::move(mu);
  c.sigma = std::move(sigma);
  const Eigen::Index d = c.sigma.rows();
  Eigen::SelfAdjointEigenSolver<Matrix> es(c.sigma);
  if (es.eigenvalues().minCoeff() < 1e-10) {
    const double eps = 1e-6 * std::max(c.sigma.diagonal().mean(), 1e-12);
    es.compute(c.sigma + eps * Matrix::Identity(d, d));
    c.ridge_applied = true;
    if (es.eigenvalues().minCoeff() <= 0.0) throw FitError("covariance is not positive definite after ridge");
  }
  c.precision = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  c.precision = 0.5 * (c.precision + c.precision.transpose());
  c.log_det = es.eigenvalues().array().log().sum();
  return c;
}

inline CmvgModel fit_cmvg(const LabeledDataset& train) {
  const std::size_t k = detail::checked_class_count(train, 2);
  if (!train.features.allFinite()) throw NumericError("non-finite training feature");
  CmvgModel m;
  m.dims = train.dims();
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < train.rows(); ++i)
      if (train.labels[i] == static_cast<int>(c)) rows.push_back(i);
    const Matrix x = train.subset(rows).features;
    const Vector mu = x.colwise().mean().transpose();
    const Matrix centered = x.rowwise() - mu.transpose();
    Matrix sigma = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
    sigma = 0.5 * (sigma + sigma.transpose());
    m.classes.push_back(make_cmvg_class(mu, sigma));
  }
  return m;
}

inline Vector cmvg_posterior(const CmvgModel& model, std::span<const double> u) { return model.posterior(u); }

// ---------------------------------------------------------------------------
// Perceptron

/// [D -> hidden relu -> K softmax] on standardized inputs. The per-feature
/// mean and scale come from the training set.
struct PerceptronClassifier {
  nn::MlpModel network;
  Vector input_mean;
  Vector input_scale;

  std::size_t dims() const { return static_cast<std::size_t>(input_mean.size()); }
  std::size_t classes() const { return network.output_size(); }

  Matrix standardize(const Matrix& x) const {
    if (static_cast<std::size_t>(x.cols()) != dims()) throw ShapeError("input width does not match the perceptron");
    return (x.rowwise() - input_mean.transpose()).array().rowwise() / input_scale.transpose().array();
  }

  Matrix posteriors(const Matrix& x) const { return nn::predict(network, standardize(x)); }

  Vector posterior(std::span<const double> u) const {
    detail::check_point(u, dims());
    const Matrix row = Eigen::Map<const Matrix>(u.data(), 1, static_cast<Eigen::Index>(u.size()));
    return posteriors(row).row(0).transpose();
  }
};

inline constexpr std::size_t kDefaultHiddenUnits = 100;

inline PerceptronClassifier fit_perceptron(const LabeledDataset& train, const nn::TrainConfig& config,
                                           std::size_t hidden = kDefaultHiddenUnits) {
  const std::size_t k = detail::checked_class_count(train, 1);
  if (!train.features.allFinite()) throw NumericError("non-finite training feature");
  if (hidden < 1) throw ConfigError("hidden layer needs at least one unit");
  PerceptronClassifier p;
  p.input_mean = train.features.colwise().mean().transpose();
  const Matrix centered = train.features.rowwise() - p.input_mean.transpose();
  p.input_scale = (centered.array().square().colwise().sum() / static_cast<double>(train.rows())).sqrt().transpose();
  for (Eigen::Index f = 0; f < p.input_scale.size(); ++f)
    if (!(p.input_scale(f) > 1e-12)) p.input_scale(f) = 1.0;

  const std::vector<nn::LayerSpec> specs{{train.dims(), hidden, nn::Activation::relu},
                                         {hidden, k, nn::Activation::softmax}};
  nn::TrainConfig cfg = config;
  cfg.loss = nn::Loss::categorical_crossentropy;
  auto result = nn::train(nn::init_model(specs, cfg.seed), p.standardize(train.features), one_hot(train.labels, k), cfg);
  p.network = std::move(result.model);
  return p;
}

// ---------------------------------------------------------------------------
// Uniform interface

enum class ClassifierKind { naive_bayes, cmvg, perceptron };

inline std::string_view to_string(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::naive_bayes: return "naive_bayes";
    case ClassifierKind::cmvg: return "cmvg";
    case ClassifierKind::perceptron: return "perceptron";
  }
  return "?";
}

inline ClassifierKind parse_classifier_kind(std::string_view s) {
  if (s == "naive_bayes" || s == "nb") return ClassifierKind::naive_bayes;
  if (s == "cmvg") return ClassifierKind::cmvg;
  if (s == "perceptron" || s == "mlp") return ClassifierKind::perceptron;
  throw ConfigError("unknown classifier '" + std::string(s) + "'");
}

using BaseClassifier = std::variant<NaiveBayesModel, CmvgModel, PerceptronClassifier>;

/// Inner classifier trained on v = M u, M a fixed (D2 x D) standard-normal matrix.
struct RdeWrapper {
  Matrix expansion;
  BaseClassifier inner;

  Matrix expand(const Matrix& x) const {
    if (x.cols() != expansion.cols()) throw ShapeError("input width does not match the RDE matrix");
    return x * expansion.transpose();
  }
};

using Classifier = std::variant<NaiveBayesModel, CmvgModel, PerceptronClassifier, RdeWrapper>;

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::cmvg;
  std::size_t rde_dims = 0;  // 0 disables expansion
  std::size_t hidden = kDefaultHiddenUnits;
  nn::TrainConfig train;      // perceptron only
  std::uint64_t seed = 0;     // RDE matrix and perceptron seeds
};

/// D2 x D matrix of independent N(0, 1) entries.
inline Matrix rde_matrix(std::size_t expanded_dims, std::size_t dims, std::uint64_t seed) {
  if (expanded_dims <= dims) throw ConfigError("RDE needs D2 > D (got D2=" + std::to_string(expanded_dims) +
                                               ", D=" + std::to_string(dims) + ")");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(static_cast<Eigen::Index>(expanded_dims), static_cast<Eigen::Index>(dims));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = normal(rng);
  return m;
}

inline BaseClassifier fit_base(const ClassifierSpec& spec, const LabeledDataset& train) {
  switch (spec.kind) {
    case ClassifierKind::naive_bayes: return fit_naive_bayes(train);
    case ClassifierKind::cmvg: return fit_cmvg(train);
    case ClassifierKind::perceptron: {
      nn::TrainConfig cfg = spec.train;
      cfg.seed = derive_seed(spec.seed, 1);
      return fit_perceptron(train, cfg, spec.hidden);
    }
  }
  throw ConfigError("unknown classifier kind");
}

inline Classifier fit(const ClassifierSpec& spec, const LabeledDataset& train) {
  if (spec.rde_dims == 0) {
    return std::visit([](auto&& m) -> Classifier { return std::move(m); }, fit_base(spec, train));
  }
  RdeWrapper w;
  w.expansion = rde_matrix(spec.rde_dims, train.dims(), derive_seed(spec.seed, 2));
  LabeledDataset expanded;
  expanded.features = w.expand(train.features);
  expanded.labels = train.labels;
  w.inner = fit_base(spec, expanded);
  return w;
}

namespace detail {

inline Matrix row_posteriors(const auto& model, const Matrix& x) {
  Matrix out;
  const RowMatrix rows = x;
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    const Vector p = model.posterior(std::span<const double>(rows.row(r).data(), static_cast<std::size_t>(rows.cols())));
    if (r == 0) out.resize(x.rows(), p.size());
    out.row(r) = p.transpose();
  }
  return out;
}

template <typename T>
Matrix model_posteriors(const T& model, const Matrix& x) {
  if constexpr (std::is_same_v<T, PerceptronClassifier>) {
    return model.posteriors(x);
  } else {
    return row_posteriors(model, x);
  }
}

inline Matrix base_posteriors(const BaseClassifier& model, const Matrix& x) {
  return std::visit([&](const auto& m) { return model_posteriors(m, x); }, model);
}

}  // namespace detail

/// Posterior rows (n x K) for every input row.
inline Matrix posteriors(const Classifier& model, const Matrix& x) {
  return std::visit(
      [&](const auto& m) -> Matrix {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, RdeWrapper>) {
          return detail::base_posteriors(m.inner, m.expand(x));
        } else {
          return detail::model_posteriors(m, x);
        }
      },
      model);
}

/// Row-wise argmax of the posterior; ties go to the lowest class.
inline Labels predict(const Classifier& model, const Matrix& x) {
  if (x.rows() == 0) return {};
  const Matrix p = posteriors(model, x);
  Labels out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index r = 0; r < p.rows(); ++r) out[static_cast<std::size_t>(r)] = detail::argmax(p.row(r).transpose());
  return out;
}

struct Evaluation {
  double accuracy = 0.0;
  ConfusionMatrix confusion;  // column i normalized by the count of true class i
  Matrix counts;              // raw (assigned, true) counts
};

/// Accuracy and empirical confusion matrix of predictions against labels.
/// `classes` = 0 infers the class count.
inline Evaluation evaluate_predictions(std::span<const int> truth, std::span<const int> predicted, std::size_t classes = 0) {
  if (truth.empty()) throw InputError("test set is empty");
  if (truth.size() != predicted.size()) throw ShapeError("prediction count differs from label count");
  if (classes == 0) {
    for (int v : truth) classes = std::max(classes, static_cast<std::size_t>(v) + 1);
    for (int v : predicted) classes = std::max(classes, static_cast<std::size_t>(v) + 1);
  }
  Evaluation e;
  e.counts = Matrix::Zero(static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(classes));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || predicted[i] < 0 || static_cast<std::size_t>(truth[i]) >= classes ||
        static_cast<std::size_t>(predicted[i]) >= classes)
      throw DomainError("label outside the class range");
    e.counts(predicted[i], truth[i]) += 1.0;
    if (truth[i] == predicted[i]) ++correct;
  }
  e.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
  e.confusion.values = e.counts;
  for (Eigen::Index i = 0; i < e.counts.cols(); ++i) {
    const double n = e.counts.col(i).sum();
    if (n > 0.0) e.confusion.values.col(i) /= n;
  }
  return e;
}

inline std::size_t class_count(const Classifier& model) {
  return std::visit(
      [](const auto& m) -> std::size_t {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, RdeWrapper>) {
          return std::visit(
              [](const auto& b) -> std::size_t {
                using B = std::decay_t<decltype(b)>;
                if constexpr (std::is_same_v<B, NaiveBayesModel>) return b.classes;
                else if constexpr (std::is_same_v<B, CmvgModel>) return b.classes.size();
                else return b.classes();
              },
              m.inner);
        } else if constexpr (std::is_same_v<T, NaiveBayesModel>) {
          return m.classes;
        } else if constexpr (std::is_same_v<T, CmvgModel>) {
          return m.classes.size();
        } else {
          return m.classes();
        }
      },
      model);
}

inline Evaluation evaluate(const Classifier& model, const LabeledDataset& test) {
  if (test.rows() == 0) throw InputError("test set is empty");
  test.validate();
  const Labels predicted = predict(model, test.features);
  std::size_t k = class_count(model);
  k = std::max(k, test.class_count());
  return evaluate_predictions(test.labels, predicted, k);
}

/// Fits on the training part of `data` and evaluates on its test part.
inline Evaluation fit_evaluate(const ClassifierSpec& spec, const LabeledDataset& data) {
  if (!data.has_split()) throw ConfigError("dataset has no train/test split");
  return evaluate(fit(spec, data.train()), data.test());
}

/// RDE with expansion to `expanded_dims` around an inner classifier kind.
inline Evaluation rde_fit_predict(ClassifierSpec inner, const LabeledDataset& train, const LabeledDataset& test,
                                  std::size_t expanded_dims, std::uint64_t seed) {
  inner.rde_dims = expanded_dims;
  inner.seed = seed;
  if (expanded_dims <= train.dims()) throw ConfigError("RDE needs D2 > D");
  return evaluate(fit(inner, train), test);
}

}  // namespace alimit::clf

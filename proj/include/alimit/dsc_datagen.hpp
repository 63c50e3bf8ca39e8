#pragma once

// Two-class superstatistical data generator controlled by dimensionality D,
// separation S and correlation C. Every repetition draws its own class means
// and covariances, then samples Gaussian vectors from them.

#include "alimit/core.hpp"

#include <utility>

namespace alimit::dsc {

struct DscControl {
  std::size_t dims = 2;
  double separation = 0.0;
  double correlation = 0.0;
  std::size_t n_rep = 1;
  std::size_t n_vec = 10000;
  std::uint64_t seed = 0;

  void validate() const {
    if (dims < 1) throw ConfigError("D must be >= 1");
    if (!(separation >= 0.0)) throw ConfigError("S must be >= 0");
    if (!(correlation >= 0.0 && correlation <= 2.0)) throw ConfigError("C must lie in [0, 2]");
    if (n_vec == 0 || n_vec % 2 != 0) throw ConfigError("n_vec must be even and positive");
  }
};

struct ClassParams {
  Vector mu;
  Matrix sigma;
};

/// Off-diagonal covariance draw: uniform on [0, C] for C <= 1, on [C - 1, 1]
/// above.
inline double sample_offdiag(double c, Rng& rng) {
  if (!(c >= 0.0 && c <= 2.0)) throw DomainError("correlation quantity C must lie in [0, 2]");
  const double lo = c <= 1.0 ? 0.0 : c - 1.0;
  const double hi = c <= 1.0 ? c : 1.0;
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  return lo + (hi - lo) * u;
}

/// PSD matrix with the same eigenvectors and the absolute eigenvalues.
/// This is the covariance an SVD-based Gaussian sampler realizes for an
/// indefinite input. Inputs that are already PSD (up to round-off) are
/// returned unchanged.
inline Matrix repair_psd(const Matrix& sigma) {
  if (sigma.rows() != sigma.cols()) throw ShapeError("covariance must be square");
  Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
  const Vector& lambda = es.eigenvalues();
  const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
  if (lambda.minCoeff() >= -1e-12 * scale) return sigma;
  const Matrix& v = es.eigenvectors();
  Matrix repaired = v * lambda.cwiseAbs().asDiagonal() * v.transpose();
  return 0.5 * (repaired + repaired.transpose());
}

/// Class 0 is centred at the origin; class 1 has means uniform in [0, S].
/// Both covariances have unit diagonals and off-diagonals from
/// `sample_offdiag`.
inline std::pair<ClassParams, ClassParams> build_class_params(const DscControl& control, Rng& rng) {
  control.validate();
  const auto d = static_cast<Eigen::Index>(control.dims);
  std::uniform_real_distribution<double> mean_dist(0.0, 1.0);

  ClassParams p0, p1;
  p0.mu = Vector::Zero(d);
  p1.mu.resize(d);
  for (Eigen::Index f = 0; f < d; ++f) p1.mu(f) = control.separation * mean_dist(rng);

  for (ClassParams* p : {&p0, &p1}) {
    Matrix s = Matrix::Identity(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = i + 1; j < d; ++j) s(i, j) = s(j, i) = sample_offdiag(control.correlation, rng);
    p->sigma = repair_psd(s);
  }
  return {std::move(p0), std::move(p1)};
}

/// Factor L with L L^T = sigma via eigendecomposition; tolerates singular
/// covariances. Eigenvalues below 1e-12 of the largest are treated as zero.
inline Matrix covariance_factor(const Matrix& sigma) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
  Vector lambda = es.eigenvalues();
  const double cutoff = 1e-12 * std::max(0.0, lambda.maxCoeff());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) lambda(i) = lambda(i) > cutoff ? std::sqrt(lambda(i)) : 0.0;
  return es.eigenvectors() * lambda.asDiagonal();
}

/// n_vec / 2 Gaussian vectors per class, rows in random order.
inline LabeledDataset sample_dataset(const ClassParams& p0, const ClassParams& p1, std::size_t n_vec, Rng& rng) {
  const Eigen::Index d = p0.mu.size();
  if (p1.mu.size() != d || p0.sigma.rows() != d || p0.sigma.cols() != d || p1.sigma.rows() != d ||
      p1.sigma.cols() != d)
    throw ShapeError("class parameters disagree on dimensionality");
  if (n_vec == 0 || n_vec % 2 != 0) throw ConfigError("n_vec must be even and positive");

  const std::size_t per_class = n_vec / 2;
  std::normal_distribution<double> normal(0.0, 1.0);
  LabeledDataset data;
  data.features.resize(static_cast<Eigen::Index>(n_vec), d);
  data.labels.resize(n_vec);

  std::vector<std::size_t> order(n_vec);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  Vector z(d);
  std::size_t slot = 0;
  int label = 0;
  for (const ClassParams* p : {&p0, &p1}) {
    const Matrix factor = covariance_factor(p->sigma);
    for (std::size_t k = 0; k < per_class; ++k, ++slot) {
      for (Eigen::Index f = 0; f < d; ++f) z(f) = normal(rng);
      const auto row = static_cast<Eigen::Index>(order[slot]);
      data.features.row(row) = (p->mu + factor * z).transpose();
      data.labels[order[slot]] = label;
    }
    ++label;
  }
  return data;
}

/// Random train/test partition with round(n * fraction) training rows.
inline LabeledDataset split_dataset(LabeledDataset data, double train_fraction, Rng& rng) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw DomainError("train fraction must lie in (0, 1)");
  const std::size_t n = data.rows();
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  data.train_index.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  data.test_index.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return data;
}

/// RMS of the strictly upper-triangular entries.
inline double offdiag_rms(const Matrix& sigma) {
  if (sigma.rows() != sigma.cols()) throw ShapeError("matrix must be square");
  if (sigma.rows() < 2) throw DomainError("off-diagonal RMS needs D >= 2");
  double sum = 0.0;
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < sigma.rows(); ++i)
    for (Eigen::Index j = i + 1; j < sigma.cols(); ++j, ++count) sum += sigma(i, j) * sigma(i, j);
  return std::sqrt(sum / static_cast<double>(count));
}

/// Unbiased sample covariance of the rows of `x`.
inline Matrix sample_covariance(const Matrix& x) {
  if (x.rows() < 2) throw DomainError("sample covariance needs at least two rows");
  const Matrix centered = x.rowwise() - x.colwise().mean();
  return (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
}

/// Rows of `data` carrying `label`.
inline Matrix class_rows(const LabeledDataset& data, int label) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < data.labels.size(); ++i)
    if (data.labels[i] == label) idx.push_back(i);
  return data.subset(idx).features;
}

/// One generated repetition: its parameters and its split dataset.
struct Repetition {
  ClassParams class0;
  ClassParams class1;
  LabeledDataset data;
};

/// Repetition `rep` of a control setting. Each repetition owns a seed derived
/// from the master seed, so any subset can be regenerated independently.
inline Repetition generate_repetition(const DscControl& control, std::size_t rep, double train_fraction = 0.8) {
  control.validate();
  Rng rng(derive_seed(control.seed, rep));
  auto [p0, p1] = build_class_params(control, rng);
  LabeledDataset data = sample_dataset(p0, p1, control.n_vec, rng);
  data = split_dataset(std::move(data), train_fraction, rng);
  return {std::move(p0), std::move(p1), std::move(data)};
}

}  // namespace alimit::dsc

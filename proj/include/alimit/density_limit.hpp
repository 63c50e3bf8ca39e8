#pragma once

// Ideal (Bayes posterior argmax) classifier for known Gaussian generation
// densities, its confusion matrix by grid integration or Monte Carlo, and the
// resulting accuracy limit.

#include "alimit/core.hpp"
#include "alimit/dsc_datagen.hpp"

#include <numbers>

namespace alimit::limit {

/// Multivariate normal density with cached precision and log-normalizer.
class GaussianClassDensity {
 public:
  GaussianClassDensity(Vector mu, Matrix sigma) : mu_(std::move(mu)), sigma_(std::move(sigma)) {
    const Eigen::Index d = mu_.size();
    if (d < 1 || sigma_.rows() != d || sigma_.cols() != d) throw ShapeError("mean and covariance shapes disagree");
    if (!mu_.allFinite() || !sigma_.allFinite()) throw NumericError("non-finite density parameters");
    if ((sigma_ - sigma_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, sigma_.cwiseAbs().maxCoeff()))
      throw DomainError("covariance is not symmetric");

    Matrix work = sigma_;
    Eigen::SelfAdjointEigenSolver<Matrix> es(work);
    if (es.eigenvalues().minCoeff() <= 1e-12 * std::max(1.0, es.eigenvalues().maxCoeff())) {
      work += 1e-9 * Matrix::Identity(d, d);
      es.compute(work);
      ridge_ = true;
      if (es.eigenvalues().minCoeff() <= 0.0) throw NumericError("covariance is not positive semidefinite");
    }
    const Vector& lambda = es.eigenvalues();
    precision_ = es.eigenvectors() * lambda.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    precision_ = 0.5 * (precision_ + precision_.transpose());
    log_det_ = lambda.array().log().sum();
    log_norm_ = -0.5 * (static_cast<double>(d) * std::log(2.0 * std::numbers::pi) + log_det_);
    factor_ = dsc::covariance_factor(sigma_);
  }

  std::size_t dims() const { return static_cast<std::size_t>(mu_.size()); }
  const Vector& mean() const { return mu_; }
  const Matrix& covariance() const { return sigma_; }
  const Matrix& precision() const { return precision_; }
  double log_determinant() const { return log_det_; }
  /// True when a 1e-9 ridge was needed to invert the covariance.
  bool ridge_applied() const { return ridge_; }

  double log_pdf(std::span<const double> x) const {
    const auto d = mu_.size();
    double q = 0.0;
    // Small dimensions dominate; plain loops avoid temporaries.
    for (Eigen::Index i = 0; i < d; ++i) {
      const double di = x[static_cast<std::size_t>(i)] - mu_(i);
      double row = 0.0;
      for (Eigen::Index j = 0; j < d; ++j) row += precision_(i, j) * (x[static_cast<std::size_t>(j)] - mu_(j));
      q += di * row;
    }
    return log_norm_ - 0.5 * q;
  }

  double pdf(std::span<const double> x) const { return std::exp(log_pdf(x)); }

  /// n draws as rows.
  Matrix sample(std::size_t n, Rng& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix out(static_cast<Eigen::Index>(n), mu_.size());
    Vector z(mu_.size());
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      for (Eigen::Index f = 0; f < z.size(); ++f) z(f) = normal(rng);
      out.row(r) = (mu_ + factor_ * z).transpose();
    }
    return out;
  }

 private:
  Vector mu_;
  Matrix sigma_;
  Matrix precision_;
  Matrix factor_;
  double log_det_ = 0.0;
  double log_norm_ = 0.0;
  bool ridge_ = false;
};

/// K Gaussian classes with priors summing to one.
struct MixtureProblem {
  std::vector<GaussianClassDensity> classes;
  std::vector<double> priors;

  std::size_t class_count() const { return classes.size(); }
  std::size_t dims() const { return classes.empty() ? 0 : classes.front().dims(); }

  void validate() const {
    if (classes.size() < 2) throw ConfigError("a mixture problem needs at least two classes");
    if (priors.size() != classes.size()) throw ConfigError("one prior per class is required");
    double sum = 0.0;
    for (double p : priors) {
      if (!(p >= 0.0)) throw ConfigError("priors must be non-negative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("priors must sum to 1");
    for (const auto& c : classes)
      if (c.dims() != dims()) throw ShapeError("classes disagree on dimensionality");
  }

  static MixtureProblem with_uniform_priors(std::vector<GaussianClassDensity> classes) {
    MixtureProblem p;
    p.priors.assign(classes.size(), 1.0 / static_cast<double>(classes.size()));
    p.classes = std::move(classes);
    p.validate();
    return p;
  }
};

/// Two unit-variance isotropic classes centred at (-d/2, 0, ...) and (+d/2, 0, ...).
inline MixtureProblem spherical_pair(double distance, std::size_t dims = 2) {
  const auto d = static_cast<Eigen::Index>(dims);
  Vector m0 = Vector::Zero(d), m1 = Vector::Zero(d);
  m0(0) = -0.5 * distance;
  m1(0) = 0.5 * distance;
  return MixtureProblem::with_uniform_priors(
      {GaussianClassDensity(m0, Matrix::Identity(d, d)), GaussianClassDensity(m1, Matrix::Identity(d, d))});
}

/// Two 2D unit-variance classes at (0,0) and (d,0) whose features correlate
/// with coefficients rho0 and rho1.
inline MixtureProblem correlated_pair(double distance, double rho0, double rho1) {
  auto cov = [](double rho) {
    Matrix s(2, 2);
    s << 1.0, rho, rho, 1.0;
    return s;
  };
  Vector m0 = Vector::Zero(2), m1 = Vector::Zero(2);
  m1(0) = distance;
  return MixtureProblem::with_uniform_priors({GaussianClassDensity(m0, cov(rho0)), GaussianClassDensity(m1, cov(rho1))});
}

/// log(smallest positive double); densities below are treated as underflowed.
inline constexpr double kLogDensityFloor = -745.0;

/// Prior-weighted posterior over classes. When every density underflows the
/// posterior is uniform.
inline Vector posterior(const MixtureProblem& problem, std::span<const double> x) {
  if (x.size() != problem.dims()) throw ShapeError("point dimension does not match the problem");
  for (double v : x)
    if (std::isnan(v)) throw NumericError("NaN in input point");
  const std::size_t k = problem.class_count();
  Vector logw(static_cast<Eigen::Index>(k));
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < k; ++c) {
    const double lp = problem.classes[c].log_pdf(x);
    const double w = (problem.priors[c] > 0.0 && lp >= kLogDensityFloor) ? lp + std::log(problem.priors[c])
                                                                        : -std::numeric_limits<double>::infinity();
    logw(static_cast<Eigen::Index>(c)) = w;
    best = std::max(best, w);
  }
  if (best == -std::numeric_limits<double>::infinity())
    return Vector::Constant(static_cast<Eigen::Index>(k), 1.0 / static_cast<double>(k));
  Vector p = (logw.array() - best).exp();
  return p / p.sum();
}

inline Vector posterior(const MixtureProblem& problem, const Vector& x) {
  return posterior(problem, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

/// Argmax of the posterior; exact ties go to the lowest class index.
inline int ideal_class(const MixtureProblem& problem, std::span<const double> x) {
  const Vector p = posterior(problem, x);
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < p.size(); ++c)
    if (p(c) > p(best)) best = c;
  return static_cast<int>(best);
}

inline int ideal_class(const MixtureProblem& problem, const Vector& x) {
  return ideal_class(problem, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

/// Regular grid from `lower` to `upper` (both included) with `spacing` per axis.
struct GridSpec {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> spacing;

  static GridSpec cube(std::size_t dims, double lo, double hi, double step) {
    return {std::vector<double>(dims, lo), std::vector<double>(dims, hi), std::vector<double>(dims, step)};
  }

  std::size_t dims() const { return lower.size(); }

  std::size_t points_along(std::size_t axis) const {
    return static_cast<std::size_t>(std::llround((upper[axis] - lower[axis]) / spacing[axis])) + 1;
  }

  void validate() const {
    if (lower.empty() || lower.size() != upper.size() || lower.size() != spacing.size())
      throw ConfigError("grid bounds and spacing must have equal, non-zero length");
    if (lower.size() > 3) throw ConfigError("grid integration is limited to 3 dimensions; use Monte Carlo");
    for (std::size_t a = 0; a < lower.size(); ++a) {
      if (!(lower[a] < upper[a])) throw ConfigError("grid lower bound must be below the upper bound");
      if (!(spacing[a] > 0.0)) throw ConfigError("grid spacing must be positive");
    }
  }
};

/// Confusion matrix of the ideal classifier by Riemann summation of the
/// confusion density over the grid. Raw column masses must be within 1e-3 of
/// one before renormalization.
inline ConfusionMatrix confusion_grid(const MixtureProblem& problem, const GridSpec& grid) {
  problem.validate();
  grid.validate();
  const std::size_t dims = grid.dims();
  if (dims != problem.dims()) throw ShapeError("grid dimension does not match the problem");
  const std::size_t k = problem.class_count();

  double cell = 1.0;
  for (double s : grid.spacing) cell *= s;

  // Integrate line by line along the last axis, then reduce the line totals
  // pairwise in a fixed order.
  std::vector<std::size_t> counts(dims);
  for (std::size_t a = 0; a < dims; ++a) counts[a] = grid.points_along(a);
  std::size_t lines = 1;
  for (std::size_t a = 0; a + 1 < dims; ++a) lines *= counts[a];
  const std::size_t inner = counts[dims - 1];

  std::vector<std::vector<double>> line_mass(k * k, std::vector<double>(lines, 0.0));
  std::vector<double> x(dims);
  std::vector<double> dens(k);
  std::vector<double> acc(k * k);
  for (std::size_t line = 0; line < lines; ++line) {
    std::size_t rest = line;
    for (std::size_t a = dims - 1; a-- > 0;) {
      x[a] = grid.lower[a] + static_cast<double>(rest % counts[a]) * grid.spacing[a];
      rest /= counts[a];
    }
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t m = 0; m < inner; ++m) {
      x[dims - 1] = grid.lower[dims - 1] + static_cast<double>(m) * grid.spacing[dims - 1];
      double best = -std::numeric_limits<double>::infinity();
      std::size_t assigned = 0;
      for (std::size_t c = 0; c < k; ++c) {
        const double lp = problem.classes[c].log_pdf(x);
        dens[c] = std::exp(lp);
        const double w = (problem.priors[c] > 0.0 && lp >= kLogDensityFloor) ? lp + std::log(problem.priors[c])
                                                                            : -std::numeric_limits<double>::infinity();
        if (w > best) {
          best = w;
          assigned = c;
        }
      }
      for (std::size_t i = 0; i < k; ++i) acc[assigned * k + i] += dens[i];
    }
    for (std::size_t e = 0; e < k * k; ++e) line_mass[e][line] = acc[e] * cell;
  }

  ConfusionMatrix out;
  out.values.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t i = 0; i < k; ++i)
      out.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = pairwise_sum(line_mass[j * k + i]);
  for (Eigen::Index i = 0; i < out.values.cols(); ++i) {
    const double mass = out.values.col(i).sum();
    if (std::abs(mass - 1.0) > 1e-3)
      throw CoverageError("grid captures only " + std::to_string(mass) + " of the mass of class " + std::to_string(i));
    out.values.col(i) /= mass;
  }
  return out;
}

/// Per-class sample sizes, accuracy and its standard error alongside the matrix.
struct McConfusion {
  ConfusionMatrix confusion;
  std::vector<std::size_t> samples_per_class;
  double accuracy = 0.0;
  double accuracy_std_error = 0.0;
};

/// Confusion matrix of the ideal classifier estimated from n_samples / K draws
/// per class. Standard errors are binomial: sqrt(p (1 - p) / n).
inline McConfusion confusion_mc(const MixtureProblem& problem, std::size_t n_samples, Rng& rng) {
  problem.validate();
  if (n_samples < 1000) throw ConfigError("Monte Carlo estimation needs at least 1000 samples");
  const std::size_t k = problem.class_count();
  const std::size_t per_class = n_samples / k;

  McConfusion out;
  out.confusion.values = Matrix::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  out.confusion.std_error = Matrix::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  out.samples_per_class.assign(k, per_class);

  std::vector<double> x(problem.dims());
  constexpr std::size_t kChunk = 65536;
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<std::size_t> hits(k, 0);
    for (std::size_t start = 0; start < per_class; start += kChunk) {
      const std::size_t n = std::min(kChunk, per_class - start);
      const Matrix draws = problem.classes[i].sample(n, rng);
      for (Eigen::Index r = 0; r < draws.rows(); ++r) {
        for (std::size_t f = 0; f < x.size(); ++f) x[f] = draws(r, static_cast<Eigen::Index>(f));
        ++hits[static_cast<std::size_t>(ideal_class(problem, x))];
      }
    }
    for (std::size_t j = 0; j < k; ++j) {
      const double p = static_cast<double>(hits[j]) / static_cast<double>(per_class);
      out.confusion.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = p;
      out.confusion.std_error(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) =
          std::sqrt(p * (1.0 - p) / static_cast<double>(per_class));
    }
  }
  out.accuracy = out.confusion.values.diagonal().mean();
  double var = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double s = out.confusion.std_error(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
    var += s * s;
  }
  out.accuracy_std_error = std::sqrt(var) / static_cast<double>(k);
  return out;
}

/// Draws n_per_class labelled points per class, rows shuffled.
inline LabeledDataset sample_problem(const MixtureProblem& problem, std::size_t n_per_class, Rng& rng) {
  problem.validate();
  const std::size_t k = problem.class_count();
  LabeledDataset data;
  data.features.resize(static_cast<Eigen::Index>(n_per_class * k), static_cast<Eigen::Index>(problem.dims()));
  data.labels.resize(n_per_class * k);
  std::vector<std::size_t> order(n_per_class * k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t slot = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const Matrix draws = problem.classes[c].sample(n_per_class, rng);
    for (Eigen::Index r = 0; r < draws.rows(); ++r, ++slot) {
      data.features.row(static_cast<Eigen::Index>(order[slot])) = draws.row(r);
      data.labels[order[slot]] = static_cast<int>(c);
    }
  }
  return data;
}

}  // namespace alimit::limit

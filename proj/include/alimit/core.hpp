#pragma once

// Shared vocabulary types: matrices, labeled datasets, confusion matrices,
// the error hierarchy and seed derivation.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace alimit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Labels = std::vector<int>;
using Rng = std::mt19937_64;

inline constexpr const char* kVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Errors. The CLI maps these onto process exit codes.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

class CoverageError : public NumericError {
 public:
  using NumericError::NumericError;
};

class FormatError : public InputError {
 public:
  using InputError::InputError;
};

// ---------------------------------------------------------------------------
// Seeds

/// One step of the splitmix64 generator; advances `state`.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Independent child seed number `stream` of `master`. Children of the same
/// master never depend on evaluation order, so repetitions can run anywhere.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t state = master ^ (0xd1b54a32d192ed03ULL * (stream + 1));
  splitmix64(state);
  return splitmix64(state);
}

// ---------------------------------------------------------------------------
// Numerics helpers

/// Pairwise (cascade) summation. Fixed tree shape, so the result depends only
/// on the input order.
inline double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 16) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

inline bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// ---------------------------------------------------------------------------
// Labeled data

/// Feature rows with integer class labels and an optional train/test split.
/// Row i of `features` belongs to `labels[i]`.
struct LabeledDataset {
  Matrix features;  // n x D
  Labels labels;
  std::vector<std::size_t> train_index;
  std::vector<std::size_t> test_index;

  std::size_t rows() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t dims() const { return static_cast<std::size_t>(features.cols()); }
  bool has_split() const { return !train_index.empty() || !test_index.empty(); }

  /// Number of classes implied by the labels (largest label + 1).
  std::size_t class_count() const {
    if (labels.empty()) return 0;
    return static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;
  }

  void validate() const {
    if (static_cast<std::size_t>(features.rows()) != labels.size())
      throw ShapeError("dataset has " + std::to_string(features.rows()) + " rows but " +
                       std::to_string(labels.size()) + " labels");
    for (int l : labels)
      if (l < 0) throw DomainError("dataset labels must be non-negative");
    if (has_split()) {
      std::vector<char> seen(rows(), 0);
      for (auto idx : {&train_index, &test_index})
        for (std::size_t i : *idx) {
          if (i >= rows() || seen[i]) throw ShapeError("split is not a partition of the rows");
          seen[i] = 1;
        }
      if (train_index.size() + test_index.size() != rows())
        throw ShapeError("split is not a partition of the rows");
    }
  }

  /// Rows selected by `index`, in that order, without a split.
  LabeledDataset subset(std::span<const std::size_t> index) const {
    LabeledDataset out;
    out.features.resize(static_cast<Eigen::Index>(index.size()), features.cols());
    out.labels.reserve(index.size());
    for (std::size_t k = 0; k < index.size(); ++k) {
      out.features.row(static_cast<Eigen::Index>(k)) = features.row(static_cast<Eigen::Index>(index[k]));
      out.labels.push_back(labels[index[k]]);
    }
    return out;
  }

  LabeledDataset train() const { return subset(train_index); }
  LabeledDataset test() const { return subset(test_index); }
};

/// One-hot encoding of `labels` into an n x classes matrix.
inline Matrix one_hot(std::span<const int> labels, std::size_t classes) {
  Matrix t = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes)
      throw DomainError("label " + std::to_string(labels[i]) + " outside [0, " + std::to_string(classes) + ")");
    t(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return t;
}

// ---------------------------------------------------------------------------
// Confusion matrices

/// K x K matrix whose entry (j, i) is the probability that a point of true
/// class i is assigned class j. Columns sum to one.
struct ConfusionMatrix {
  Matrix values;
  Matrix std_error;  // empty unless estimated by sampling

  std::size_t classes() const { return static_cast<std::size_t>(values.cols()); }
};

/// Mean of the diagonal. Requires every column to sum to 1 within 1e-6.
inline double accuracy_from_confusion(const Matrix& c) {
  if (c.rows() != c.cols() || c.rows() == 0) throw ShapeError("confusion matrix must be square and non-empty");
  for (Eigen::Index i = 0; i < c.cols(); ++i) {
    const double s = c.col(i).sum();
    if (!(std::abs(s - 1.0) <= 1e-6))
      throw DomainError("confusion column " + std::to_string(i) + " sums to " + std::to_string(s));
  }
  return c.diagonal().mean();
}

inline double accuracy_from_confusion(const ConfusionMatrix& c) { return accuracy_from_confusion(c.values); }

}  // namespace alimit

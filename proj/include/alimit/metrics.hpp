#pragma once

// General Discrimination Value: z-scored, halved coordinates; mean
// intra-class distance minus mean inter-class distance, over sqrt(D).
// More negative means better separated classes.

#include "alimit/core.hpp"

#include <map>

namespace alimit::metrics {

inline constexpr std::size_t kGdvSubsampleThreshold = 10000;

namespace detail {

/// Population standard deviation below this (relative to the column mean)
/// counts as zero variance.
inline bool is_constant(double sigma, double mean) { return !(sigma > 1e-12 * std::max(1.0, std::abs(mean))); }

}  // namespace detail

/// Columns of `points` whose pooled variance is zero.
inline std::vector<std::size_t> constant_dims(const Matrix& points) {
  std::vector<std::size_t> out;
  const double n = static_cast<double>(points.rows());
  for (Eigen::Index d = 0; d < points.cols(); ++d) {
    const double mean = points.col(d).mean();
    const double sigma = std::sqrt((points.col(d).array() - mean).square().sum() / n);
    if (detail::is_constant(sigma, mean)) out.push_back(static_cast<std::size_t>(d));
  }
  return out;
}

/// `points` without its zero-variance columns.
inline Matrix drop_constant_dims(const Matrix& points) {
  const auto dropped = constant_dims(points);
  if (dropped.empty()) return points;
  Matrix out(points.rows(), points.cols() - static_cast<Eigen::Index>(dropped.size()));
  Eigen::Index next = 0;
  std::size_t skip = 0;
  for (Eigen::Index d = 0; d < points.cols(); ++d) {
    if (skip < dropped.size() && dropped[skip] == static_cast<std::size_t>(d)) {
      ++skip;
      continue;
    }
    out.col(next++) = points.col(d);
  }
  return out;
}

/// GDV of labelled points (rows). Labels may be any integers; at least two
/// classes with two points each are required, and no column may be constant.
inline double gdv(const Matrix& points, std::span<const int> labels) {
  const auto n = static_cast<std::size_t>(points.rows());
  const auto dims = static_cast<std::size_t>(points.cols());
  if (labels.size() != n) throw ShapeError("GDV: label count differs from point count");
  if (n < 2 || dims < 1) throw DomainError("GDV needs at least two points and one dimension");
  if (!points.allFinite()) throw NumericError("GDV: non-finite coordinates");

  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[labels[i]].push_back(i);
  if (groups.size() < 2) throw DomainError("GDV needs at least two classes");
  for (const auto& [label, members] : groups)
    if (members.size() < 2) throw DomainError("GDV: class " + std::to_string(label) + " has fewer than two points");

  // Dense class ids in label order.
  std::vector<std::size_t> cls(n);
  {
    std::size_t id = 0;
    for (const auto& [label, members] : groups) {
      for (std::size_t i : members) cls[i] = id;
      ++id;
    }
  }
  const std::size_t classes = groups.size();

  // Scaled coordinates s = 0.5 (x - mean) / sigma.
  RowMatrix s = points;
  for (Eigen::Index d = 0; d < s.cols(); ++d) {
    const double mean = s.col(d).mean();
    const double sigma = std::sqrt((s.col(d).array() - mean).square().sum() / static_cast<double>(n));
    if (detail::is_constant(sigma, mean))
      throw DomainError("GDV: dimension " + std::to_string(d) + " has zero variance");
    s.col(d) = (s.col(d).array() - mean) * (0.5 / sigma);
  }

  // Pairs are visited in input order and binned by unordered class pair, so
  // renaming the classes changes nothing but the bin names.
  std::vector<double> total(classes * classes, 0.0);
  std::vector<double> row_acc(classes);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    std::fill(row_acc.begin(), row_acc.end(), 0.0);
    const double* pi = s.row(static_cast<Eigen::Index>(i)).data();
    for (std::size_t j = i + 1; j < n; ++j) {
      const double* pj = s.row(static_cast<Eigen::Index>(j)).data();
      double sum = 0.0;
      for (std::size_t d = 0; d < dims; ++d) {
        const double t = pi[d] - pj[d];
        sum += t * t;
      }
      row_acc[cls[j]] += std::sqrt(sum);
    }
    for (std::size_t m = 0; m < classes; ++m) {
      const std::size_t lo = std::min(cls[i], m), hi = std::max(cls[i], m);
      total[lo * classes + hi] += row_acc[m];
    }
  }

  std::vector<double> count(classes);
  {
    std::size_t id = 0;
    for (const auto& [label, members] : groups) count[id++] = static_cast<double>(members.size());
  }
  double intra = 0.0;
  for (std::size_t l = 0; l < classes; ++l) intra += total[l * classes + l] / (count[l] * (count[l] - 1.0) / 2.0);
  intra /= static_cast<double>(classes);

  double inter = 0.0;
  for (std::size_t l = 0; l < classes; ++l)
    for (std::size_t m = l + 1; m < classes; ++m) inter += total[l * classes + m] / (count[l] * count[m]);
  inter /= static_cast<double>(classes * (classes - 1) / 2);

  return (intra - inter) / std::sqrt(static_cast<double>(dims));
}

/// GDV on at most `max_points` rows, chosen with a seeded permutation when
/// the input is larger.
inline double gdv_subsampled(const Matrix& points, std::span<const int> labels, std::uint64_t seed,
                             std::size_t max_points = kGdvSubsampleThreshold) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (n <= max_points) return gdv(points, labels);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(max_points);
  std::sort(order.begin(), order.end());
  Matrix sub(static_cast<Eigen::Index>(max_points), points.cols());
  Labels sub_labels(max_points);
  for (std::size_t k = 0; k < max_points; ++k) {
    sub.row(static_cast<Eigen::Index>(k)) = points.row(static_cast<Eigen::Index>(order[k]));
    sub_labels[k] = labels[order[k]];
  }
  return gdv(sub, sub_labels);
}

inline double gdv(const LabeledDataset& data) { return gdv(data.features, data.labels); }

struct GdvSweep {
  std::vector<double> values;
  double mean = 0.0;
  double stddev = 0.0;  // population
  double min = 0.0;
  double max = 0.0;
};

inline GdvSweep summarize(std::vector<double> values) {
  if (values.empty()) throw InputError("nothing to summarize");
  GdvSweep out;
  out.values = std::move(values);
  out.mean = pairwise_sum(out.values) / static_cast<double>(out.values.size());
  double var = 0.0;
  for (double v : out.values) var += (v - out.mean) * (v - out.mean);
  out.stddev = std::sqrt(var / static_cast<double>(out.values.size()));
  out.min = *std::min_element(out.values.begin(), out.values.end());
  out.max = *std::max_element(out.values.begin(), out.values.end());
  return out;
}

inline GdvSweep gdv_sweep(std::span<const LabeledDataset> datasets) {
  if (datasets.empty()) throw InputError("GDV sweep needs at least one dataset");
  std::vector<double> values;
  values.reserve(datasets.size());
  for (const auto& d : datasets) values.push_back(gdv(d.features, d.labels));
  return summarize(std::move(values));
}

}  // namespace alimit::metrics

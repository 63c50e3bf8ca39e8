#pragma once

// Classical MDS, epoch spectra, the 784-128-64-16 autoencoder and classifier
// head, per-layer GDV profiles and the MNIST IDX reader.

#include "alimit/core.hpp"
#include "alimit/features.hpp"
#include "alimit/metrics.hpp"
#include "alimit/neuralnet.hpp"

#include <unsupported/Eigen/FFT>
#include <zlib.h>

#include <array>
#include <complex>
#include <optional>

namespace alimit::embed {

// ---------------------------------------------------------------------------
// Classical MDS

inline constexpr std::size_t kMdsPointCap = 2000;

struct MdsResult {
  Matrix coords;                    // N x target_dim
  Vector eigenvalues;               // full Gram spectrum, descending
  std::vector<std::size_t> index;   // input rows that were embedded
  bool degenerate = false;          // Gram indefinite beyond tolerance, or fewer positive eigenvalues than requested
  double captured = 1.0;            // share of the positive spectrum in the kept eigenvalues
};

namespace detail {

inline MdsResult mds_from_squared(const Matrix& d2, std::size_t target_dim) {
  const Eigen::Index n = d2.rows();
  if (!d2.allFinite()) throw NumericError("MDS: non-finite distances");
  // B = -1/2 J D2 J with J = I - 11^T / n.
  const Vector row_mean = d2.rowwise().mean();
  const Vector col_mean = d2.colwise().mean().transpose();
  const double grand = d2.mean();
  Matrix b(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) b(i, j) = -0.5 * (d2(i, j) - row_mean(i) - col_mean(j) + grand);
  b = 0.5 * (b + b.transpose());

  Eigen::SelfAdjointEigenSolver<Matrix> es(b);
  if (es.info() != Eigen::Success) throw NumericError("MDS: eigensolver did not converge");
  MdsResult out;
  out.eigenvalues = es.eigenvalues().reverse();
  const Matrix vectors = es.eigenvectors().rowwise().reverse();

  const double scale = std::max(1.0, out.eigenvalues.cwiseAbs().maxCoeff());
  const double tol = 1e-9 * scale;
  const auto k = static_cast<Eigen::Index>(target_dim);
  for (Eigen::Index c = 0; c < k; ++c)
    if (out.eigenvalues(c) < -tol) throw NumericError("MDS: selected eigenvalue is negative");
  if (out.eigenvalues.minCoeff() < -tol) out.degenerate = true;

  out.coords.resize(n, k);
  double kept = 0.0, positive = 0.0;
  for (Eigen::Index c = 0; c < n; ++c)
    if (out.eigenvalues(c) > 0.0) positive += out.eigenvalues(c);
  for (Eigen::Index c = 0; c < k; ++c) {
    const double lambda = out.eigenvalues(c) > tol ? out.eigenvalues(c) : 0.0;
    if (lambda == 0.0 && positive > tol) out.degenerate = true;
    kept += lambda;
    out.coords.col(c) = vectors.col(c) * std::sqrt(lambda);
  }
  out.captured = positive > tol ? kept / positive : 1.0;
  return out;
}

inline void check_mds_shape(std::size_t n, std::size_t target_dim) {
  if (target_dim < 1) throw ConfigError("MDS target dimension must be >= 1");
  if (n < target_dim + 1) throw ShapeError("MDS needs at least target_dim + 1 points");
}

inline std::vector<std::size_t> subsample_index(std::size_t n, std::size_t cap, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (n <= cap) return order;
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(cap);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace detail

/// Embeds the rows of `points` in `target_dim` dimensions. Inputs above `cap`
/// rows are reduced to a seeded subsample first; `index` names the rows kept.
inline MdsResult classical_mds(const Matrix& points, std::size_t target_dim, std::uint64_t seed = 0,
                               std::size_t cap = kMdsPointCap) {
  if (!points.allFinite()) throw NumericError("MDS: non-finite coordinates");
  const auto index = detail::subsample_index(static_cast<std::size_t>(points.rows()), cap, seed);
  detail::check_mds_shape(index.size(), target_dim);
  Matrix x(static_cast<Eigen::Index>(index.size()), points.cols());
  for (std::size_t r = 0; r < index.size(); ++r) x.row(static_cast<Eigen::Index>(r)) = points.row(static_cast<Eigen::Index>(index[r]));

  const Vector sq = x.rowwise().squaredNorm();
  Matrix d2 = (-2.0 * x * x.transpose()).colwise() + sq;
  d2.rowwise() += sq.transpose();
  d2 = d2.cwiseMax(0.0);
  d2.diagonal().setZero();
  MdsResult out = detail::mds_from_squared(d2, target_dim);
  out.index = index;
  return out;
}

/// MDS from a symmetric matrix of pairwise distances.
inline MdsResult classical_mds_from_distances(const Matrix& distances, std::size_t target_dim) {
  if (distances.rows() != distances.cols()) throw ShapeError("distance matrix must be square");
  detail::check_mds_shape(static_cast<std::size_t>(distances.rows()), target_dim);
  MdsResult out = detail::mds_from_squared(distances.cwiseProduct(distances), target_dim);
  out.index.resize(static_cast<std::size_t>(distances.rows()));
  std::iota(out.index.begin(), out.index.end(), std::size_t{0});
  return out;
}

/// Euclidean distance matrix of the rows of `x`.
inline Matrix pairwise_distances(const Matrix& x) {
  const Eigen::Index n = x.rows();
  Matrix d(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) d(i, j) = (x.row(i) - x.row(j)).norm();
  return d;
}

// ---------------------------------------------------------------------------
// Spectra

inline constexpr std::size_t kSpectrumLength = 784;
inline constexpr std::size_t kSpectrumEpochLength = 7680;

/// Zero mean, unit population variance over one whole recording. Constant
/// recordings only lose their mean.
inline std::vector<features::Epoch> zscore_recording(std::vector<features::Epoch> epochs) {
  double sum = 0.0, count = 0.0;
  for (const auto& e : epochs)
    for (double v : e.samples) sum += v, count += 1.0;
  if (count == 0.0) return epochs;
  const double mean = sum / count;
  double var = 0.0;
  for (const auto& e : epochs)
    for (double v : e.samples) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / count);
  const double inv = sd > 0.0 ? 1.0 / sd : 1.0;
  for (auto& e : epochs)
    for (double& v : e.samples) v = (v - mean) * inv;
  return epochs;
}

/// Square-root FFT magnitudes of the first 784 bins of each epoch, scaled
/// jointly so the whole list spans [0, 1]. One row per epoch.
inline Matrix spectrum_preprocess(std::span<const features::Epoch> epochs) {
  Matrix out(static_cast<Eigen::Index>(epochs.size()), static_cast<Eigen::Index>(kSpectrumLength));
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> freq;
  for (std::size_t e = 0; e < epochs.size(); ++e) {
    const auto& s = epochs[e].samples;
    if (s.size() != kSpectrumEpochLength)
      throw ShapeError("spectrum needs epochs of " + std::to_string(kSpectrumEpochLength) + " samples, epoch " +
                       std::to_string(e) + " has " + std::to_string(s.size()));
    for (double v : s)
      if (!std::isfinite(v)) throw NumericError("non-finite sample in epoch " + std::to_string(e));
    fft.fwd(freq, s);
    for (std::size_t k = 0; k < kSpectrumLength; ++k)
      out(static_cast<Eigen::Index>(e), static_cast<Eigen::Index>(k)) = std::sqrt(std::abs(freq[k]));
  }
  if (out.size() == 0) return out;
  const double lo = out.minCoeff(), hi = out.maxCoeff();
  if (hi > lo)
    out = (out.array() - lo) / (hi - lo);
  else
    out.setZero();
  return out;
}

// ---------------------------------------------------------------------------
// Networks

struct AutoencoderSpec {
  std::size_t input_size = 784;
  std::vector<std::size_t> encoder{128, 64, 16};

  std::size_t bottleneck() const { return encoder.back(); }

  /// Encoder, then its mirror image back to `input_size`; relu throughout.
  std::vector<nn::LayerSpec> layers() const {
    if (encoder.empty()) throw ConfigError("autoencoder needs at least one encoder layer");
    std::vector<std::size_t> widths{input_size};
    widths.insert(widths.end(), encoder.begin(), encoder.end());
    for (std::size_t k = encoder.size() - 1; k-- > 0;) widths.push_back(encoder[k]);
    widths.push_back(input_size);
    std::vector<nn::LayerSpec> out;
    for (std::size_t k = 0; k + 1 < widths.size(); ++k) out.push_back({widths[k], widths[k + 1], nn::Activation::relu});
    return out;
  }
};

struct HeadSpec {
  std::size_t input_size = 784;
  std::vector<std::size_t> encoder{128, 64, 16};
  std::size_t classes = 10;

  std::vector<nn::LayerSpec> layers() const {
    if (classes < 2) throw ConfigError("classifier head needs at least two classes");
    std::vector<nn::LayerSpec> out;
    std::size_t width = input_size;
    for (std::size_t h : encoder) {
      out.push_back({width, h, nn::Activation::relu});
      width = h;
    }
    out.push_back({width, classes, nn::Activation::softmax});
    return out;
  }
};

namespace detail {

inline void check_unit_interval(const Matrix& data, std::size_t input_size) {
  if (static_cast<std::size_t>(data.cols()) != input_size)
    throw ShapeError("expected " + std::to_string(input_size) + " input columns, got " + std::to_string(data.cols()));
  if (data.rows() == 0) throw ShapeError("no training rows");
  if (!data.allFinite()) throw NumericError("non-finite training input");
  if (data.minCoeff() < 0.0 || data.maxCoeff() > 1.0) throw DomainError("inputs must be normalized to [0, 1]");
}

}  // namespace detail

/// Trains the autoencoder to reproduce its input under squared error.
inline nn::TrainResult train_autoencoder(const Matrix& data, const AutoencoderSpec& spec, nn::TrainConfig cfg) {
  detail::check_unit_interval(data, spec.input_size);
  cfg.loss = nn::Loss::mean_squared_error;
  const auto layers = spec.layers();
  return nn::train(nn::init_model(layers, cfg.seed), data, data, cfg);
}

inline nn::TrainResult train_head(const Matrix& data, std::span<const int> labels, const HeadSpec& spec,
                                  nn::TrainConfig cfg) {
  detail::check_unit_interval(data, spec.input_size);
  if (labels.size() != static_cast<std::size_t>(data.rows())) throw ShapeError("label count differs from row count");
  cfg.loss = nn::Loss::categorical_crossentropy;
  const auto layers = spec.layers();
  return nn::train(nn::init_model(layers, cfg.seed), data, one_hot(labels, spec.classes), cfg);
}

/// Mean squared reconstruction error per row (sum over columns).
inline double reconstruction_mse(const nn::MlpModel& model, const Matrix& data) {
  return nn::evaluate_loss(model, data, data, nn::Loss::mean_squared_error);
}

/// Same loss for the predictor that always outputs `mean`.
inline double mean_predictor_mse(const Vector& mean, const Matrix& data) {
  return (data.rowwise() - mean.transpose()).rowwise().squaredNorm().mean();
}

// ---------------------------------------------------------------------------
// Layer profiles

struct LayerGdv {
  std::size_t layer = 0;     // 0 = input
  std::size_t width = 0;     // units in the layer
  std::size_t dropped = 0;   // constant units left out of the GDV
  double gdv = 0.0;
  std::optional<MdsResult> mds;
};

struct ProfileOptions {
  std::size_t layers = 4;        // L0..L(layers-1)
  std::size_t mds_dim = 0;       // 0 skips the projection
  std::size_t mds_cap = kMdsPointCap;
  std::uint64_t seed = 0;
};

/// GDV of the evaluation set at the input (L0) and after each of the first
/// hidden layers. Units that are constant over the set (blank pixels, dead
/// relus) carry no class information and are left out.
inline std::vector<LayerGdv> layer_gdv_profile(const nn::MlpModel& model, const Matrix& data,
                                               std::span<const int> labels, const ProfileOptions& opt = {}) {
  if (labels.size() != static_cast<std::size_t>(data.rows())) throw ShapeError("label count differs from row count");
  if (opt.layers < 1 || opt.layers > model.layer_count() + 1)
    throw ConfigError("profile asks for more layers than the model has");
  const auto acts = nn::forward(model, data);
  std::vector<LayerGdv> out;
  for (std::size_t l = 0; l < opt.layers; ++l) {
    LayerGdv row;
    row.layer = l;
    row.width = static_cast<std::size_t>(acts[l].cols());
    const Matrix kept = metrics::drop_constant_dims(acts[l]);
    row.dropped = row.width - static_cast<std::size_t>(kept.cols());
    if (kept.cols() == 0) throw DomainError("layer " + std::to_string(l) + " is constant over the evaluation set");
    row.gdv = metrics::gdv_subsampled(kept, labels, derive_seed(opt.seed, l));
    if (opt.mds_dim > 0) row.mds = classical_mds(acts[l], opt.mds_dim, derive_seed(opt.seed, 100 + l), opt.mds_cap);
    out.push_back(std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------------------
// IDX files

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

namespace detail {

/// Whole file, transparently gunzipped.
inline std::vector<unsigned char> read_maybe_gzip(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw InputError("cannot open " + path);
  std::vector<unsigned char> bytes;
  std::array<unsigned char, 1 << 16> buf{};
  for (;;) {
    const int got = gzread(f, buf.data(), static_cast<unsigned>(buf.size()));
    if (got < 0) {
      gzclose(f);
      throw FormatError(path + ": corrupt compressed stream");
    }
    if (got == 0) break;
    bytes.insert(bytes.end(), buf.begin(), buf.begin() + got);
  }
  gzclose(f);
  return bytes;
}

inline std::uint32_t big_endian_u32(const std::vector<unsigned char>& b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
         std::uint32_t{b[at + 3]};
}

}  // namespace detail

/// Images as rows of pixel values divided by 255.
inline Matrix load_idx_images(const std::string& path, std::size_t limit = 0) {
  const auto b = detail::read_maybe_gzip(path);
  if (b.size() < 16) throw FormatError(path + ": truncated IDX header");
  const auto magic = detail::big_endian_u32(b, 0);
  if (magic != kIdxImageMagic) throw FormatError(path + ": bad IDX image magic number");
  const std::size_t count = detail::big_endian_u32(b, 4);
  const std::size_t pixels = std::size_t{detail::big_endian_u32(b, 8)} * detail::big_endian_u32(b, 12);
  if (b.size() < 16 + count * pixels) throw FormatError(path + ": truncated IDX image data");
  const std::size_t n = limit > 0 ? std::min(limit, count) : count;
  Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(pixels));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < pixels; ++c)
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = b[16 + r * pixels + c] / 255.0;
  return out;
}

inline Labels load_idx_labels(const std::string& path, std::size_t limit = 0) {
  const auto b = detail::read_maybe_gzip(path);
  if (b.size() < 8) throw FormatError(path + ": truncated IDX header");
  if (detail::big_endian_u32(b, 0) != kIdxLabelMagic) throw FormatError(path + ": bad IDX label magic number");
  const std::size_t count = detail::big_endian_u32(b, 4);
  if (b.size() < 8 + count) throw FormatError(path + ": truncated IDX label data");
  const std::size_t n = limit > 0 ? std::min(limit, count) : count;
  Labels out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = b[8 + i];
  return out;
}

/// Image and label files together; their counts must agree.
inline LabeledDataset load_idx_dataset(const std::string& images, const std::string& labels, std::size_t limit = 0) {
  LabeledDataset data;
  data.features = load_idx_images(images, limit);
  data.labels = load_idx_labels(labels, limit);
  if (data.labels.size() != static_cast<std::size_t>(data.features.rows()))
    throw FormatError("IDX image and label counts differ");
  return data;
}

}  // namespace alimit::embed

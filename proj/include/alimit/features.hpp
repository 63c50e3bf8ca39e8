#pragma once

// Element-wise feature transforms, Fourier and autocorrelation features of
// fixed-length signal epochs, and a synthetic epoch generator.

#include "alimit/core.hpp"

#include <array>
#include <charconv>
#include <numbers>
#include <optional>
#include <string_view>

namespace alimit::features {

// ---------------------------------------------------------------------------
// Transforms

enum class TransformKind { identity, sine, cosine, signum };

inline std::string_view to_string(TransformKind t) {
  switch (t) {
    case TransformKind::identity: return "identity";
    case TransformKind::sine: return "sine";
    case TransformKind::cosine: return "cosine";
    case TransformKind::signum: return "signum";
  }
  return "?";
}

inline TransformKind parse_transform(std::string_view s) {
  if (s == "identity" || s == "none") return TransformKind::identity;
  if (s == "sine" || s == "sin") return TransformKind::sine;
  if (s == "cosine" || s == "cos") return TransformKind::cosine;
  if (s == "signum" || s == "sgn" || s == "sign") return TransformKind::signum;
  throw ConfigError("unknown transform '" + std::string(s) + "'");
}

/// -1 for negative arguments, +1 otherwise (zero maps to +1).
inline double signum(double x) { return x < 0.0 ? -1.0 : 1.0; }

inline double apply(TransformKind t, double x) {
  switch (t) {
    case TransformKind::identity: return x;
    case TransformKind::sine: return std::sin(x);
    case TransformKind::cosine: return std::cos(x);
    case TransformKind::signum: return signum(x);
  }
  return x;
}

/// Applies `t` to every feature of every row; labels and split carry over.
inline LabeledDataset apply_transform(TransformKind t, LabeledDataset data) {
  if (t == TransformKind::identity) return data;
  data.features = data.features.unaryExpr([t](double x) { return apply(t, x); });
  return data;
}

// ---------------------------------------------------------------------------
// Epochs

inline constexpr double kDefaultSampleRate = 256.0;
inline constexpr std::size_t kDefaultEpochLength = 7680;  // 30 s at 256 Hz

enum class SleepStage { wake = 0, rem = 1, n1 = 2, n2 = 3, n3 = 4 };

inline constexpr std::array<std::string_view, 5> kStageNames{"Wake", "REM", "N1", "N2", "N3"};

/// Stage label from either a stage name or an integer.
inline int parse_stage_label(std::string_view s) {
  for (std::size_t i = 0; i < kStageNames.size(); ++i)
    if (s == kStageNames[i]) return static_cast<int>(i);
  int v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || v < 0) throw FormatError("unrecognized epoch label '" + std::string(s) + "'");
  return v;
}

struct Epoch {
  std::vector<double> samples;
  double sample_rate = kDefaultSampleRate;
  std::optional<int> label;

  std::size_t size() const { return samples.size(); }
};

enum class FeatureKind { fourier, autocorrelation };

inline std::string_view to_string(FeatureKind k) { return k == FeatureKind::fourier ? "fourier" : "autocorrelation"; }

inline FeatureKind parse_feature_kind(std::string_view s) {
  if (s == "fourier") return FeatureKind::fourier;
  if (s == "autocorrelation" || s == "correlation" || s == "autocorr") return FeatureKind::autocorrelation;
  throw ConfigError("unknown feature kind '" + std::string(s) + "'");
}

struct FeatureSpec {
  FeatureKind kind = FeatureKind::fourier;
  std::vector<double> frequencies;  // Hz, fourier only
  std::vector<std::size_t> lags;    // samples, autocorrelation only

  /// 5, 10, ..., 30 Hz.
  static FeatureSpec default_fourier() { return {FeatureKind::fourier, {5, 10, 15, 20, 25, 30}, {}}; }
  /// Lags 1, 3, ..., 11 samples.
  static FeatureSpec default_autocorrelation() { return {FeatureKind::autocorrelation, {}, {1, 3, 5, 7, 9, 11}}; }

  std::size_t dims() const { return kind == FeatureKind::fourier ? frequencies.size() : lags.size(); }

  void validate(std::size_t epoch_length, double sample_rate) const {
    if (dims() == 0) throw ConfigError("feature spec selects no features");
    if (kind == FeatureKind::fourier) {
      for (double f : frequencies)
        if (!(f > 0.0 && f <= sample_rate / 2.0))
          throw ConfigError("frequency " + std::to_string(f) + " Hz outside (0, Nyquist]");
    } else {
      for (std::size_t lag : lags)
        if (lag < 1 || lag >= epoch_length) throw ConfigError("lag " + std::to_string(lag) + " outside [1, N)");
    }
  }
};

/// Magnitude of sum_n x_n exp(-i 2 pi nu t_n) with t_n = n / rate, n = 1..N.
inline double fourier_feature(const Epoch& epoch, double freq) {
  if (!(freq > 0.0 && freq <= epoch.sample_rate / 2.0))
    throw DomainError("frequency " + std::to_string(freq) + " Hz outside (0, Nyquist]");
  // Reduce nu * n / rate to a fraction of a cycle before taking cos/sin so the
  // phase stays accurate for long epochs.
  double re = 0.0, im = 0.0;
  for (std::size_t k = 0; k < epoch.samples.size(); ++k) {
    const double n = static_cast<double>(k + 1);
    const double cycles = std::fmod(freq * n, epoch.sample_rate) / epoch.sample_rate;
    const double phase = 2.0 * std::numbers::pi * cycles;
    re += epoch.samples[k] * std::cos(phase);
    im += epoch.samples[k] * std::sin(phase);
  }
  return std::hypot(re, im);
}

namespace detail {

/// Sum over valid t of (x_t - mean)(x_{t+lag} - mean), divided by N sigma^2.
/// Lag 0 gives exactly 1.
inline double autocorrelation(std::span<const double> x, std::size_t lag) {
  const std::size_t n = x.size();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  if (!(var > 0.0)) throw DomainError("epoch is constant; autocorrelation undefined");
  if (lag == 0) return 1.0;
  double acc = 0.0;
  for (std::size_t t = 0; t + lag < n; ++t) acc += (x[t] - mean) * (x[t + lag] - mean);
  return acc / var;
}

}  // namespace detail

/// Normalized autocorrelation at `lag` samples. Averages run over the whole
/// epoch, which bounds the value to [-1, 1].
inline double autocorr_feature(const Epoch& epoch, std::size_t lag) {
  if (lag < 1 || lag >= epoch.samples.size()) throw DomainError("lag must lie in [1, N)");
  return detail::autocorrelation(epoch.samples, lag);
}

struct EpochFailure {
  std::size_t index = 0;
  std::string message;
};

/// Feature rows for the epochs that could be processed, in input order.
/// Epochs that fail are reported by index and skipped. Unlabelled epochs get
/// label -1, which the classifiers reject.
struct FeatureExtraction {
  LabeledDataset data;
  std::vector<std::size_t> source_index;  // epoch index of each row
  std::vector<EpochFailure> failures;
};

inline FeatureExtraction extract_features(std::span<const Epoch> epochs, const FeatureSpec& spec) {
  if (spec.dims() == 0) throw ConfigError("feature spec selects no features");
  FeatureExtraction out;
  std::vector<Vector> rows;
  for (std::size_t e = 0; e < epochs.size(); ++e) {
    const Epoch& ep = epochs[e];
    try {
      spec.validate(ep.size(), ep.sample_rate);
      for (double v : ep.samples)
        if (!std::isfinite(v)) throw NumericError("non-finite sample");
      Vector row(static_cast<Eigen::Index>(spec.dims()));
      for (std::size_t f = 0; f < spec.dims(); ++f)
        row(static_cast<Eigen::Index>(f)) = spec.kind == FeatureKind::fourier ? fourier_feature(ep, spec.frequencies[f])
                                                                              : autocorr_feature(ep, spec.lags[f]);
      rows.push_back(std::move(row));
      out.data.labels.push_back(ep.label.value_or(-1));
      out.source_index.push_back(e);
    } catch (const Error& err) {
      out.failures.push_back({e, err.what()});
    }
  }
  out.data.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(spec.dims()));
  for (std::size_t r = 0; r < rows.size(); ++r) out.data.features.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic epochs

struct SpectralComponent {
  double frequency = 10.0;  // Hz
  double amplitude = 1.0;
};

/// Per-class signal recipe: sinusoids with random phase and jittered
/// amplitude on top of low-pass filtered Gaussian noise.
struct StageProfile {
  int label = 0;
  std::vector<SpectralComponent> components;
  double noise_std = 1.0;
  double noise_cutoff_hz = 30.0;
  double amplitude_jitter = 0.1;  // relative standard deviation
};

/// `n_per_class` epochs per profile, grouped by profile in input order.
inline std::vector<Epoch> synth_epochs(std::span<const StageProfile> profiles, std::size_t n_per_class,
                                       std::uint64_t seed, std::size_t length = kDefaultEpochLength,
                                       double sample_rate = kDefaultSampleRate) {
  if (profiles.size() < 2) throw ConfigError("synthetic epochs need at least two profiles");
  if (length < 2) throw ConfigError("epoch length must be at least 2");
  std::vector<Epoch> out;
  out.reserve(profiles.size() * n_per_class);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t p = 0; p < profiles.size(); ++p) {
    const StageProfile& prof = profiles[p];
    if (!(prof.noise_cutoff_hz > 0.0)) throw ConfigError("noise cutoff must be positive");
    // One-pole low-pass; scaled so the stationary output has std noise_std.
    const double alpha = 1.0 - std::exp(-2.0 * std::numbers::pi * prof.noise_cutoff_hz / sample_rate);
    const double gain = std::sqrt((2.0 - alpha) / alpha) * prof.noise_std;
    for (std::size_t e = 0; e < n_per_class; ++e) {
      Rng rng(derive_seed(seed, p * 1000003ULL + e));
      Epoch ep;
      ep.sample_rate = sample_rate;
      ep.label = prof.label;
      ep.samples.resize(length);
      double y = normal(rng) * std::sqrt(alpha / (2.0 - alpha));
      for (std::size_t n = 0; n < length; ++n) {
        y += alpha * (normal(rng) - y);
        ep.samples[n] = gain * y;
      }
      for (const auto& c : prof.components) {
        const double amp = c.amplitude * (1.0 + prof.amplitude_jitter * normal(rng));
        const double phase = 2.0 * std::numbers::pi * unit(rng);
        for (std::size_t n = 0; n < length; ++n) {
          const double t = static_cast<double>(n + 1) / sample_rate;
          ep.samples[n] += amp * std::sin(2.0 * std::numbers::pi * c.frequency * t + phase);
        }
      }
      out.push_back(std::move(ep));
    }
  }
  return out;
}

}  // namespace alimit::features

#pragma once

// Experiment drivers behind the command-line subcommands: accuracy limits
// against trained classifiers, DSC sweeps, input transforms, epoch staging,
// layer-wise embeddings and GDV tables. Results are plain rows; rendering is
// left to the caller.

#include "alimit/classifiers.hpp"
#include "alimit/density_limit.hpp"
#include "alimit/dsc_datagen.hpp"
#include "alimit/embeddings.hpp"
#include "alimit/features.hpp"
#include "alimit/metrics.hpp"

#include <atomic>
#include <bit>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

namespace alimit::exp {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Runs body(i) for i in [0, n) on `threads` workers. Results must go to
/// per-index slots; the first exception is rethrown after all workers stop.
template <typename F>
void parallel_for(std::size_t n, std::size_t threads, F&& body) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Seed stream keyed by the bit patterns of a few doubles, so a cell keeps its
/// seed whatever else is in the sweep.
inline std::uint64_t cell_seed(std::uint64_t master, std::initializer_list<double> key) {
  std::uint64_t s = master;
  for (double v : key) s = derive_seed(s, std::bit_cast<std::uint64_t>(v == 0.0 ? 0.0 : v));
  return s;
}

struct Summary {
  double mean = kNaN;
  double stddev = kNaN;  // population
  std::size_t ok = 0;
  std::size_t failed = 0;
};

inline Summary summarize(std::span<const double> values) {
  Summary s;
  std::vector<double> good;
  for (double v : values) (std::isnan(v) ? s.failed : s.ok) += 1;
  for (double v : values)
    if (!std::isnan(v)) good.push_back(v);
  if (good.empty()) return s;
  s.mean = pairwise_sum(good) / static_cast<double>(good.size());
  double var = 0.0;
  for (double v : good) var += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(good.size()));
  return s;
}

// ---------------------------------------------------------------------------
// Named classifiers

/// Settings shared by every classifier a driver trains.
struct ClassifierOptions {
  std::size_t hidden = clf::kDefaultHiddenUnits;
  nn::TrainConfig train;
  std::size_t rde_dims = 20;  // used by the `nb_rde` name
};

inline const std::vector<std::string>& classifier_names() {
  static const std::vector<std::string> names{"perceptron", "naive_bayes", "nb_rde", "cmvg"};
  return names;
}

inline clf::ClassifierSpec named_spec(const std::string& name, const ClassifierOptions& opt, std::uint64_t seed) {
  clf::ClassifierSpec spec;
  spec.hidden = opt.hidden;
  spec.train = opt.train;
  spec.seed = seed;
  if (name == "nb_rde") {
    spec.kind = clf::ClassifierKind::naive_bayes;
    spec.rde_dims = opt.rde_dims;
  } else {
    spec.kind = clf::parse_classifier_kind(name);
  }
  return spec;
}

inline void check_classifier_names(std::span<const std::string> names) {
  if (names.empty()) throw ConfigError("at least one classifier is required");
  for (const auto& n : names)
    if (std::find(classifier_names().begin(), classifier_names().end(), n) == classifier_names().end())
      throw ConfigError("unknown classifier '" + n + "' (expected perceptron, naive_bayes, nb_rde or cmvg)");
}

/// Test accuracy of a named classifier on a split dataset.
inline double named_accuracy(const std::string& name, const LabeledDataset& data, const ClassifierOptions& opt,
                             std::uint64_t seed) {
  return clf::fit_evaluate(named_spec(name, opt, seed), data).accuracy;
}

/// Random split with `train_fraction` of the rows in the training part.
inline LabeledDataset random_split(LabeledDataset data, double train_fraction, std::uint64_t seed) {
  Rng rng(seed);
  return dsc::split_dataset(std::move(data), train_fraction, rng);
}

// ---------------------------------------------------------------------------
// Accuracy limit against classifiers

enum class LimitMethod { grid, mc };

struct LimitConfig {
  std::string problem = "spherical";  // spherical | correlated
  double rho0 = 0.75;                 // correlated only
  double rho1 = -0.75;
  std::vector<double> distances{0, 0.5, 1, 1.5, 2, 2.5, 3, 3.5, 4, 4.5, 5};
  LimitMethod method = LimitMethod::grid;
  double grid_spacing = 0.02;
  double grid_margin = 8.0;  // grid extends this far beyond the class means
  std::size_t mc_samples = 100000;
  std::vector<std::string> classifiers = classifier_names();
  std::size_t n_rep = 5;
  std::size_t n_per_class = 5000;
  double train_fraction = 0.8;
  ClassifierOptions options;
  std::uint64_t seed = 0;
};

struct LimitRow {
  double d = 0.0;
  double a_max = kNaN;
  double a_max_stderr = kNaN;  // Monte Carlo only
  std::map<std::string, Summary> classifiers;
};

inline limit::MixtureProblem make_limit_problem(const LimitConfig& cfg, double d) {
  if (cfg.problem == "spherical") return limit::spherical_pair(d);
  if (cfg.problem == "correlated") return limit::correlated_pair(d, cfg.rho0, cfg.rho1);
  throw ConfigError("unknown limit problem '" + cfg.problem + "' (expected spherical or correlated)");
}

/// Grid covering every class mean with `margin` to spare on each axis.
inline limit::GridSpec covering_grid(const limit::MixtureProblem& p, double margin, double spacing) {
  limit::GridSpec g;
  for (std::size_t a = 0; a < p.dims(); ++a) {
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& c : p.classes) {
      lo = std::min(lo, c.mean()(static_cast<Eigen::Index>(a)));
      hi = std::max(hi, c.mean()(static_cast<Eigen::Index>(a)));
    }
    g.lower.push_back(std::floor((lo - margin) / spacing) * spacing);
    g.upper.push_back(std::ceil((hi + margin) / spacing) * spacing);
    g.spacing.push_back(spacing);
  }
  return g;
}

inline std::vector<LimitRow> run_limit(const LimitConfig& cfg, std::size_t threads = 1) {
  if (cfg.distances.empty()) throw ConfigError("limit needs at least one distance");
  if (cfg.n_rep < 1 && !cfg.classifiers.empty()) throw ConfigError("n_rep must be >= 1");
  if (!cfg.classifiers.empty()) check_classifier_names(cfg.classifiers);
  std::vector<LimitRow> rows(cfg.distances.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double d = cfg.distances[i];
    const auto problem = make_limit_problem(cfg, d);
    rows[i].d = d;
    if (cfg.method == LimitMethod::grid) {
      rows[i].a_max =
          accuracy_from_confusion(limit::confusion_grid(problem, covering_grid(problem, cfg.grid_margin, cfg.grid_spacing)));
    } else {
      Rng rng(cell_seed(cfg.seed, {d, -1.0}));
      const auto mc = limit::confusion_mc(problem, cfg.mc_samples, rng);
      rows[i].a_max = mc.accuracy;
      rows[i].a_max_stderr = mc.accuracy_std_error;
    }
  }
  if (cfg.classifiers.empty()) return rows;

  // One task per (distance, repetition); every classifier sees the same split.
  const std::size_t k = cfg.classifiers.size();
  std::vector<double> acc(rows.size() * cfg.n_rep * k, kNaN);
  parallel_for(rows.size() * cfg.n_rep, threads, [&](std::size_t task) {
    const std::size_t i = task / cfg.n_rep, rep = task % cfg.n_rep;
    const std::uint64_t seed = derive_seed(cell_seed(cfg.seed, {cfg.distances[i]}), rep);
    Rng rng(seed);
    auto data = limit::sample_problem(make_limit_problem(cfg, cfg.distances[i]), cfg.n_per_class, rng);
    data = dsc::split_dataset(std::move(data), cfg.train_fraction, rng);
    for (std::size_t c = 0; c < k; ++c) {
      try {
        acc[task * k + c] = named_accuracy(cfg.classifiers[c], data, cfg.options, derive_seed(seed, 100 + c));
      } catch (const FitError&) {
      }
    }
  });
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<double> v;
      for (std::size_t rep = 0; rep < cfg.n_rep; ++rep) v.push_back(acc[(i * cfg.n_rep + rep) * k + c]);
      rows[i].classifiers[cfg.classifiers[c]] = summarize(v);
    }
  return rows;
}

// ---------------------------------------------------------------------------
// DSC sweeps

struct SweepConfig {
  std::vector<std::size_t> dims{5};
  std::vector<double> separations{0.0, 0.5, 1.0, 2.0};
  std::vector<double> correlations{0.0};
  std::size_t n_rep = 20;
  std::size_t n_vec = 10000;
  double train_fraction = 0.8;
  std::vector<std::string> classifiers{"perceptron", "naive_bayes", "cmvg"};
  ClassifierOptions options;
  std::uint64_t seed = 0;
};

struct SweepRecord {
  std::size_t dims = 0;
  double separation = 0.0;
  double correlation = 0.0;
  std::size_t rep = 0;
  std::string classifier;
  double accuracy = kNaN;  // NaN when the repetition failed
  std::string error;
};

struct SweepCell {
  std::size_t dims = 0;
  double separation = 0.0;
  double correlation = 0.0;
  std::string classifier;
  Summary summary;
};

inline dsc::DscControl sweep_control(const SweepConfig& cfg, std::size_t d, double s, double c) {
  dsc::DscControl ctl;
  ctl.dims = d;
  ctl.separation = s;
  ctl.correlation = c;
  ctl.n_rep = cfg.n_rep;
  ctl.n_vec = cfg.n_vec;
  ctl.seed = cell_seed(cfg.seed, {static_cast<double>(d), s, c});
  return ctl;
}

/// Long-format records ordered by D, S, C, repetition, classifier.
inline std::vector<SweepRecord> run_sweep(const SweepConfig& cfg, std::size_t threads = 1) {
  check_classifier_names(cfg.classifiers);
  if (cfg.n_rep < 1) throw ConfigError("n_rep must be >= 1");
  if (cfg.dims.empty() || cfg.separations.empty() || cfg.correlations.empty())
    throw ConfigError("sweep lists for D, S and C must be non-empty");
  std::vector<dsc::DscControl> cells;
  for (std::size_t d : cfg.dims)
    for (double s : cfg.separations)
      for (double c : cfg.correlations) {
        cells.push_back(sweep_control(cfg, d, s, c));
        cells.back().validate();
      }
  const std::size_t k = cfg.classifiers.size();
  std::vector<SweepRecord> out(cells.size() * cfg.n_rep * k);
  parallel_for(cells.size() * cfg.n_rep, threads, [&](std::size_t task) {
    const auto& ctl = cells[task / cfg.n_rep];
    const std::size_t rep = task % cfg.n_rep;
    auto fill = [&](std::size_t c) -> SweepRecord& {
      SweepRecord& r = out[task * k + c];
      r.dims = ctl.dims;
      r.separation = ctl.separation;
      r.correlation = ctl.correlation;
      r.rep = rep;
      r.classifier = cfg.classifiers[c];
      return r;
    };
    std::optional<dsc::Repetition> data;
    try {
      data = dsc::generate_repetition(ctl, rep, cfg.train_fraction);
    } catch (const Error& e) {
      for (std::size_t c = 0; c < k; ++c) fill(c).error = e.what();
      return;
    }
    const std::uint64_t seed = derive_seed(ctl.seed, rep);
    for (std::size_t c = 0; c < k; ++c) {
      SweepRecord& r = fill(c);
      try {
        r.accuracy = named_accuracy(r.classifier, data->data, cfg.options, derive_seed(seed, 100 + c));
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& e) {
        r.error = e.what();
      }
    }
  });
  return out;
}

inline std::vector<SweepCell> summarize_sweep(std::span<const SweepRecord> records) {
  std::vector<SweepCell> cells;
  std::map<std::tuple<std::size_t, double, double, std::string>, std::size_t> where;
  std::vector<std::vector<double>> values;
  for (const auto& r : records) {
    const auto key = std::make_tuple(r.dims, r.separation, r.correlation, r.classifier);
    auto it = where.find(key);
    if (it == where.end()) {
      it = where.emplace(key, cells.size()).first;
      cells.push_back({r.dims, r.separation, r.correlation, r.classifier, {}});
      values.emplace_back();
    }
    values[it->second].push_back(r.accuracy);
  }
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i].summary = summarize(values[i]);
  return cells;
}

// ---------------------------------------------------------------------------
// Input transforms

struct TransformConfig {
  double distance = 1.0;
  std::vector<features::TransformKind> transforms{features::TransformKind::identity, features::TransformKind::sine,
                                                  features::TransformKind::cosine, features::TransformKind::signum};
  std::vector<std::string> classifiers{"perceptron", "naive_bayes", "cmvg"};
  std::size_t n_rep = 5;
  std::size_t n_per_class = 5000;
  double train_fraction = 0.8;
  ClassifierOptions options;
  std::uint64_t seed = 0;
};

struct TransformRecord {
  features::TransformKind transform{};
  std::string classifier;
  std::size_t rep = 0;
  double accuracy = kNaN;
};

/// Each repetition draws one dataset from the isotropic pair at `distance`
/// and applies every transform to the same points and split.
inline std::vector<TransformRecord> run_transforms(const TransformConfig& cfg, std::size_t threads = 1) {
  check_classifier_names(cfg.classifiers);
  if (cfg.transforms.empty()) throw ConfigError("at least one transform is required");
  if (cfg.n_rep < 1) throw ConfigError("n_rep must be >= 1");
  const std::size_t t = cfg.transforms.size(), k = cfg.classifiers.size();
  std::vector<TransformRecord> out(cfg.n_rep * t * k);
  parallel_for(cfg.n_rep, threads, [&](std::size_t rep) {
    const std::uint64_t seed = derive_seed(cell_seed(cfg.seed, {cfg.distance}), rep);
    Rng rng(seed);
    auto raw = limit::sample_problem(limit::spherical_pair(cfg.distance), cfg.n_per_class, rng);
    raw = dsc::split_dataset(std::move(raw), cfg.train_fraction, rng);
    for (std::size_t j = 0; j < t; ++j) {
      const auto data = features::apply_transform(cfg.transforms[j], raw);
      for (std::size_t c = 0; c < k; ++c) {
        auto& r = out[(rep * t + j) * k + c];
        r.transform = cfg.transforms[j];
        r.classifier = cfg.classifiers[c];
        r.rep = rep;
        try {
          r.accuracy = named_accuracy(r.classifier, data, cfg.options, derive_seed(seed, 100 + c));
        } catch (const FitError&) {
        }
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Epoch staging

/// Preset synthetic profiles. `separable` gives each class its own dominant
/// tone on the default Fourier grid; `identical` gives every class the same
/// recipe.
inline std::vector<features::StageProfile> preset_profiles(const std::string& name, std::size_t classes) {
  if (classes < 2 || classes > 5) throw ConfigError("synthetic profiles support 2 to 5 classes");
  static constexpr std::array<double, 5> tones{25.0, 20.0, 15.0, 10.0, 5.0};
  std::vector<features::StageProfile> out;
  for (std::size_t c = 0; c < classes; ++c) {
    features::StageProfile p;
    p.label = static_cast<int>(c);
    if (name == "separable")
      p.components = {{tones[c], 3.0}};
    else if (name == "identical")
      p.components = {{10.0, 1.0}};
    else
      throw ConfigError("unknown profile preset '" + name + "' (expected separable or identical)");
    out.push_back(p);
  }
  return out;
}

struct StagingConfig {
  std::string epochs_path;            // empty selects synthetic epochs
  std::string profiles = "separable";
  std::size_t classes = 5;
  std::size_t n_per_class = 60;
  double sample_rate = features::kDefaultSampleRate;
  features::FeatureSpec feature = features::FeatureSpec::default_fourier();
  std::string classifier = "naive_bayes";
  ClassifierOptions options;
  std::size_t n_rep = 5;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

struct StagingResult {
  std::vector<double> accuracies;  // per repetition, NaN on failure
  std::vector<std::string> errors;
  Matrix mean_confusion;           // K x K, averaged over successful repetitions
  std::vector<features::EpochFailure> failures;
  std::size_t epochs = 0;
};

inline StagingResult run_staging(const StagingConfig& cfg, std::vector<features::Epoch> epochs,
                                 std::size_t threads = 1) {
  check_classifier_names(std::span(&cfg.classifier, 1));
  if (cfg.n_rep < 1) throw ConfigError("n_rep must be >= 1");
  if (epochs.empty()) throw InputError("no epochs to stage");
  cfg.feature.validate(epochs.front().size(), epochs.front().sample_rate);
  for (const auto& e : epochs)
    if (!e.label) throw InputError("every epoch needs a stage label for staging");
  auto extraction = features::extract_features(epochs, cfg.feature);
  StagingResult out;
  out.epochs = epochs.size();
  out.failures = std::move(extraction.failures);
  const std::size_t k = extraction.data.class_count();
  if (k < 2) throw InputError("staging needs at least two stages");
  out.accuracies.assign(cfg.n_rep, kNaN);
  out.errors.assign(cfg.n_rep, "");
  std::vector<Matrix> confusions(cfg.n_rep);
  parallel_for(cfg.n_rep, threads, [&](std::size_t rep) {
    const std::uint64_t seed = derive_seed(cfg.seed, 1000 + rep);
    try {
      const auto data = random_split(extraction.data, cfg.train_fraction, seed);
      const auto model = clf::fit(named_spec(cfg.classifier, cfg.options, derive_seed(seed, 1)), data.train());
      const auto test = data.test();
      const auto ev = clf::evaluate_predictions(test.labels, clf::predict(model, test.features), k);
      out.accuracies[rep] = ev.accuracy;
      confusions[rep] = ev.confusion.values;
    } catch (const Error& e) {
      out.errors[rep] = e.what();
    }
  });
  out.mean_confusion = Matrix::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  std::size_t ok = 0;
  for (std::size_t rep = 0; rep < cfg.n_rep; ++rep)
    if (confusions[rep].size()) out.mean_confusion += confusions[rep], ++ok;
  if (ok) out.mean_confusion /= static_cast<double>(ok);
  return out;
}

// ---------------------------------------------------------------------------
// Layer embeddings

struct EmbedConfig {
  std::string source = "mnist";  // mnist | epochs
  std::string images;
  std::string labels;
  std::string epochs_path;
  std::size_t n_train = 8000;
  std::size_t n_eval = 2000;
  std::string mode = "head";  // head | autoencoder
  std::vector<std::size_t> encoder{128, 64, 16};
  nn::TrainConfig train;
  std::size_t layers = 4;
  std::size_t mds_dim = 2;
  std::size_t mds_cap = embed::kMdsPointCap;
  std::uint64_t seed = 0;
};

struct EmbedResult {
  std::vector<embed::LayerGdv> profile;
  Labels eval_labels;
  std::size_t epochs_run = 0;
  double final_loss = kNaN;
  double baseline_loss = kNaN;  // autoencoder: mean-predictor loss on the eval set
  double eval_loss = kNaN;      // autoencoder reconstruction loss on the eval set
};

/// Train and evaluation matrices for the configured source.
inline std::pair<LabeledDataset, LabeledDataset> embed_data(const EmbedConfig& cfg) {
  LabeledDataset all;
  if (cfg.source == "mnist") {
    all = embed::load_idx_dataset(cfg.images, cfg.labels, cfg.n_train + cfg.n_eval);
  } else if (cfg.source == "epochs") {
    throw ConfigError("epoch sources are loaded by the caller; use embed_epochs_data");
  } else {
    throw ConfigError("unknown embed source '" + cfg.source + "' (expected mnist or epochs)");
  }
  if (all.rows() < cfg.n_train + 1) throw InputError("not enough rows for the requested training size");
  std::vector<std::size_t> train(cfg.n_train), eval(all.rows() - cfg.n_train);
  std::iota(train.begin(), train.end(), std::size_t{0});
  std::iota(eval.begin(), eval.end(), cfg.n_train);
  return {all.subset(train), all.subset(eval)};
}

/// Spectra of labelled epochs, split at random by `n_train` : rest.
inline std::pair<LabeledDataset, LabeledDataset> embed_epochs_data(const EmbedConfig& cfg,
                                                                   std::vector<features::Epoch> epochs) {
  LabeledDataset all;
  for (const auto& e : epochs) {
    if (!e.label) throw InputError("every epoch needs a stage label for embedding");
    all.labels.push_back(*e.label);
  }
  all.features = embed::spectrum_preprocess(embed::zscore_recording(std::move(epochs)));
  if (all.rows() < cfg.n_train + 1) throw InputError("not enough epochs for the requested training size");
  std::vector<std::size_t> order(all.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(cfg.seed, 3));
  std::shuffle(order.begin(), order.end(), rng);
  const auto cut = order.begin() + static_cast<std::ptrdiff_t>(cfg.n_train);
  return {all.subset(std::vector<std::size_t>(order.begin(), cut)),
          all.subset(std::vector<std::size_t>(cut, order.end()))};
}

inline EmbedResult run_embed(const EmbedConfig& cfg, const LabeledDataset& train, const LabeledDataset& eval) {
  nn::TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, 1);
  nn::TrainResult trained;
  const auto input = static_cast<std::size_t>(train.features.cols());
  if (cfg.mode == "head") {
    embed::HeadSpec spec;
    spec.input_size = input;
    spec.encoder = cfg.encoder;
    spec.classes = std::max(train.class_count(), eval.class_count());
    trained = embed::train_head(train.features, train.labels, spec, tc);
  } else if (cfg.mode == "autoencoder") {
    embed::AutoencoderSpec spec;
    spec.input_size = input;
    spec.encoder = cfg.encoder;
    trained = embed::train_autoencoder(train.features, spec, tc);
  } else {
    throw ConfigError("unknown embed mode '" + cfg.mode + "' (expected head or autoencoder)");
  }
  EmbedResult out;
  out.epochs_run = trained.loss_history.size();
  out.final_loss = trained.loss_history.empty() ? kNaN : trained.loss_history.back();
  if (cfg.mode == "autoencoder") {
    out.eval_loss = embed::reconstruction_mse(trained.model, eval.features);
    out.baseline_loss = embed::mean_predictor_mse(train.features.colwise().mean().transpose(), eval.features);
  }
  embed::ProfileOptions opt;
  opt.layers = cfg.layers;
  opt.mds_dim = cfg.mds_dim;
  opt.mds_cap = cfg.mds_cap;
  opt.seed = derive_seed(cfg.seed, 2);
  out.profile = embed::layer_gdv_profile(trained.model, eval.features, eval.labels, opt);
  out.eval_labels = eval.labels;
  return out;
}

// ---------------------------------------------------------------------------
// GDV tables

struct GdvConfig {
  std::vector<std::size_t> dims{10};
  std::vector<double> separations{0.0, 1.0, 2.0, 4.0};
  std::vector<double> correlations{0.5};
  std::size_t n_rep = 20;
  std::size_t n_vec = 2000;
  std::uint64_t seed = 0;
};

struct GdvRow {
  std::size_t dims = 0;
  double separation = 0.0;
  double correlation = 0.0;
  Summary gdv;
  double offdiag_rms = kNaN;  // empirical class-0 covariance, mean over repetitions
};

inline std::vector<GdvRow> run_gdv_sweep(const GdvConfig& cfg, std::size_t threads = 1) {
  if (cfg.n_rep < 1) throw ConfigError("n_rep must be >= 1");
  std::vector<GdvRow> rows;
  std::vector<dsc::DscControl> controls;
  for (std::size_t d : cfg.dims)
    for (double s : cfg.separations)
      for (double c : cfg.correlations) {
        dsc::DscControl ctl;
        ctl.dims = d;
        ctl.separation = s;
        ctl.correlation = c;
        ctl.n_vec = cfg.n_vec;
        ctl.seed = cell_seed(cfg.seed, {static_cast<double>(d), s, c});
        ctl.validate();
        controls.push_back(ctl);
        rows.push_back({d, s, c, {}, kNaN});
      }
  if (rows.empty()) throw ConfigError("GDV sweep lists must be non-empty");
  std::vector<double> gdv(controls.size() * cfg.n_rep, kNaN), rms(controls.size() * cfg.n_rep, kNaN);
  parallel_for(gdv.size(), threads, [&](std::size_t task) {
    const auto& ctl = controls[task / cfg.n_rep];
    const auto rep = dsc::generate_repetition(ctl, task % cfg.n_rep);
    if (ctl.dims > 1) rms[task] = dsc::offdiag_rms(dsc::sample_covariance(dsc::class_rows(rep.data, 0)));
    try {
      gdv[task] = metrics::gdv(rep.data);
    } catch (const DomainError&) {
    }
  });
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].gdv = summarize(std::span(gdv).subspan(i * cfg.n_rep, cfg.n_rep));
    if (rows[i].dims > 1) rows[i].offdiag_rms = summarize(std::span(rms).subspan(i * cfg.n_rep, cfg.n_rep)).mean;
  }
  return rows;
}

}  // namespace alimit::exp

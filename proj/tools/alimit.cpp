// Command-line harness. Each subcommand resolves a JSON config (defaults,
// optional --paper-scale preset, --config file, --set overrides), runs one
// experiment and writes CSV tables, SVG plots and manifest.json to --out.
//
// Exit codes: 0 success, 2 configuration, 3 input or format, 4 numeric,
// 1 anything else.

#include "alimit/alimit.hpp"
#include "alimit/experiments.hpp"
#include "alimit/io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>

using json = nlohmann::json;
using namespace alimit;

namespace {

// ---------------------------------------------------------------------------
// Config resolution

json perceptron_defaults() {
  return {{"hidden", 100}, {"epochs", 50}, {"batch", 128}, {"lr", 1e-3}, {"patience", 5}, {"validation", 0.2}};
}

json defaults_for(const std::string& sub) {
  const json seed = nullptr;
  if (sub == "limit")
    return {{"seed", seed},          {"problem", "spherical"},
            {"rho0", 0.75},          {"rho1", -0.75},
            {"d", {0, 0.5, 1, 1.5, 2, 2.5, 3, 3.5, 4, 4.5, 5}},
            {"method", "grid"},      {"grid_spacing", 0.02},
            {"grid_margin", 8.0},    {"mc_samples", 100000},
            {"classifiers", exp::classifier_names()},
            {"n_rep", 5},            {"n_per_class", 5000},
            {"train_fraction", 0.8}, {"rde_dims", 20},
            {"perceptron", perceptron_defaults()}};
  if (sub == "sweep")
    return {{"seed", seed},
            {"D", {5}},
            {"S", {0, 0.5, 1, 2}},
            {"C", {0}},
            {"n_rep", 20},
            {"n_vec", 10000},
            {"train_fraction", 0.8},
            {"classifiers", {"perceptron", "naive_bayes", "cmvg"}},
            {"rde_dims", 20},
            {"perceptron", perceptron_defaults()}};
  if (sub == "transform")
    return {{"seed", seed},
            {"d", 1.0},
            {"transforms", {"identity", "sine", "cosine", "signum"}},
            {"classifiers", {"perceptron", "naive_bayes", "cmvg"}},
            {"n_rep", 5},
            {"n_per_class", 5000},
            {"train_fraction", 0.8},
            {"rde_dims", 20},
            {"perceptron", perceptron_defaults()}};
  if (sub == "features")
    return {{"seed", seed},
            {"epochs", ""},
            {"profiles", "separable"},
            {"classes", 5},
            {"n_per_class", 60},
            {"sample_rate", features::kDefaultSampleRate},
            {"feature", "fourier"},
            {"frequencies", {5, 10, 15, 20, 25, 30}},
            {"lags", {1, 3, 5, 7, 9, 11}},
            {"classifier", "naive_bayes"},
            {"n_rep", 5},
            {"train_fraction", 0.8},
            {"rde_dims", 20},
            {"perceptron", perceptron_defaults()}};
  if (sub == "embed")
    return {{"seed", seed},
            {"source", "mnist"},
            {"images", "data/mnist/images-idx3-ubyte.gz"},
            {"labels", "data/mnist/labels-idx1-ubyte.gz"},
            {"epochs", ""},
            {"sample_rate", features::kDefaultSampleRate},
            {"n_train", 8000},
            {"n_eval", 2000},
            {"mode", "head"},
            {"encoder", {128, 64, 16}},
            {"train", {{"epochs", 30}, {"batch", 128}, {"lr", 1e-3}, {"patience", 5}, {"validation", 0.2}}},
            {"layers", 4},
            {"mds_dim", 2},
            {"mds_cap", embed::kMdsPointCap}};
  if (sub == "gdv")
    return {{"seed", seed}, {"input", ""}, {"D", {10}}, {"S", {0, 1, 2, 4}}, {"C", {0.5}}, {"n_rep", 20}, {"n_vec", 2000}};
  if (sub == "generate")
    return {{"seed", seed}, {"kind", "dsc"}, {"D", 5},         {"S", 1.0},         {"C", 0.5},
            {"n_vec", 10000}, {"rep", 0},     {"train_fraction", 0.8}, {"profiles", "separable"},
            {"classes", 5},   {"n_per_class", 20}};
  throw ConfigError("unknown subcommand " + sub);
}

json paper_preset(const std::string& sub) {
  if (sub == "limit") return {{"grid_spacing", 0.01}, {"mc_samples", 1000000}, {"n_rep", 100}};
  if (sub == "sweep" || sub == "transform" || sub == "gdv") return {{"n_rep", 100}};
  if (sub == "features") return {{"n_rep", 20}};
  if (sub == "embed") return {{"n_train", 10000}, {"n_eval", 2000}, {"train", {{"epochs", 50}}}};
  return json::object();
}

/// Recursively merges `patch` into `base`; keys must already exist in `base`.
void merge_into(json& base, const json& patch, const std::string& where) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string path = where.empty() ? it.key() : where + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("unknown config key '" + path + "'");
    json& slot = base[it.key()];
    if (slot.is_object() && it.value().is_object())
      merge_into(slot, it.value(), path);
    else
      slot = it.value();
  }
}

// Sections for other subcommands may share a config file; they are skipped.
bool is_subcommand(const std::string& key) {
  static const std::vector<std::string> subs{"limit", "sweep", "transform", "features", "embed", "gdv", "generate"};
  return std::find(subs.begin(), subs.end(), key) != subs.end();
}

json read_json_file(const std::string& path) {
  std::string text;
  try {
    text = io::read_text(path);
  } catch (const InputError&) {
    throw ConfigError("cannot read config file " + path);
  }
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
}

json resolve_config(const std::string& sub, const std::string& config_path, const std::vector<std::string>& sets,
                    bool paper_scale) {
  json cfg = defaults_for(sub);
  if (paper_scale) merge_into(cfg, paper_preset(sub), "");
  if (!config_path.empty()) {
    json file = read_json_file(config_path);
    if (!file.is_object()) throw ConfigError("config file must hold a JSON object");
    if (file.contains("subcommand") && file.contains("config")) {
      // A manifest from an earlier run.
      if (file["subcommand"] != sub)
        throw ConfigError("manifest was written by '" + file["subcommand"].get<std::string>() + "', not '" + sub + "'");
      merge_into(cfg, file["config"], "");
    } else {
      // Top-level keys shared with this subcommand, then its own section.
      json shared = json::object();
      for (auto it = file.begin(); it != file.end(); ++it) {
        if (it.key() == sub) continue;
        if (cfg.contains(it.key()))
          shared[it.key()] = it.value();
        else if (!(it.value().is_object() && is_subcommand(it.key())))
          throw ConfigError("unknown config key '" + it.key() + "'");
      }
      merge_into(cfg, shared, "");
      if (file.contains(sub)) {
        if (!file[sub].is_object()) throw ConfigError("config section '" + sub + "' must be an object");
        merge_into(cfg, file[sub], "");
      }
    }
  }
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
    const std::string key = s.substr(0, eq), text = s.substr(eq + 1);
    json value;
    try {
      value = json::parse(text);
    } catch (const json::parse_error&) {
      value = text;
    }
    json patch = value;
    std::string rest = key;
    std::vector<std::string> parts;
    for (std::size_t dot; (dot = rest.find('.')) != std::string::npos; rest = rest.substr(dot + 1))
      parts.push_back(rest.substr(0, dot));
    parts.push_back(rest);
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
    merge_into(cfg, patch, "");
  }
  if (!cfg["seed"].is_number_unsigned() && !(cfg["seed"].is_number_integer() && cfg["seed"].get<long long>() >= 0))
    throw ConfigError("a non-negative integer master seed is required (set \"seed\" in the config or --set seed=N)");
  return cfg;
}

// ---------------------------------------------------------------------------
// Outputs

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Collects outputs for one run and writes the manifest last.
class Run {
 public:
  Run(std::string sub, json cfg, std::filesystem::path out)
      : sub_(std::move(sub)), cfg_(std::move(cfg)), out_(std::move(out)), hash_(hex64(fnv1a(cfg_.dump()))) {
    std::error_code ec;
    std::filesystem::create_directories(out_, ec);
    if (ec) throw InputError("cannot create output directory " + out_.string() + ": " + ec.message());
  }

  const json& cfg() const { return cfg_; }
  std::uint64_t seed() const { return cfg_["seed"].get<std::uint64_t>(); }
  std::string ref() const { return "manifest.json config_hash=" + hash_; }

  void csv(const std::string& name, const io::CsvTable& table) { text(name, table.render(ref())); }

  void text(const std::string& name, const std::string& body) {
    io::write_text((out_ / name).string(), body);
    files_.push_back(name);
  }

  void note(const std::string& key, json value) { notes_[key] = std::move(value); }

  void finish(double seconds) {
    json m = {{"subcommand", sub_},
              {"config", cfg_},
              {"config_hash", hash_},
              {"seed", seed()},
              {"version", kVersion},
              {"wall_time_s", seconds},
              {"outputs", files_}};
    if (!notes_.empty()) m["notes"] = notes_;
    io::write_text((out_ / "manifest.json").string(), m.dump(2) + "\n");
  }

 private:
  std::string sub_;
  json cfg_;
  std::filesystem::path out_;
  std::string hash_;
  std::vector<std::string> files_;
  json notes_ = json::object();
};

std::string num(double v) { return io::format_double(v); }
std::string num_or_empty(double v) { return std::isnan(v) ? "" : io::format_double(v); }

template <typename T>
std::vector<T> list(const json& j) {
  if (j.is_array()) return j.get<std::vector<T>>();
  return {j.get<T>()};
}

exp::ClassifierOptions classifier_options(const json& c) {
  exp::ClassifierOptions o;
  const json& p = c["perceptron"];
  o.hidden = p["hidden"].get<std::size_t>();
  o.train.max_epochs = p["epochs"].get<std::size_t>();
  o.train.batch_size = p["batch"].get<std::size_t>();
  o.train.learning_rate = p["lr"].get<double>();
  o.train.patience = p["patience"].get<std::size_t>();
  o.train.validation_fraction = p["validation"].get<double>();
  o.train.validate();
  o.rde_dims = c["rde_dims"].get<std::size_t>();
  return o;
}

void check_fraction(double f) {
  if (!(f > 0.0 && f < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
}

// ---------------------------------------------------------------------------
// Subcommands

void cmd_limit(Run& run, std::size_t threads) {
  const json& c = run.cfg();
  exp::LimitConfig cfg;
  cfg.problem = c["problem"].get<std::string>();
  cfg.rho0 = c["rho0"].get<double>();
  cfg.rho1 = c["rho1"].get<double>();
  cfg.distances = list<double>(c["d"]);
  const auto method = c["method"].get<std::string>();
  if (method == "grid")
    cfg.method = exp::LimitMethod::grid;
  else if (method == "mc")
    cfg.method = exp::LimitMethod::mc;
  else
    throw ConfigError("method must be grid or mc");
  cfg.grid_spacing = c["grid_spacing"].get<double>();
  cfg.grid_margin = c["grid_margin"].get<double>();
  cfg.mc_samples = c["mc_samples"].get<std::size_t>();
  cfg.classifiers = list<std::string>(c["classifiers"]);
  cfg.n_rep = c["n_rep"].get<std::size_t>();
  cfg.n_per_class = c["n_per_class"].get<std::size_t>();
  cfg.train_fraction = c["train_fraction"].get<double>();
  check_fraction(cfg.train_fraction);
  cfg.options = classifier_options(c);
  cfg.seed = run.seed();
  const auto rows = exp::run_limit(cfg, threads);

  const std::vector<std::pair<std::string, std::string>> columns{
      {"a_perceptron", "perceptron"}, {"a_nb", "naive_bayes"}, {"a_nb_rde", "nb_rde"}, {"a_cmvg", "cmvg"}};
  io::CsvTable table({"d", "a_max", "a_perceptron", "a_nb", "a_nb_rde", "a_cmvg"});
  io::CsvTable stats({"d", "method", "a_max", "a_max_stderr", "classifier", "mean", "std", "n_ok", "n_failed"});
  std::vector<io::Series> series{{"A_max", {}, {}}};
  for (const auto& [col, name] : columns)
    if (std::find(cfg.classifiers.begin(), cfg.classifiers.end(), name) != cfg.classifiers.end())
      series.push_back({name, {}, {}});
  for (const auto& r : rows) {
    std::vector<std::string> cells{num(r.d), num(r.a_max)};
    for (const auto& [col, name] : columns) {
      const auto it = r.classifiers.find(name);
      cells.push_back(it == r.classifiers.end() ? "" : num_or_empty(it->second.mean));
    }
    table.row(cells);
    series[0].x.push_back(r.d);
    series[0].y.push_back(r.a_max);
    for (auto& s : series) {
      const auto it = r.classifiers.find(s.name);
      if (it == r.classifiers.end()) continue;
      s.x.push_back(r.d);
      s.y.push_back(it->second.mean);
      stats.row({num(r.d), method, num(r.a_max), num_or_empty(r.a_max_stderr), s.name, num_or_empty(it->second.mean),
                 num_or_empty(it->second.stddev), std::to_string(it->second.ok), std::to_string(it->second.failed)});
    }
    if (r.classifiers.empty())
      stats.row({num(r.d), method, num(r.a_max), num_or_empty(r.a_max_stderr), "", "", "", "0", "0"});
  }
  run.csv("limit.csv", table);
  run.csv("limit_stats.csv", stats);
  run.text("limit.svg", io::line_plot(series, "Accuracy limit and classifier accuracy", "d", "accuracy"));
  for (const auto& r : rows) std::cout << "d=" << num(r.d) << " A_max=" << io::format_fixed(r.a_max, 4) << "\n";
}

void cmd_sweep(Run& run, std::size_t threads) {
  const json& c = run.cfg();
  exp::SweepConfig cfg;
  cfg.dims = list<std::size_t>(c["D"]);
  cfg.separations = list<double>(c["S"]);
  cfg.correlations = list<double>(c["C"]);
  cfg.n_rep = c["n_rep"].get<std::size_t>();
  cfg.n_vec = c["n_vec"].get<std::size_t>();
  cfg.train_fraction = c["train_fraction"].get<double>();
  check_fraction(cfg.train_fraction);
  cfg.classifiers = list<std::string>(c["classifiers"]);
  cfg.options = classifier_options(c);
  cfg.seed = run.seed();
  const auto records = exp::run_sweep(cfg, threads);
  const auto cells = exp::summarize_sweep(records);

  io::CsvTable longf({"D", "S", "C", "rep", "classifier", "accuracy", "status"});
  for (const auto& r : records)
    longf.row({std::to_string(r.dims), num(r.separation), num(r.correlation), std::to_string(r.rep), r.classifier,
               num_or_empty(r.accuracy), r.error.empty() ? "ok" : "failed"});
  io::CsvTable summary({"D", "S", "C", "classifier", "mean", "std", "n_ok", "n_failed"});
  for (const auto& s : cells)
    summary.row({std::to_string(s.dims), num(s.separation), num(s.correlation), s.classifier, num_or_empty(s.summary.mean),
                 num_or_empty(s.summary.stddev), std::to_string(s.summary.ok), std::to_string(s.summary.failed)});
  run.csv("sweep_long.csv", longf);
  run.csv("sweep_summary.csv", summary);

  // Plot against whichever of S or C varies (S first).
  const bool by_c = cfg.separations.size() == 1 && cfg.correlations.size() > 1;
  std::map<std::string, io::Series> series;
  for (const auto& s : cells) {
    const std::string name = s.classifier + " D=" + std::to_string(s.dims) + (by_c ? " S=" + num(s.separation)
                                                                                    : " C=" + num(s.correlation));
    auto& ser = series[name];
    ser.name = name;
    ser.x.push_back(by_c ? s.correlation : s.separation);
    ser.y.push_back(s.summary.mean);
  }
  std::vector<io::Series> plot;
  for (auto& [k, v] : series) plot.push_back(v);
  run.text("sweep.svg", io::line_plot(plot, "Mean test accuracy", by_c ? "C" : "S", "accuracy"));
  std::size_t failed = 0;
  for (const auto& r : records) failed += !r.error.empty();
  std::cout << cells.size() << " cells, " << records.size() << " runs, " << failed << " failed\n";
}

void cmd_transform(Run& run, std::size_t threads) {
  const json& c = run.cfg();
  exp::TransformConfig cfg;
  cfg.distance = c["d"].get<double>();
  cfg.transforms.clear();
  for (const auto& t : list<std::string>(c["transforms"])) cfg.transforms.push_back(features::parse_transform(t));
  cfg.classifiers = list<std::string>(c["classifiers"]);
  cfg.n_rep = c["n_rep"].get<std::size_t>();
  cfg.n_per_class = c["n_per_class"].get<std::size_t>();
  cfg.train_fraction = c["train_fraction"].get<double>();
  check_fraction(cfg.train_fraction);
  cfg.options = classifier_options(c);
  cfg.seed = run.seed();
  const auto records = exp::run_transforms(cfg, threads);

  io::CsvTable longf({"transform", "classifier", "rep", "accuracy"});
  std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> groups;
  for (const auto& r : records) {
    longf.row({std::string(features::to_string(r.transform)), r.classifier, std::to_string(r.rep), num_or_empty(r.accuracy)});
    const auto t = static_cast<std::size_t>(
        std::find(cfg.transforms.begin(), cfg.transforms.end(), r.transform) - cfg.transforms.begin());
    const auto k = static_cast<std::size_t>(
        std::find(cfg.classifiers.begin(), cfg.classifiers.end(), r.classifier) - cfg.classifiers.begin());
    groups[{t, k}].push_back(r.accuracy);
  }
  io::CsvTable summary({"transform", "classifier", "mean", "std", "n_ok", "n_failed"});
  for (const auto& [key, values] : groups) {
    const auto s = exp::summarize(values);
    summary.row({std::string(features::to_string(cfg.transforms[key.first])), cfg.classifiers[key.second],
                 num_or_empty(s.mean), num_or_empty(s.stddev), std::to_string(s.ok), std::to_string(s.failed)});
    std::cout << features::to_string(cfg.transforms[key.first]) << " " << cfg.classifiers[key.second] << " "
              << io::format_fixed(s.mean, 4) << "\n";
  }
  run.csv("transform_long.csv", longf);
  run.csv("transform_summary.csv", summary);
}

std::vector<features::Epoch> load_or_synth_epochs(const json& c, std::uint64_t seed) {
  const auto path = c["epochs"].get<std::string>();
  const double rate = c["sample_rate"].get<double>();
  if (!path.empty()) return io::read_epochs_csv(path, rate);
  const auto profiles = exp::preset_profiles(c["profiles"].get<std::string>(), c["classes"].get<std::size_t>());
  return features::synth_epochs(profiles, c["n_per_class"].get<std::size_t>(), derive_seed(seed, 7),
                                features::kDefaultEpochLength, rate);
}

void cmd_features(Run& run, std::size_t threads) {
  const json& c = run.cfg();
  exp::StagingConfig cfg;
  cfg.feature.kind = features::parse_feature_kind(c["feature"].get<std::string>());
  if (cfg.feature.kind == features::FeatureKind::fourier)
    cfg.feature.frequencies = list<double>(c["frequencies"]);
  else
    cfg.feature.lags = list<std::size_t>(c["lags"]);
  cfg.classifier = c["classifier"].get<std::string>();
  cfg.options = classifier_options(c);
  cfg.n_rep = c["n_rep"].get<std::size_t>();
  cfg.train_fraction = c["train_fraction"].get<double>();
  check_fraction(cfg.train_fraction);
  cfg.seed = run.seed();
  auto epochs = load_or_synth_epochs(c, run.seed());
  const auto result = exp::run_staging(cfg, std::move(epochs), threads);

  io::CsvTable runs({"rep", "accuracy", "status"});
  for (std::size_t r = 0; r < result.accuracies.size(); ++r)
    runs.row({std::to_string(r), num_or_empty(result.accuracies[r]), result.errors[r].empty() ? "ok" : "failed"});
  std::vector<std::string> head{"assigned"};
  const auto k = result.mean_confusion.rows();
  for (Eigen::Index i = 0; i < k; ++i) head.push_back("true_" + std::to_string(i));
  io::CsvTable confusion(head);
  for (Eigen::Index j = 0; j < k; ++j) {
    std::vector<std::string> cells{std::to_string(j)};
    for (Eigen::Index i = 0; i < k; ++i) cells.push_back(num(result.mean_confusion(j, i)));
    confusion.row(cells);
  }
  const auto s = exp::summarize(result.accuracies);
  io::CsvTable summary({"epochs", "classes", "feature", "classifier", "mean", "std", "n_ok", "n_failed", "bad_epochs"});
  summary.row({std::to_string(result.epochs), std::to_string(k), std::string(features::to_string(cfg.feature.kind)),
               cfg.classifier, num_or_empty(s.mean), num_or_empty(s.stddev), std::to_string(s.ok),
               std::to_string(s.failed), std::to_string(result.failures.size())});
  run.csv("staging_runs.csv", runs);
  run.csv("staging_confusion.csv", confusion);
  run.csv("staging_summary.csv", summary);
  if (!result.failures.empty()) {
    io::CsvTable bad({"epoch", "reason"});
    for (const auto& f : result.failures) {
      std::string reason = f.message;
      std::replace(reason.begin(), reason.end(), ',', ';');
      bad.row({std::to_string(f.index), reason});
    }
    run.csv("staging_failures.csv", bad);
  }
  std::cout << "staging accuracy " << io::format_fixed(s.mean, 4) << " over " << s.ok << " splits\n";
}

void cmd_embed(Run& run, std::size_t) {
  const json& c = run.cfg();
  exp::EmbedConfig cfg;
  cfg.source = c["source"].get<std::string>();
  cfg.images = c["images"].get<std::string>();
  cfg.labels = c["labels"].get<std::string>();
  cfg.n_train = c["n_train"].get<std::size_t>();
  cfg.n_eval = c["n_eval"].get<std::size_t>();
  cfg.mode = c["mode"].get<std::string>();
  cfg.encoder = list<std::size_t>(c["encoder"]);
  const json& t = c["train"];
  cfg.train.max_epochs = t["epochs"].get<std::size_t>();
  cfg.train.batch_size = t["batch"].get<std::size_t>();
  cfg.train.learning_rate = t["lr"].get<double>();
  cfg.train.patience = t["patience"].get<std::size_t>();
  cfg.train.validation_fraction = t["validation"].get<double>();
  cfg.train.validate();
  cfg.layers = c["layers"].get<std::size_t>();
  cfg.mds_dim = c["mds_dim"].get<std::size_t>();
  cfg.mds_cap = c["mds_cap"].get<std::size_t>();
  cfg.seed = run.seed();
  if (cfg.n_train < 1 || cfg.n_eval < 2) throw ConfigError("n_train must be >= 1 and n_eval >= 2");

  std::pair<LabeledDataset, LabeledDataset> data;
  if (cfg.source == "epochs") {
    const auto path = c["epochs"].get<std::string>();
    if (path.empty()) throw ConfigError("source 'epochs' needs an epochs CSV path");
    data = exp::embed_epochs_data(cfg, io::read_epochs_csv(path, c["sample_rate"].get<double>()));
  } else {
    data = exp::embed_data(cfg);
  }
  const auto result = exp::run_embed(cfg, data.first, data.second);

  io::CsvTable table({"layer", "width", "dropped", "gdv"});
  io::Series curve{"GDV", {}, {}};
  for (const auto& l : result.profile) {
    table.row({"L" + std::to_string(l.layer), std::to_string(l.width), std::to_string(l.dropped), num(l.gdv)});
    curve.x.push_back(static_cast<double>(l.layer));
    curve.y.push_back(l.gdv);
    if (l.mds && l.mds->coords.cols() >= 2) {
      Labels labels;
      for (std::size_t i : l.mds->index) labels.push_back(result.eval_labels[i]);
      run.text("mds_L" + std::to_string(l.layer) + ".svg",
               io::scatter_plot(l.mds->coords.leftCols(2), labels, cfg.mode + " layer L" + std::to_string(l.layer)));
    }
  }
  run.csv("layer_gdv.csv", table);
  io::CsvTable training({"mode", "epochs_run", "final_train_loss", "eval_loss", "mean_predictor_loss"});
  training.row({cfg.mode, std::to_string(result.epochs_run), num_or_empty(result.final_loss),
                num_or_empty(result.eval_loss), num_or_empty(result.baseline_loss)});
  run.csv("training.csv", training);
  run.text("layer_gdv.svg", io::line_plot(std::span(&curve, 1), "GDV per layer (" + cfg.mode + ")", "layer", "GDV"));
  for (const auto& l : result.profile) std::cout << "L" << l.layer << " GDV " << io::format_fixed(l.gdv, 4) << "\n";
}

void cmd_gdv(Run& run, std::size_t threads) {
  const json& c = run.cfg();
  const auto input = c["input"].get<std::string>();
  if (!input.empty()) {
    const auto data = io::read_dataset_csv(input);
    const double v = metrics::gdv(data);
    io::CsvTable table({"rows", "dims", "classes", "gdv"});
    table.row({std::to_string(data.rows()), std::to_string(data.dims()), std::to_string(data.class_count()), num(v)});
    run.csv("gdv.csv", table);
    std::cout << "GDV " << num(v) << "\n";
    return;
  }
  exp::GdvConfig cfg;
  cfg.dims = list<std::size_t>(c["D"]);
  cfg.separations = list<double>(c["S"]);
  cfg.correlations = list<double>(c["C"]);
  cfg.n_rep = c["n_rep"].get<std::size_t>();
  cfg.n_vec = c["n_vec"].get<std::size_t>();
  cfg.seed = run.seed();
  const auto rows = exp::run_gdv_sweep(cfg, threads);
  io::CsvTable table({"D", "S", "C", "n_rep", "gdv_mean", "gdv_std", "neg_gdv_mean", "offdiag_rms_mean", "n_failed"});
  std::map<std::string, io::Series> series;
  const bool by_c = cfg.separations.size() == 1 && cfg.correlations.size() > 1;
  for (const auto& r : rows) {
    table.row({std::to_string(r.dims), num(r.separation), num(r.correlation), std::to_string(cfg.n_rep),
               num_or_empty(r.gdv.mean), num_or_empty(r.gdv.stddev), num_or_empty(-r.gdv.mean),
               num_or_empty(r.offdiag_rms), std::to_string(r.gdv.failed)});
    const std::string name = "D=" + std::to_string(r.dims) + (by_c ? " S=" + num(r.separation) : " C=" + num(r.correlation));
    auto& s = series[name];
    s.name = name;
    s.x.push_back(by_c ? r.correlation : r.separation);
    s.y.push_back(-r.gdv.mean);
  }
  run.csv("gdv.csv", table);
  std::vector<io::Series> plot;
  for (auto& [k, v] : series) plot.push_back(v);
  run.text("gdv.svg", io::line_plot(plot, "Class separability", by_c ? "C" : "S", "-GDV"));
}

void cmd_generate(Run& run, std::size_t) {
  const json& c = run.cfg();
  const auto kind = c["kind"].get<std::string>();
  if (kind == "dsc") {
    dsc::DscControl ctl;
    ctl.dims = c["D"].get<std::size_t>();
    ctl.separation = c["S"].get<double>();
    ctl.correlation = c["C"].get<double>();
    ctl.n_vec = c["n_vec"].get<std::size_t>();
    ctl.seed = run.seed();
    const double fraction = c["train_fraction"].get<double>();
    check_fraction(fraction);
    const auto rep = dsc::generate_repetition(ctl, c["rep"].get<std::size_t>(), fraction);
    run.text("train.csv", io::render_dataset_csv(rep.data.train(), run.ref()));
    run.text("test.csv", io::render_dataset_csv(rep.data.test(), run.ref()));
    std::cout << rep.data.train_index.size() << " train / " << rep.data.test_index.size() << " test rows\n";
  } else if (kind == "epochs") {
    const auto profiles = exp::preset_profiles(c["profiles"].get<std::string>(), c["classes"].get<std::size_t>());
    const auto epochs = features::synth_epochs(profiles, c["n_per_class"].get<std::size_t>(), derive_seed(run.seed(), 7));
    run.text("epochs.csv", io::render_epochs_csv(epochs, run.ref()));
    std::cout << epochs.size() << " epochs\n";
  } else {
    throw ConfigError("generate kind must be dsc or epochs");
  }
}

struct Subcommand {
  std::string name;
  std::string help;
  void (*body)(Run&, std::size_t);
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Subcommand> subs{
      {"limit", "accuracy limit of Gaussian class pairs against trained classifiers", cmd_limit},
      {"sweep", "classifier accuracies over DSC control settings", cmd_sweep},
      {"transform", "classifier accuracies after elementwise input transforms", cmd_transform},
      {"features", "sleep-stage classification from epoch features", cmd_features},
      {"embed", "layer-wise GDV and MDS projections of a trained network", cmd_embed},
      {"gdv", "GDV of a dataset CSV or of DSC data over S and C", cmd_gdv},
      {"generate", "write DSC datasets or synthetic epochs as CSV", cmd_generate},
  };

  CLI::App app{"Accuracy limits, separability and layer embeddings"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  std::string config_path, out_dir = "alimit-out";
  std::vector<std::string> sets;
  bool paper_scale = false;
  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  for (const auto& s : subs) {
    auto* sc = app.add_subcommand(s.name, s.help);
    sc->add_option("--config", config_path, "JSON config file or an earlier manifest.json");
    sc->add_option("--set", sets, "override a config value, e.g. --set n_rep=5 or --set perceptron.lr=0.01");
    sc->add_option("--out", out_dir, "output directory (created if missing)");
    sc->add_flag("--paper-scale", paper_scale, "use paper-scale repetition counts and resolutions");
    sc->add_option("--threads", threads, "worker threads (results do not depend on this)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const auto start = std::chrono::steady_clock::now();
  try {
    for (const auto& s : subs) {
      if (!app.got_subcommand(s.name)) continue;
      json cfg;
      try {
        cfg = resolve_config(s.name, config_path, sets, paper_scale);
      } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config: ") + e.what());
      }
      Run run(s.name, cfg, out_dir);
      try {
        s.body(run, threads);
      } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
      }
      run.finish(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

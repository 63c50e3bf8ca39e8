// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Usage: acceptance [--only N]...

#include "alimit/alimit.hpp"
#include "alimit/experiments.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sys/wait.h>

namespace fs = std::filesystem;
using namespace alimit;

namespace {

// Pinned tolerances.
constexpr double kLimitD1 = 0.6915;
constexpr double kLimitTol = 0.001;
constexpr double kLimitSeconds = 30.0;
constexpr double kClassifierTol = 0.02;
constexpr double kChanceTol = 0.03;
constexpr double kMcSigmas = 3.0;
constexpr std::size_t kMcSamples = 1000000;
constexpr std::size_t kGradChecks = 100;
constexpr double kGradRel = 1e-4;
constexpr double kGradSeconds = 60.0;
constexpr double kRmsEndpointTol = 0.05;
constexpr double kAgreeTol = 0.03;
constexpr double kPlateau = 0.8;
constexpr double kPlateauTol = 0.05;
constexpr double kNaiveCeiling = 0.6;
constexpr double kSweepSeconds = 15 * 60.0;
constexpr double kTransformTol = 0.02;
constexpr double kCosine = 0.5;
constexpr double kCosineTol = 0.03;
constexpr double kGdvHand = -0.4472;
constexpr double kGdvHandTol = 1e-4;
constexpr double kAffineTol = 1e-9;
constexpr double kSameDistTol = 0.02;
constexpr double kAutoencoderDrop = 0.01;
constexpr double kEmbedSeconds = 20 * 60.0;
constexpr double kStagingFloor = 0.9;
constexpr double kChanceStagingTol = 0.05;
constexpr double kOracleRel = 1e-6;

const fs::path kWork = fs::temp_directory_path() / "alimit_acceptance";

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) { return io::format_fixed(v, digits); }

// ---- CLI runs ---------------------------------------------------------------

struct CliRun {
  std::string subcommand;
  fs::path dir;
};

std::vector<CliRun> g_runs;

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/// Runs a subcommand into a fresh directory under the work dir and remembers
/// it for the replay check.
fs::path cli(const std::string& subcommand, const std::string& name, const std::vector<std::string>& sets) {
  const fs::path dir = kWork / name;
  fs::remove_all(dir);
  std::string cmd = std::string(ALIMIT_CLI_PATH) + " " + subcommand;
  for (const auto& s : sets) cmd += " --set '" + s + "'";
  cmd += " --out " + dir.string() + " > " + (kWork / (name + ".log")).string() + " 2>&1";
  const int code = shell(cmd);
  if (code != 0) throw std::runtime_error(subcommand + " run '" + name + "' exited with " + std::to_string(code));
  g_runs.push_back({subcommand, dir});
  return dir;
}

class Table {
 public:
  explicit Table(const fs::path& path) {
    const auto lines = io::detail::data_lines(io::read_text(path.string()));
    if (lines.empty()) throw std::runtime_error("empty table " + path.string());
    for (auto h : io::split_csv_line(lines[0])) header_.emplace_back(h);
    for (std::size_t i = 1; i < lines.size(); ++i) {
      std::vector<std::string> row;
      for (auto v : io::split_csv_line(lines[i])) row.emplace_back(v);
      rows_.push_back(std::move(row));
    }
  }

  std::size_t size() const { return rows_.size(); }

  const std::string& text(std::size_t row, const std::string& col) const { return rows_.at(row).at(index(col)); }
  double num(std::size_t row, const std::string& col) const { return io::parse_double(text(row, col)); }

  /// First row whose listed columns hold the given numbers (or strings).
  std::size_t find(const std::map<std::string, std::string>& key) const {
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      bool hit = true;
      for (const auto& [col, want] : key) {
        const auto& have = text(r, col);
        const bool numeric = !want.empty() && (std::isdigit(static_cast<unsigned char>(want[0])) || want[0] == '-');
        hit = hit && (numeric ? io::parse_double(have) == io::parse_double(want) : have == want);
      }
      if (hit) return r;
    }
    throw std::runtime_error("no row matches the requested key");
  }

 private:
  std::size_t index(const std::string& col) const {
    for (std::size_t i = 0; i < header_.size(); ++i)
      if (header_[i] == col) return i;
    throw std::runtime_error("missing column " + col);
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// ---- criteria ---------------------------------------------------------------

Outcome analytic_limit() {
  const auto t0 = std::chrono::steady_clock::now();
  const double a = accuracy_from_confusion(
      limit::confusion_grid(limit::spherical_pair(1.0), limit::GridSpec::cube(2, -8.0, 8.0, 0.01)));
  const double secs = seconds_since(t0);
  return {std::abs(a - kLimitD1) <= kLimitTol && secs < kLimitSeconds,
          "A_max(d=1)=" + fmt(a, 5) + " want " + fmt(kLimitD1) + "+-" + fmt(kLimitTol, 3) + ", " + fmt(secs, 2) +
              " s (< " + fmt(kLimitSeconds, 0) + ")"};
}

Outcome limit_curve() {
  const auto dir = cli("limit", "c2_limit",
                       {"seed=2", "d=[0,0.5,1,1.5,2,2.5,3,3.5,4,4.5,5]", "grid_spacing=0.01", "classifiers=[]"});
  const Table t(dir / "limit.csv");
  bool increasing = true;
  for (std::size_t r = 1; r < t.size(); ++r) increasing = increasing && t.num(r, "a_max") > t.num(r - 1, "a_max");
  const double a0 = t.num(0, "a_max"), a5 = t.num(t.size() - 1, "a_max");
  return {increasing && std::abs(a0 - 0.5) <= kLimitTol && a5 >= 0.99,
          std::string(increasing ? "strictly increasing" : "NOT increasing") + ", A_max(0)=" + fmt(a0, 5) +
              ", A_max(5)=" + fmt(a5, 5)};
}

Outcome classifiers_at_limit() {
  const auto sph = cli("limit", "c3_spherical",
                       {"seed=3", "d=[1]", "grid_spacing=0.01", "classifiers=[\"perceptron\",\"cmvg\"]", "n_rep=5"});
  const auto cor = cli("limit", "c3_correlated",
                       {"seed=3", "problem=correlated", "d=[0]", "grid_spacing=0.01",
                        "classifiers=[\"naive_bayes\",\"nb_rde\"]", "n_rep=5"});
  const Table s(sph / "limit.csv"), c(cor / "limit.csv");
  const double perceptron = s.num(0, "a_perceptron"), cmvg = s.num(0, "a_cmvg");
  const double limit_c = c.num(0, "a_max"), nb = c.num(0, "a_nb"), rde = c.num(0, "a_nb_rde");
  const bool ok = std::abs(perceptron - kLimitD1) <= kClassifierTol && std::abs(cmvg - kLimitD1) <= kClassifierTol &&
                  std::abs(rde - limit_c) <= kClassifierTol && std::abs(nb - 0.5) <= kChanceTol;
  return {ok, "d=1: perceptron " + fmt(perceptron) + ", cmvg " + fmt(cmvg) + " (want " + fmt(kLimitD1) + "+-" +
                  fmt(kClassifierTol, 2) + "); correlated d=0: A_max " + fmt(limit_c) + ", nb+rde " + fmt(rde) +
                  ", nb " + fmt(nb) + " (want 0.5+-" + fmt(kChanceTol, 2) + "); mean of 5 splits"};
}

Outcome grid_mc_consistency() {
  const std::vector<std::pair<std::string, limit::MixtureProblem>> problems{
      {"spherical d=1", limit::spherical_pair(1.0)},
      {"spherical d=2.5", limit::spherical_pair(2.5)},
      {"correlated d=0.5", limit::correlated_pair(0.5, 0.75, -0.75)}};
  Outcome out{true, ""};
  for (std::size_t i = 0; i < problems.size(); ++i) {
    const auto& [name, p] = problems[i];
    const double grid = accuracy_from_confusion(limit::confusion_grid(p, exp::covering_grid(p, 8.0, 0.01)));
    Rng rng(derive_seed(4, i));
    const auto mc = limit::confusion_mc(p, kMcSamples, rng);
    const double z = std::abs(grid - mc.accuracy) / mc.accuracy_std_error;
    out.pass = out.pass && z <= kMcSigmas;
    out.detail += (i ? "; " : "") + name + ": |grid-mc|=" + fmt(std::abs(grid - mc.accuracy), 5) + " = " + fmt(z, 2) +
                  " se";
  }
  return out;
}

Outcome gradient_checks() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t failed_models = 0, entries = 0;
  double worst = 0.0;
  for (std::size_t s = 0; s < kGradChecks; ++s) {
    const auto c = gradcheck::random_case(1000 + s);
    const auto r = gradcheck::check(c.model, c.x, c.t, c.loss, 1e-5, kGradRel);
    entries += r.checked;
    failed_models += r.failed > 0;
    worst = std::max(worst, r.worst_relative);
  }
  const double secs = seconds_since(t0);
  return {failed_models == 0 && secs < kGradSeconds,
          std::to_string(kGradChecks - failed_models) + "/" + std::to_string(kGradChecks) + " models pass (" +
              std::to_string(entries) + " entries, worst rel " + io::format_double(worst) + "), " + fmt(secs, 2) + " s"};
}

Outcome dsc_fidelity() {
  const auto c_dir = cli("gdv", "c6_correlation", {"seed=6", "D=[10]", "S=[1]", "C=[0,0.5,1,1.5,2]", "n_rep=20", "n_vec=2000"});
  const auto s_dir = cli("gdv", "c6_separation", {"seed=6", "D=[10]", "S=[0,1,2,4]", "C=[0.5]", "n_rep=20", "n_vec=2000"});
  const Table c(c_dir / "gdv.csv"), s(s_dir / "gdv.csv");
  bool rms_monotone = true, gdv_monotone = true;
  std::string rms = "rms", neg = "-gdv";
  for (std::size_t r = 0; r < c.size(); ++r) {
    rms += " " + fmt(c.num(r, "offdiag_rms_mean"), 3);
    if (r) rms_monotone = rms_monotone && c.num(r, "offdiag_rms_mean") >= c.num(r - 1, "offdiag_rms_mean");
  }
  for (std::size_t r = 0; r < s.size(); ++r) {
    neg += " " + fmt(s.num(r, "neg_gdv_mean"), 3);
    if (r) gdv_monotone = gdv_monotone && s.num(r, "neg_gdv_mean") > s.num(r - 1, "neg_gdv_mean");
  }
  const double lo = c.num(0, "offdiag_rms_mean"), hi = c.num(c.size() - 1, "offdiag_rms_mean");
  const bool ends = std::abs(lo) <= kRmsEndpointTol && std::abs(hi - 1.0) <= kRmsEndpointTol;
  return {rms_monotone && gdv_monotone && ends,
          rms + " over C=0..2 (" + (rms_monotone ? "monotone" : "NOT monotone") + ", endpoints +-" +
              fmt(kRmsEndpointTol, 2) + "); " + neg + " over S=0,1,2,4 (" + (gdv_monotone ? "monotone" : "NOT monotone") +
              ")"};
}

Outcome sweep_replication() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto agree = cli("sweep", "c7_separation",
                         {"seed=7", "D=[5]", "S=[0,0.5,1,1.5,2,2.5,3]", "C=[0]", "n_rep=20", "n_vec=10000"});
  const auto plateau = cli("sweep", "c7_plateau", {"seed=7", "D=[5]", "S=[0.1]", "C=[1.0]", "n_rep=20", "n_vec=10000"});
  const double secs = seconds_since(t0);
  const Table a(agree / "sweep_summary.csv"), p(plateau / "sweep_summary.csv");
  double worst_gap = 0.0;
  for (double s : {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0}) {
    std::vector<double> means;
    for (const char* c : {"perceptron", "naive_bayes", "cmvg"})
      means.push_back(a.num(a.find({{"S", io::format_double(s)}, {"classifier", c}}), "mean"));
    worst_gap = std::max(worst_gap, *std::max_element(means.begin(), means.end()) -
                                        *std::min_element(means.begin(), means.end()));
  }
  const double per = p.num(p.find({{"classifier", "perceptron"}}), "mean");
  const double cmvg = p.num(p.find({{"classifier", "cmvg"}}), "mean");
  const double nb = p.num(p.find({{"classifier", "naive_bayes"}}), "mean");
  const bool ok = worst_gap <= kAgreeTol && std::abs(per - kPlateau) <= kPlateauTol &&
                  std::abs(cmvg - kPlateau) <= kPlateauTol && nb <= kNaiveCeiling && secs < kSweepSeconds;
  return {ok, "C=0 worst pairwise gap " + fmt(worst_gap) + " (<= " + fmt(kAgreeTol, 2) + "); S=0.1,C=1: perceptron " +
                  fmt(per) + ", cmvg " + fmt(cmvg) + " (want " + fmt(kPlateau, 1) + "+-" + fmt(kPlateauTol, 2) +
                  "), nb " + fmt(nb) + " (<= " + fmt(kNaiveCeiling, 1) + "); " + fmt(secs, 0) + " s"};
}

Outcome transform_suite() {
  const auto dir = cli("transform", "c8_transform", {"seed=8", "d=1", "n_rep=5"});
  const Table t(dir / "transform_summary.csv");
  Outcome out{true, ""};
  for (const char* tr : {"identity", "sine", "signum", "cosine"}) {
    out.detail += std::string(out.detail.empty() ? "" : "; ") + tr + ":";
    for (const char* c : {"perceptron", "naive_bayes", "cmvg"}) {
      const double m = t.num(t.find({{"transform", tr}, {"classifier", c}}), "mean");
      out.detail += " " + fmt(m, 3);
      const std::string_view name(tr);
      if (name == "sine" || name == "signum") out.pass = out.pass && std::abs(m - kLimitD1) <= kTransformTol;
      if (name == "cosine") out.pass = out.pass && std::abs(m - kCosine) <= kCosineTol;
    }
  }
  out.detail += " (sine/signum within " + fmt(kTransformTol, 2) + " of " + fmt(kLimitD1) + ", cosine " +
                fmt(kCosine, 1) + "+-" + fmt(kCosineTol, 2) + "; mean of 5 splits)";
  return out;
}

Outcome gdv_suite() {
  Matrix hand(4, 1);
  hand << 0, 1, 2, 3;
  const Labels hand_labels{0, 0, 1, 1};
  const double g = metrics::gdv(hand, hand_labels);
  const double oracle = oracles::brute_force_gdv(hand, hand_labels);

  Rng rng(9);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(300, 4);
  Labels y;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    y.push_back(static_cast<int>(r % 3));
    for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = normal(rng) + 0.7 * static_cast<double>(r % 3) * (c % 2);
  }
  Matrix mapped = x;
  for (Eigen::Index c = 0; c < x.cols(); ++c)
    mapped.col(c) = (static_cast<double>(c) - 1.7) * 3.1 * x.col(c).array() + 42.0 * static_cast<double>(c + 1);
  const double affine = std::abs(metrics::gdv(mapped, y) - metrics::gdv(x, y));

  Matrix same(10000, 5);
  Labels same_labels;
  for (Eigen::Index r = 0; r < same.rows(); ++r) {
    same_labels.push_back(static_cast<int>(r % 2));
    for (Eigen::Index c = 0; c < same.cols(); ++c) same(r, c) = normal(rng);
  }
  const double null_gdv = metrics::gdv(same, same_labels);
  const bool ok = std::abs(g - kGdvHand) <= kGdvHandTol && std::abs(g - oracle) <= kGdvHandTol &&
                  affine <= kAffineTol && std::abs(null_gdv) <= kSameDistTol;
  return {ok, "hand " + fmt(g, 5) + " (oracle " + fmt(oracle, 5) + "), affine |diff| " + io::format_double(affine) +
                  ", same distribution N=1e4 " + fmt(null_gdv, 5)};
}

Outcome embedding_replication() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string images = std::string("images=") + ALIMIT_DATA_DIR + "/mnist/images-idx3-ubyte.gz";
  const std::string labels = std::string("labels=") + ALIMIT_DATA_DIR + "/mnist/labels-idx1-ubyte.gz";
  const auto head = cli("embed", "c10_head", {"seed=10", images, labels, "mode=head"});
  const auto ae = cli("embed", "c10_autoencoder", {"seed=10", images, labels, "mode=autoencoder"});
  const double secs = seconds_since(t0);
  const Table h(head / "layer_gdv.csv"), a(ae / "layer_gdv.csv");
  bool decreasing = true;
  std::string hs = "head", as = "autoencoder";
  for (std::size_t r = 0; r < h.size(); ++r) {
    hs += " " + fmt(h.num(r, "gdv"));
    if (r) decreasing = decreasing && h.num(r, "gdv") < h.num(r - 1, "gdv");
  }
  for (std::size_t r = 0; r < a.size(); ++r) as += " " + fmt(a.num(r, "gdv"));
  const bool drop = a.num(a.size() - 1, "gdv") <= a.num(0, "gdv") - kAutoencoderDrop;
  return {decreasing && drop && secs < kEmbedSeconds,
          hs + (decreasing ? " (strictly decreasing)" : " (NOT strictly decreasing)") + "; " + as +
              (drop ? " (L3 <= L0-" : " (L3 NOT <= L0-") + fmt(kAutoencoderDrop, 2) + "); 8000/2000 digits; " +
              fmt(secs, 0) + " s"};
}

Outcome synthetic_staging() {
  const auto sep = cli("features", "c11_separable", {"seed=11", "profiles=separable", "classes=5", "n_rep=5"});
  const auto same =
      cli("features", "c11_identical", {"seed=11", "profiles=identical", "classes=5", "n_per_class=100", "n_rep=10"});
  const double a_sep = Table(sep / "staging_summary.csv").num(0, "mean");
  const double a_same = Table(same / "staging_summary.csv").num(0, "mean");

  double worst = 0.0;
  Rng rng(11);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int e = 0; e < 5; ++e) {
    features::Epoch epoch;
    epoch.samples.resize(features::kDefaultEpochLength);
    double phase = 0.0;
    for (double& v : epoch.samples) v = (phase = 0.6 * phase + normal(rng));
    for (double f : features::FeatureSpec::default_fourier().frequencies) {
      const double want = oracles::fourier_oracle(epoch, f);
      worst = std::max(worst, std::abs(features::fourier_feature(epoch, f) - want) / std::abs(want));
    }
    for (std::size_t lag : features::FeatureSpec::default_autocorrelation().lags) {
      const double want = oracles::autocorr_oracle(epoch, lag);
      worst = std::max(worst, std::abs(features::autocorr_feature(epoch, lag) - want) / std::abs(want));
    }
  }
  const bool ok = a_sep >= kStagingFloor && std::abs(a_same - 0.2) <= kChanceStagingTol && worst <= kOracleRel;
  return {ok, "separable K=5 " + fmt(a_sep) + " (>= " + fmt(kStagingFloor, 1) + "), identical K=5 " + fmt(a_same) +
                  " (want 0.2+-" + fmt(kChanceStagingTol, 2) + "), feature oracles worst rel " + io::format_double(worst)};
}

Outcome determinism() {
  if (g_runs.empty()) {
    cli("limit", "c12_limit", {"seed=12", "d=[0,1]", "classifiers=[\"cmvg\",\"naive_bayes\"]", "n_rep=2"});
    cli("sweep", "c12_sweep", {"seed=12", "S=[0,1]", "n_rep=2", "n_vec=1000"});
  }
  std::size_t files = 0;
  std::vector<std::string> mismatched;
  for (const auto& run : std::vector<CliRun>(g_runs)) {
    const fs::path replay = run.dir.string() + "_replay";
    fs::remove_all(replay);
    const int code = shell(std::string(ALIMIT_CLI_PATH) + " " + run.subcommand + " --config " +
                           (run.dir / "manifest.json").string() + " --out " + replay.string() + " > /dev/null 2>&1");
    if (code != 0) {
      mismatched.push_back(run.dir.filename().string() + " (replay exit " + std::to_string(code) + ")");
      continue;
    }
    for (const auto& entry : fs::directory_iterator(run.dir)) {
      if (entry.path().extension() != ".csv") continue;
      ++files;
      const fs::path other = replay / entry.path().filename();
      if (!fs::exists(other) || io::read_text(entry.path().string()) != io::read_text(other.string()))
        mismatched.push_back(run.dir.filename().string() + "/" + entry.path().filename().string());
    }
  }
  std::string detail = std::to_string(g_runs.size()) + " runs replayed from manifest.json, " + std::to_string(files) +
                       " CSVs compared";
  for (const auto& m : mismatched) detail += "; differs: " + m;
  return {mismatched.empty() && files > 0, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  app.add_option("--only", only, "run only these criteria (1-12)")->check(CLI::Range(1, 12));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"analytic limit oracle", analytic_limit},
      {"limit curve shape", limit_curve},
      {"classifiers reach the limit", classifiers_at_limit},
      {"grid and Monte Carlo agree", grid_mc_consistency},
      {"gradient correctness", gradient_checks},
      {"DSC control fidelity", dsc_fidelity},
      {"D/S/C sweep replication", sweep_replication},
      {"transform suite", transform_suite},
      {"GDV unit suite", gdv_suite},
      {"layer-wise GDV on digits", embedding_replication},
      {"synthetic sleep staging", synthetic_staging},
      {"manifest replay determinism", determinism}};

  fs::create_directories(kWork);
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}

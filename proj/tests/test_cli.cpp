#include "alimit/io.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const fs::path kScratch = fs::temp_directory_path() / "alimit_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(ALIMIT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string out(const std::string& name) { return (kScratch / name).string(); }

std::string slurp(const fs::path& p) { return alimit::io::read_text(p.string()); }

std::string last_line(const std::string& text) {
  const auto end = text.find_last_not_of('\n');
  const auto start = text.rfind('\n', end);
  return text.substr(start == std::string::npos ? 0 : start + 1, end - (start == std::string::npos ? 0 : start + 1) + 1);
}

struct Scratch {
  Scratch() {
    fs::remove_all(kScratch);
    fs::create_directories(kScratch);
  }
};

}  // namespace

TEST_CASE("configuration errors exit with 2") {
  Scratch s;
  CHECK(run("limit --out " + out("a")) == 2);
  CHECK(run("limit --set seed=1 --set no_such_key=3 --out " + out("a")) == 2);
  CHECK(run("limit --set seed=-4 --out " + out("a")) == 2);
  CHECK(run("limit --set seed --out " + out("a")) == 2);
  CHECK(run("limit --set seed=1 --set method=simpson --out " + out("a")) == 2);
  CHECK(run("sweep --set seed=1 --set 'classifiers=[\"knn\"]' --out " + out("a")) == 2);
  CHECK(run("transform --set seed=1 --set 'transforms=[\"tanh\"]' --out " + out("a")) == 2);
  CHECK(run("nonsense") == 2);
  alimit::io::write_text(out("broken.json"), "{\"seed\": 1,");
  CHECK(run("limit --config " + out("broken.json") + " --out " + out("a")) == 2);
  CHECK(run("limit --config " + out("missing.json") + " --out " + out("a")) == 2);
}

TEST_CASE("input format errors exit with 3") {
  Scratch s;
  std::ofstream(out("bad.idx"), std::ios::binary) << std::string("\x00\x00\x08\x04rest-of-file", 16);
  CHECK(run("embed --set seed=1 --set images=" + out("bad.idx") + " --set labels=" + out("bad.idx") + " --out " +
            out("e")) == 3);
  CHECK(run("gdv --set seed=1 --set input=" + out("none.csv") + " --out " + out("g")) == 3);
  alimit::io::write_text(out("epochs.csv"), "Deep,1,2,3\n");
  CHECK(run("features --set seed=1 --set epochs=" + out("epochs.csv") + " --out " + out("f")) == 3);
}

TEST_CASE("numeric failures exit with 4") {
  Scratch s;
  alimit::io::write_text(out("nan.csv"), "f1,label\n1,0\nnan,0\n2,1\n3,1\n");
  CHECK(run("gdv --set seed=1 --set input=" + out("nan.csv") + " --out " + out("g")) == 4);
}

TEST_CASE("a run creates its output directory and tags every CSV") {
  Scratch s;
  const fs::path dir = kScratch / "nested" / "deeper";
  REQUIRE(run("limit --set seed=3 --set 'd=[0,1]' --set n_rep=1 --set 'classifiers=[\"cmvg\"]' --out " + dir.string()) ==
          0);
  const std::string csv = slurp(dir / "limit.csv");
  CHECK(csv.starts_with("d,a_max,a_perceptron,a_nb,a_nb_rde,a_cmvg\n"));
  CHECK(last_line(csv).starts_with("#manifest: manifest.json config_hash="));
  CHECK(last_line(slurp(dir / "limit_stats.csv")).starts_with("#manifest:"));
  const std::string manifest = slurp(dir / "manifest.json");
  CHECK(manifest.find("\"wall_time_s\"") != std::string::npos);
  CHECK(manifest.find("\"seed\": 3") != std::string::npos);
  CHECK(csv.find("wall") == std::string::npos);
  CHECK(fs::exists(dir / "limit.svg"));
}

TEST_CASE("replaying a manifest reproduces the CSVs byte for byte") {
  Scratch s;
  const std::string args = "sweep --set seed=9 --set n_rep=2 --set 'S=[0,1]' --set n_vec=1000 --set perceptron.epochs=3";
  REQUIRE(run(args + " --threads 1 --out " + out("first")) == 0);
  REQUIRE(run("sweep --config " + out("first") + "/manifest.json --threads 3 --out " + out("replay")) == 0);
  for (const char* f : {"sweep_long.csv", "sweep_summary.csv"})
    CHECK(slurp(kScratch / "first" / f) == slurp(kScratch / "replay" / f));
  CHECK(run("limit --config " + out("first") + "/manifest.json --out " + out("wrong")) == 2);
}

TEST_CASE("config files accept shared keys and per-subcommand sections") {
  Scratch s;
  alimit::io::write_text(out("cfg.json"),
                         R"({"seed": 4, "n_rep": 1, "gdv": {"S": [0, 2], "n_vec": 200}, "sweep": {"n_vec": 100}})");
  REQUIRE(run("gdv --config " + out("cfg.json") + " --set 'C=[0.2]' --out " + out("g")) == 0);
  const std::string csv = slurp(kScratch / "g" / "gdv.csv");
  CHECK(csv.find("10,0,0.2,1,") != std::string::npos);
  CHECK(csv.find("10,2,0.2,1,") != std::string::npos);
}

TEST_CASE("infeasible sweep cells are recorded as failed repetitions") {
  Scratch s;
  REQUIRE(run("sweep --set seed=1 --set n_rep=1 --set 'S=[1]' --set n_vec=2 --set 'classifiers=[\"cmvg\"]' --out " +
              out("s")) == 0);
  const std::string csv = slurp(kScratch / "s" / "sweep_long.csv");
  CHECK(csv.find(",cmvg,,failed") != std::string::npos);
}

TEST_CASE("five labelled stages give a five by five confusion table") {
  Scratch s;
  REQUIRE(run("generate --set seed=2 --set kind=epochs --set n_per_class=6 --out " + out("gen")) == 0);
  REQUIRE(run("features --set seed=2 --set epochs=" + out("gen") + "/epochs.csv --set n_rep=2 --set train_fraction=0.5 --out " +
              out("f")) == 0);
  const std::string csv = slurp(kScratch / "f" / "staging_confusion.csv");
  CHECK(csv.starts_with("assigned,true_0,true_1,true_2,true_3,true_4\n"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
}

TEST_CASE("generated datasets feed the GDV subcommand") {
  Scratch s;
  REQUIRE(run("generate --set seed=5 --set n_vec=200 --set D=3 --out " + out("gen")) == 0);
  const auto train = alimit::io::read_dataset_csv(out("gen") + "/train.csv");
  CHECK(train.rows() == 160);
  CHECK(train.dims() == 3);
  REQUIRE(run("gdv --set seed=5 --set input=" + out("gen") + "/train.csv --out " + out("g")) == 0);
  CHECK(slurp(kScratch / "g" / "gdv.csv").starts_with("rows,dims,classes,gdv\n160,3,2,"));
}

TEST_CASE("help and version exit cleanly") {
  CHECK(run("--help") == 0);
  CHECK(run("--version") == 0);
}

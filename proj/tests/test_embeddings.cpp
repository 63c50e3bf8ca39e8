#include "alimit/embeddings.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <complex>
#include <filesystem>
#include <fstream>

using namespace alimit;
using namespace alimit::embed;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("alimit_test_" + name);
}

void write_raw(const std::filesystem::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream f(p, std::ios::binary);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void put_u32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<unsigned char>(v >> s));
}

features::Epoch sine_epoch(double freq, double amplitude = 1.0) {
  features::Epoch e;
  e.samples.resize(kSpectrumEpochLength);
  for (std::size_t k = 0; k < e.samples.size(); ++k)
    e.samples[k] = amplitude * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(k) / 256.0);
  return e;
}

double dft_magnitude(const std::vector<double>& s, std::size_t bin) {
  std::complex<long double> acc = 0;
  const auto n = static_cast<long double>(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) {
    const long double phase = -2.0L * std::numbers::pi_v<long double> * static_cast<long double>(bin * k % s.size()) / n;
    acc += static_cast<long double>(s[k]) * std::complex<long double>(std::cos(phase), std::sin(phase));
  }
  return static_cast<double>(std::abs(acc));
}

}  // namespace

TEST_CASE("MDS of planar points reproduces their distances") {
  Matrix x(5, 2);
  x << 0, 0, 3, 0, 0, 4, 1, 1, -2, 5;
  const auto r = classical_mds(x, 2);
  CHECK((pairwise_distances(r.coords) - pairwise_distances(x)).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(!r.degenerate);
  CHECK(r.captured == Catch::Approx(1.0).margin(1e-12));
  CHECK(r.index == std::vector<std::size_t>{0, 1, 2, 3, 4});
}

TEST_CASE("MDS of a square embedded in ten dimensions") {
  Matrix x = Matrix::Zero(4, 10);
  x(1, 3) = 1;
  x(2, 7) = 1;
  x(3, 3) = 1;
  x(3, 7) = 1;
  const auto r = classical_mds(x, 2);
  CHECK((pairwise_distances(r.coords) - pairwise_distances(x)).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(r.eigenvalues(0) == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(r.eigenvalues(1) == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(r.eigenvalues(2)) <= 1e-12);
}

TEST_CASE("MDS spectrum is sorted and coordinates are centred") {
  Rng rng(1);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(30, 6);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  const auto r = classical_mds(x, 3);
  for (Eigen::Index i = 1; i < r.eigenvalues.size(); ++i) CHECK(r.eigenvalues(i) <= r.eigenvalues(i - 1));
  CHECK(r.coords.colwise().sum().cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(r.captured > 0.0);
  CHECK(r.captured < 1.0);
}

TEST_CASE("MDS of identical points is all zeros") {
  const auto r = classical_mds(Matrix::Constant(6, 3, 2.5), 2);
  CHECK(r.coords.isZero(0.0));
  CHECK(!r.degenerate);
}

TEST_CASE("MDS from non-Euclidean distance matrices") {
  // Triangle inequality violated: 0-1 and 1-2 are close but 0-2 is far.
  Matrix d(3, 3);
  d << 0, 1, 5, 1, 0, 1, 5, 1, 0;
  const auto r = classical_mds_from_distances(d, 2);
  CHECK(r.degenerate);
  CHECK(r.coords.col(1).isZero(0.0));

  // Only one positive Gram eigenvalue, so a third coordinate cannot exist.
  Matrix e(4, 4);
  e << 0, 0, 0, 1, 0, 0, 1, 0, 0, 1, 0, 2, 1, 0, 2, 0;
  CHECK_THROWS_AS(classical_mds_from_distances(e, 3), NumericError);
  CHECK_THROWS_AS(classical_mds_from_distances(Matrix::Zero(3, 2), 1), ShapeError);
  CHECK_THROWS_AS(classical_mds(Matrix::Zero(2, 3), 2), ShapeError);
}

TEST_CASE("MDS caps the point count with a seeded subsample") {
  Matrix x = Matrix::Random(50, 3);
  const auto a = classical_mds(x, 2, 7, 20);
  const auto b = classical_mds(x, 2, 7, 20);
  CHECK(a.coords.rows() == 20);
  CHECK(a.index == b.index);
  CHECK(std::is_sorted(a.index.begin(), a.index.end()));
}

TEST_CASE("spectrum of a 1 Hz sine peaks at bin 30") {
  std::vector<features::Epoch> epochs{sine_epoch(1.0), features::Epoch{std::vector<double>(kSpectrumEpochLength, 0.0)}};
  const Matrix s = spectrum_preprocess(epochs);
  REQUIRE(s.rows() == 2);
  REQUIRE(s.cols() == 784);
  Eigen::Index peak = 0;
  s.row(0).maxCoeff(&peak);
  CHECK(peak == 30);
  CHECK(s.minCoeff() >= 0.0);
  CHECK(s.maxCoeff() == 1.0);
  CHECK(s.row(1).isZero(0.0));

  // Before the joint rescale each value is sqrt|X_k|, so ratios of squared
  // values follow the direct transform.
  for (std::size_t bin : {3u, 29u, 31u, 200u}) {
    const double ratio = s(0, static_cast<Eigen::Index>(bin)) * s(0, static_cast<Eigen::Index>(bin));
    CHECK(ratio == Catch::Approx(dft_magnitude(epochs[0].samples, bin) / dft_magnitude(epochs[0].samples, 30)).margin(1e-9));
  }
}

TEST_CASE("spectrum edge cases") {
  std::vector<features::Epoch> zeros(3, features::Epoch{std::vector<double>(kSpectrumEpochLength, 0.0)});
  CHECK(spectrum_preprocess(zeros).isZero(0.0));
  std::vector<features::Epoch> short_epoch{features::Epoch{std::vector<double>(100, 1.0)}};
  CHECK_THROWS_AS(spectrum_preprocess(short_epoch), ShapeError);
}

TEST_CASE("recording z-scoring") {
  std::vector<features::Epoch> epochs{sine_epoch(2.0, 3.0), sine_epoch(5.0, 7.0)};
  for (auto& e : epochs)
    for (double& v : e.samples) v += 4.0;
  const auto z = zscore_recording(epochs);
  double sum = 0, sq = 0, n = 0;
  for (const auto& e : z)
    for (double v : e.samples) sum += v, sq += v * v, n += 1;
  CHECK(std::abs(sum / n) <= 1e-9);
  CHECK(sq / n == Catch::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("autoencoder shapes") {
  const AutoencoderSpec spec;
  const auto layers = spec.layers();
  REQUIRE(layers.size() == 6);
  CHECK(layers[2].output_size == 16);
  CHECK(layers[3].output_size == 64);
  CHECK(layers.back().output_size == 784);
  const HeadSpec head;
  CHECK(head.layers().back().activation == nn::Activation::softmax);
  CHECK(head.layers().back().output_size == 10);
}

TEST_CASE("a small autoencoder beats the mean predictor") {
  AutoencoderSpec spec;
  spec.input_size = 8;
  spec.encoder = {6, 3};
  // Rows on a two-parameter family, so a width-3 bottleneck suffices.
  Rng rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix data(256, 8);
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    const double a = u(rng), b = u(rng);
    for (Eigen::Index c = 0; c < 8; ++c) data(r, c) = c < 4 ? a * (c + 1) / 4.0 : b * (8 - c) / 4.0;
  }
  nn::TrainConfig cfg;
  cfg.validation_fraction = 0.0;
  cfg.max_epochs = 200;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.01;
  cfg.seed = 3;
  const auto result = train_autoencoder(data, spec, cfg);
  const Vector mean = data.colwise().mean().transpose();
  CHECK(result.loss_history.back() < result.loss_history.front());
  CHECK(reconstruction_mse(result.model, data) < 0.5 * mean_predictor_mse(mean, data));
  CHECK(mean_predictor_mse(data.row(0).transpose(), data.topRows(1)) == 0.0);
}

TEST_CASE("autoencoder input checks") {
  AutoencoderSpec spec;
  spec.input_size = 4;
  spec.encoder = {2};
  nn::TrainConfig cfg;
  CHECK_THROWS_AS(train_autoencoder(Matrix::Constant(3, 4, 2.0), spec, cfg), DomainError);
  CHECK_THROWS_AS(train_autoencoder(Matrix::Zero(3, 5), spec, cfg), ShapeError);
}

TEST_CASE("layer GDV profile") {
  Rng rng(4);
  std::uniform_real_distribution<double> u(0.0, 0.4);
  Matrix x(200, 6);
  Labels y;
  for (Eigen::Index r = 0; r < 200; ++r) {
    const int c = static_cast<int>(r % 2);
    for (Eigen::Index f = 0; f < 5; ++f) x(r, f) = u(rng) + 0.5 * c;
    x(r, 5) = 0.0;
    y.push_back(c);
  }
  HeadSpec spec;
  spec.input_size = 6;
  spec.encoder = {8, 4};
  spec.classes = 2;
  nn::TrainConfig cfg;
  cfg.max_epochs = 20;
  cfg.batch_size = 20;
  cfg.seed = 5;
  const auto model = train_head(x, y, spec, cfg).model;
  ProfileOptions opt;
  opt.layers = 3;
  opt.mds_dim = 2;
  const auto profile = layer_gdv_profile(model, x, y, opt);
  REQUIRE(profile.size() == 3);
  CHECK(profile[0].width == 6);
  CHECK(profile[0].dropped == 1);
  CHECK(profile[0].gdv == Catch::Approx(metrics::gdv(x.leftCols(5), y)).epsilon(1e-12));
  CHECK(profile[1].width == 8);
  REQUIRE(profile[2].mds.has_value());
  CHECK(profile[2].mds->coords.rows() == 200);
  opt.layers = 5;
  CHECK_THROWS_AS(layer_gdv_profile(model, x, y, opt), ConfigError);
}

TEST_CASE("IDX files round-trip and reject bad input") {
  std::vector<unsigned char> images;
  put_u32(images, kIdxImageMagic);
  put_u32(images, 2);
  put_u32(images, 2);
  put_u32(images, 2);
  for (unsigned char v : {0, 255, 51, 102, 1, 2, 3, 4}) images.push_back(v);
  std::vector<unsigned char> labels;
  put_u32(labels, kIdxLabelMagic);
  put_u32(labels, 2);
  labels.push_back(7);
  labels.push_back(3);
  const auto img_path = temp_file("images.idx"), lbl_path = temp_file("labels.idx");
  write_raw(img_path, images);
  write_raw(lbl_path, labels);

  const auto data = load_idx_dataset(img_path.string(), lbl_path.string());
  REQUIRE(data.features.rows() == 2);
  REQUIRE(data.features.cols() == 4);
  CHECK(data.features(0, 1) == 1.0);
  CHECK(data.features(0, 2) == 0.2);
  CHECK(data.labels == Labels{7, 3});
  CHECK(load_idx_images(img_path.string(), 1).rows() == 1);

  auto bad = images;
  bad[3] = 0x01;
  write_raw(img_path, bad);
  CHECK_THROWS_AS(load_idx_images(img_path.string()), FormatError);
  write_raw(img_path, std::vector<unsigned char>(images.begin(), images.end() - 3));
  CHECK_THROWS_AS(load_idx_images(img_path.string()), FormatError);
  CHECK_THROWS_AS(load_idx_labels(img_path.string()), FormatError);
  CHECK_THROWS_AS(load_idx_images(temp_file("missing.idx").string()), InputError);
  std::filesystem::remove(img_path);
  std::filesystem::remove(lbl_path);
}

TEST_CASE("bundled digit files load") {
  const std::string dir = ALIMIT_DATA_DIR "/mnist/";
  const auto data = load_idx_dataset(dir + "images-idx3-ubyte.gz", dir + "labels-idx1-ubyte.gz", 100);
  CHECK(data.features.rows() == 100);
  CHECK(data.features.cols() == 784);
  CHECK(data.features.minCoeff() >= 0.0);
  CHECK(data.features.maxCoeff() <= 1.0);
  CHECK(*std::max_element(data.labels.begin(), data.labels.end()) <= 9);
}

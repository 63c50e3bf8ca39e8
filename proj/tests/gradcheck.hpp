#pragma once

// Central finite-difference oracle for network gradients, shared by the unit
// tests and the acceptance run.

#include "alimit/neuralnet.hpp"

namespace gradcheck {

using namespace alimit;

struct Outcome {
  std::size_t checked = 0;
  std::size_t failed = 0;
  double worst_relative = 0.0;
};

/// Compares every analytic gradient entry with (L(w+h) - L(w-h)) / 2h.
/// An entry passes when |a - f| <= rel * max(|a|, |f|) + abs_floor.
inline Outcome check(const nn::MlpModel& model, const Matrix& x, const Matrix& t, nn::Loss loss, double h = 1e-5,
                     double rel = 1e-4, double abs_floor = 1e-8) {
  const nn::Gradients g = nn::backward(model, x, t, loss);
  Outcome out;
  nn::MlpModel probe = model;
  auto compare = [&](double analytic, double& param) {
    const double saved = param;
    param = saved + h;
    const double up = nn::evaluate_loss(probe, x, t, loss);
    param = saved - h;
    const double down = nn::evaluate_loss(probe, x, t, loss);
    param = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double diff = std::abs(analytic - numeric);
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    ++out.checked;
    if (scale > 0.0) out.worst_relative = std::max(out.worst_relative, diff / scale);
    if (diff > rel * scale + abs_floor) ++out.failed;
  };
  for (std::size_t k = 0; k < model.layer_count(); ++k) {
    for (Eigen::Index r = 0; r < model.weights[k].rows(); ++r)
      for (Eigen::Index c = 0; c < model.weights[k].cols(); ++c) compare(g.weights[k](r, c), probe.weights[k](r, c));
    for (Eigen::Index r = 0; r < model.biases[k].size(); ++r) compare(g.biases[k](r), probe.biases[k](r));
  }
  return out;
}

/// A random network of at most 50 parameters with a random batch and
/// matching targets. Even seeds use softmax + crossentropy, odd seeds squared
/// error with a linear or relu output.
struct Case {
  nn::MlpModel model;
  Matrix x;
  Matrix t;
  nn::Loss loss;
};

inline Case random_case(std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> width(1, 4);
  std::uniform_int_distribution<std::size_t> depth(1, 3);
  std::normal_distribution<double> normal(0.0, 1.0);
  const bool classification = seed % 2 == 0;
  for (;;) {
    const std::size_t layers = depth(rng);
    std::vector<std::size_t> w{width(rng)};
    for (std::size_t k = 0; k < layers; ++k) w.push_back(width(rng));
    if (classification && w.back() < 2) w.back() = 2;
    std::vector<nn::LayerSpec> specs;
    for (std::size_t k = 0; k < layers; ++k) {
      nn::Activation a = (rng() % 2 == 0) ? nn::Activation::relu : nn::Activation::linear;
      if (k + 1 == layers) a = classification ? nn::Activation::softmax : a;
      specs.push_back({w[k], w[k + 1], a});
    }
    nn::MlpModel m = nn::init_model(specs, rng());
    if (m.parameter_count() > 50) continue;
    for (auto& b : m.biases)
      for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = 0.1 * normal(rng);
    const auto n = static_cast<Eigen::Index>(2 + rng() % 5);
    Matrix x(n, static_cast<Eigen::Index>(w.front()));
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = normal(rng);
    Matrix t;
    if (classification) {
      Labels y(static_cast<std::size_t>(n));
      for (auto& v : y) v = static_cast<int>(rng() % w.back());
      t = one_hot(y, w.back());
    } else {
      t.resize(n, static_cast<Eigen::Index>(w.back()));
      for (Eigen::Index i = 0; i < t.size(); ++i) t(i) = normal(rng);
    }
    return {std::move(m), std::move(x), std::move(t),
            classification ? nn::Loss::categorical_crossentropy : nn::Loss::mean_squared_error};
  }
}

}  // namespace gradcheck

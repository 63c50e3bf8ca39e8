#pragma once

// Versioned binary container for trained models:
//   "ALIM" | u16 version | u16 module id | u64 payload length | payload
// All integers and doubles are little-endian.

#include "alimit/classifiers.hpp"
#include "alimit/neuralnet.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace alimit::io {

inline constexpr std::array<char, 4> kMagic{'A', 'L', 'I', 'M'};
inline constexpr std::uint16_t kFormatVersion = 1;

enum class ModuleId : std::uint16_t { naive_bayes = 1, cmvg = 2, perceptron = 3, rde = 4, mlp = 5 };

class ByteWriter {
 public:
  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T v) {
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    bytes_.insert(bytes_.end(), raw, raw + sizeof(T));
  }

  void put_size(std::size_t n) { put(static_cast<std::uint64_t>(n)); }

  void put_vector(const Vector& v) {
    put_size(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) put(v(i));
  }

  /// Rows, cols, then entries in row-major order.
  void put_matrix(const Matrix& m) {
    put_size(static_cast<std::size_t>(m.rows()));
    put_size(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) put(m(r, c));
  }

  void put_bytes(std::span<const unsigned char> b) { bytes_.insert(bytes_.end(), b.begin(), b.end()); }

  std::vector<unsigned char>& bytes() { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const unsigned char> b) : bytes_(b) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get() {
    need(sizeof(T));
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, raw, sizeof(T));
    return v;
  }

  /// A count, rejected when the remaining bytes could not hold that many
  /// elements of `element_size`.
  std::size_t get_size(std::size_t element_size = 1) {
    const auto n = get<std::uint64_t>();
    if (element_size > 0 && n > remaining() / element_size) throw FormatError("model file: truncated or corrupt size");
    return static_cast<std::size_t>(n);
  }

  Vector get_vector() {
    const auto n = get_size(sizeof(double));
    Vector v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = get<double>();
    return v;
  }

  Matrix get_matrix() {
    const auto rows = get_size(0);
    const auto cols = get_size(0);
    if (cols != 0 && rows > remaining() / sizeof(double) / cols) throw FormatError("model file: truncated matrix");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = get<double>();
    return m;
  }

  std::span<const unsigned char> get_bytes(std::size_t n) {
    need(n);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw FormatError("model file: unexpected end of data");
  }

  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

/// Wraps a payload in the container header.
inline std::vector<unsigned char> wrap(ModuleId id, std::span<const unsigned char> payload) {
  ByteWriter w;
  for (char c : kMagic) w.put(static_cast<unsigned char>(c));
  w.put(kFormatVersion);
  w.put(static_cast<std::uint16_t>(id));
  w.put_size(payload.size());
  w.put_bytes(payload);
  return std::move(w.bytes());
}

struct Container {
  ModuleId module;
  std::span<const unsigned char> payload;
};

inline Container unwrap(std::span<const unsigned char> bytes) {
  ByteReader r(bytes);
  for (char c : kMagic)
    if (r.remaining() < 1 || r.get<unsigned char>() != static_cast<unsigned char>(c))
      throw FormatError("model file: bad magic bytes");
  const auto version = r.get<std::uint16_t>();
  if (version != kFormatVersion) throw FormatError("model file: unsupported version " + std::to_string(version));
  const auto id = r.get<std::uint16_t>();
  if (id < 1 || id > 5) throw FormatError("model file: unknown module id " + std::to_string(id));
  const auto length = r.get<std::uint64_t>();
  if (length != r.remaining()) throw FormatError("model file: payload length mismatch");
  return {static_cast<ModuleId>(id), r.get_bytes(static_cast<std::size_t>(length))};
}

// ---------------------------------------------------------------------------
// Payloads

namespace detail {

inline void put_mlp(ByteWriter& w, const nn::MlpModel& m) {
  w.put_size(m.layer_count());
  for (std::size_t k = 0; k < m.layer_count(); ++k) {
    w.put_size(m.specs[k].input_size);
    w.put_size(m.specs[k].output_size);
    w.put(static_cast<std::uint8_t>(m.specs[k].activation));
    w.put_matrix(m.weights[k]);
    w.put_vector(m.biases[k]);
  }
}

inline nn::MlpModel get_mlp(ByteReader& r) {
  nn::MlpModel m;
  const auto layers = r.get_size(17);
  for (std::size_t k = 0; k < layers; ++k) {
    nn::LayerSpec s;
    s.input_size = r.get_size(0);
    s.output_size = r.get_size(0);
    const auto act = r.get<std::uint8_t>();
    if (act > 2) throw FormatError("model file: unknown activation");
    s.activation = static_cast<nn::Activation>(act);
    Matrix w = r.get_matrix();
    Vector b = r.get_vector();
    if (static_cast<std::size_t>(w.rows()) != s.output_size || static_cast<std::size_t>(w.cols()) != s.input_size ||
        static_cast<std::size_t>(b.size()) != s.output_size)
      throw FormatError("model file: layer shape mismatch");
    m.specs.push_back(s);
    m.weights.push_back(std::move(w));
    m.biases.push_back(std::move(b));
  }
  try {
    nn::validate_specs(m.specs);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("model file: ") + e.what());
  }
  return m;
}

inline void put_nb(ByteWriter& w, const clf::NaiveBayesModel& m) {
  w.put_size(m.classes);
  w.put_size(m.dims);
  w.put_matrix(m.bandwidth);
  for (const auto& per_class : m.samples)
    for (const auto& xs : per_class) w.put_vector(xs.matrix());
}

inline clf::NaiveBayesModel get_nb(ByteReader& r) {
  clf::NaiveBayesModel m;
  m.classes = r.get_size(0);
  m.dims = r.get_size(0);
  m.bandwidth = r.get_matrix();
  if (static_cast<std::size_t>(m.bandwidth.rows()) != m.classes || static_cast<std::size_t>(m.bandwidth.cols()) != m.dims)
    throw FormatError("model file: bandwidth shape mismatch");
  m.samples.resize(m.classes);
  for (auto& per_class : m.samples) {
    per_class.resize(m.dims);
    for (auto& xs : per_class) xs = r.get_vector().array();
  }
  return m;
}

inline void put_cmvg(ByteWriter& w, const clf::CmvgModel& m) {
  w.put_size(m.dims);
  w.put_size(m.classes.size());
  for (const auto& c : m.classes) {
    w.put_vector(c.mu);
    w.put_matrix(c.sigma);
    w.put_matrix(c.precision);
    w.put(c.log_det);
    w.put(static_cast<std::uint8_t>(c.ridge_applied));
  }
}

inline clf::CmvgModel get_cmvg(ByteReader& r) {
  clf::CmvgModel m;
  m.dims = r.get_size(0);
  const auto k = r.get_size(1);
  for (std::size_t i = 0; i < k; ++i) {
    clf::CmvgClass c;
    c.mu = r.get_vector();
    c.sigma = r.get_matrix();
    c.precision = r.get_matrix();
    c.log_det = r.get<double>();
    c.ridge_applied = r.get<std::uint8_t>() != 0;
    const auto d = static_cast<Eigen::Index>(m.dims);
    if (c.mu.size() != d || c.sigma.rows() != d || c.sigma.cols() != d || c.precision.rows() != d ||
        c.precision.cols() != d)
      throw FormatError("model file: CMVG shape mismatch");
    m.classes.push_back(std::move(c));
  }
  return m;
}

inline void put_perceptron(ByteWriter& w, const clf::PerceptronClassifier& m) {
  w.put_vector(m.input_mean);
  w.put_vector(m.input_scale);
  put_mlp(w, m.network);
}

inline clf::PerceptronClassifier get_perceptron(ByteReader& r) {
  clf::PerceptronClassifier m;
  m.input_mean = r.get_vector();
  m.input_scale = r.get_vector();
  m.network = get_mlp(r);
  if (m.input_scale.size() != m.input_mean.size() || m.network.input_size() != m.dims())
    throw FormatError("model file: perceptron shape mismatch");
  return m;
}

}  // namespace detail

inline std::vector<unsigned char> save_mlp(const nn::MlpModel& model) {
  ByteWriter w;
  detail::put_mlp(w, model);
  return wrap(ModuleId::mlp, w.bytes());
}

inline nn::MlpModel load_mlp(std::span<const unsigned char> bytes) {
  const Container c = unwrap(bytes);
  if (c.module != ModuleId::mlp) throw FormatError("model file does not hold a network");
  ByteReader r(c.payload);
  auto m = detail::get_mlp(r);
  if (r.remaining() != 0) throw FormatError("model file: trailing bytes");
  return m;
}

inline std::vector<unsigned char> save_classifier(const clf::Classifier& model);

namespace detail {

inline std::vector<unsigned char> save_base(const clf::BaseClassifier& model) {
  return std::visit([](const auto& m) { return save_classifier(clf::Classifier(m)); }, model);
}

}  // namespace detail

inline std::vector<unsigned char> save_classifier(const clf::Classifier& model) {
  ByteWriter w;
  ModuleId id{};
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, clf::NaiveBayesModel>) {
          id = ModuleId::naive_bayes;
          detail::put_nb(w, m);
        } else if constexpr (std::is_same_v<T, clf::CmvgModel>) {
          id = ModuleId::cmvg;
          detail::put_cmvg(w, m);
        } else if constexpr (std::is_same_v<T, clf::PerceptronClassifier>) {
          id = ModuleId::perceptron;
          detail::put_perceptron(w, m);
        } else {
          id = ModuleId::rde;
          w.put_matrix(m.expansion);
          const auto inner = detail::save_base(m.inner);
          w.put_size(inner.size());
          w.put_bytes(inner);
        }
      },
      model);
  return wrap(id, w.bytes());
}

inline clf::Classifier load_classifier(std::span<const unsigned char> bytes) {
  const Container c = unwrap(bytes);
  ByteReader r(c.payload);
  clf::Classifier out;
  switch (c.module) {
    case ModuleId::naive_bayes: out = detail::get_nb(r); break;
    case ModuleId::cmvg: out = detail::get_cmvg(r); break;
    case ModuleId::perceptron: out = detail::get_perceptron(r); break;
    case ModuleId::rde: {
      clf::RdeWrapper rde;
      rde.expansion = r.get_matrix();
      const auto n = r.get_size(1);
      clf::Classifier inner = load_classifier(r.get_bytes(n));
      std::visit(
          [&](auto&& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, clf::RdeWrapper>)
              throw FormatError("model file: nested RDE wrapper");
            else
              rde.inner = std::move(m);
          },
          std::move(inner));
      out = std::move(rde);
      break;
    }
    case ModuleId::mlp: throw FormatError("model file holds a bare network, not a classifier");
  }
  if (r.remaining() != 0) throw FormatError("model file: trailing bytes");
  return out;
}

inline void write_bytes(const std::string& path, std::span<const unsigned char> bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw InputError("write failed for " + path);
}

inline std::vector<unsigned char> read_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace alimit::io

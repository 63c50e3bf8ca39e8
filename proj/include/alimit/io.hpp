#pragma once

// CSV tables (locale independent), dataset and epoch CSV readers, and small
// SVG line and scatter plots.

#include "alimit/core.hpp"
#include "alimit/features.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace alimit::io {

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

/// Fixed-point text with `digits` decimals.
inline std::string format_fixed(double v, int digits) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, digits);
  return std::string(buf, end);
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw FormatError("not a number: '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tables

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  CsvTable& row(std::vector<std::string> cells) {
    if (cells.size() != header_.size()) throw ShapeError("CSV row width differs from header");
    rows_.push_back(std::move(cells));
    return *this;
  }

  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }

  /// Header, rows, then `#manifest: <ref>` as the last line.
  std::string render(const std::string& manifest_ref) const {
    std::string out;
    auto line = [&out](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
      }
      out += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    out += "#manifest: " + manifest_ref + "\n";
    return out;
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path);
  f << text;
  if (!f) throw InputError("write failed for " + path);
}

inline std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

namespace detail {

/// Non-empty, non-comment lines.
inline std::vector<std::string> data_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    out.push_back(line);
  }
  return out;
}

}  // namespace detail

/// Labelled dataset from CSV: a header row, feature columns, and a final
/// integer column named `label`.
inline LabeledDataset read_dataset_csv(const std::string& path) {
  const auto lines = detail::data_lines(read_text(path));
  if (lines.empty()) throw FormatError(path + ": empty dataset file");
  const auto head = split_csv_line(lines[0]);
  if (head.size() < 2 || head.back() != "label") throw FormatError(path + ": last header column must be 'label'");
  const std::size_t dims = head.size() - 1;
  LabeledDataset data;
  data.features.resize(static_cast<Eigen::Index>(lines.size() - 1), static_cast<Eigen::Index>(dims));
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = split_csv_line(lines[r]);
    if (cells.size() != head.size()) throw FormatError(path + ": line " + std::to_string(r + 1) + " has wrong width");
    for (std::size_t c = 0; c < dims; ++c)
      data.features(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(c)) = parse_double(cells[c]);
    const double label = parse_double(cells.back());
    if (label != std::floor(label) || label < 0) throw FormatError(path + ": labels must be non-negative integers");
    data.labels.push_back(static_cast<int>(label));
  }
  return data;
}

inline std::string render_dataset_csv(const LabeledDataset& data, const std::string& manifest_ref) {
  std::vector<std::string> head;
  for (std::size_t d = 0; d < data.dims(); ++d) head.push_back("f" + std::to_string(d + 1));
  head.push_back("label");
  CsvTable t(head);
  for (std::size_t r = 0; r < data.rows(); ++r) {
    std::vector<std::string> cells;
    for (std::size_t d = 0; d < data.dims(); ++d)
      cells.push_back(format_double(data.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(d))));
    cells.push_back(std::to_string(data.labels[r]));
    t.row(std::move(cells));
  }
  return t.render(manifest_ref);
}

/// Epochs from CSV, one per line: a label (stage name, integer, or empty)
/// followed by the samples. An optional header line starting with `label`
/// is skipped.
inline std::vector<features::Epoch> read_epochs_csv(const std::string& path,
                                                    double sample_rate = features::kDefaultSampleRate) {
  const auto lines = detail::data_lines(read_text(path));
  std::vector<features::Epoch> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto cells = split_csv_line(lines[i]);
    if (i == 0 && cells.front() == "label") continue;
    if (cells.size() < 2) throw FormatError(path + ": epoch line " + std::to_string(i + 1) + " has no samples");
    features::Epoch e;
    e.sample_rate = sample_rate;
    if (!cells.front().empty()) e.label = features::parse_stage_label(cells.front());
    e.samples.reserve(cells.size() - 1);
    for (std::size_t c = 1; c < cells.size(); ++c) e.samples.push_back(parse_double(cells[c]));
    out.push_back(std::move(e));
  }
  return out;
}

/// Epochs as CSV with a `label,s1..sN` header; labels are written as stage
/// names when they fall in the stage table, unlabeled epochs get an empty cell.
inline std::string render_epochs_csv(std::span<const features::Epoch> epochs, const std::string& manifest_ref) {
  std::size_t width = 0;
  for (const auto& e : epochs) width = std::max(width, e.samples.size());
  std::string out = "label";
  for (std::size_t i = 0; i < width; ++i) out += ",s" + std::to_string(i + 1);
  out += '\n';
  for (const auto& e : epochs) {
    if (e.samples.size() != width) throw ShapeError("epochs of different lengths cannot share a CSV");
    if (e.label) {
      const auto l = static_cast<std::size_t>(*e.label);
      out += l < features::kStageNames.size() ? std::string(features::kStageNames[l]) : std::to_string(*e.label);
    }
    for (double v : e.samples) out += ',' + format_double(v);
    out += '\n';
  }
  return out + "#manifest: " + manifest_ref + "\n";
}

// ---------------------------------------------------------------------------
// SVG

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

namespace detail {

inline constexpr std::array<const char*, 10> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                                      "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

struct Frame {
  double x0, x1, y0, y1;
  static constexpr double width = 480, height = 360, left = 60, right = 130, top = 30, bottom = 50;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
  double py(double y) const { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); }
};

inline Frame make_frame(double x0, double x1, double y0, double y1) {
  if (!(x1 > x0)) x0 -= 0.5, x1 += 0.5;
  if (!(y1 > y0)) y0 -= 0.5, y1 += 0.5;
  return {x0, x1, y0, y1};
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

inline std::string axes(const Frame& f, const std::string& title, const std::string& xlabel, const std::string& ylabel) {
  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"360\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s += "<rect width=\"480\" height=\"360\" fill=\"white\"/>\n";
  const std::string l = format_fixed(Frame::left, 1), r = format_fixed(Frame::width - Frame::right, 1);
  const std::string t = format_fixed(Frame::top, 1), b = format_fixed(Frame::height - Frame::bottom, 1);
  s += "<path d=\"M" + l + " " + t + " V" + b + " H" + r + "\" stroke=\"black\" fill=\"none\"/>\n";
  s += "<text x=\"240\" y=\"18\" text-anchor=\"middle\">" + escape(title) + "</text>\n";
  s += "<text x=\"" + format_fixed((Frame::left + Frame::width - Frame::right) / 2, 1) + "\" y=\"350\" text-anchor=\"middle\">" +
       escape(xlabel) + "</text>\n";
  s += "<text x=\"14\" y=\"180\" text-anchor=\"middle\" transform=\"rotate(-90 14 180)\">" + escape(ylabel) + "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = f.x0 + (f.x1 - f.x0) * k / 4.0, yv = f.y0 + (f.y1 - f.y0) * k / 4.0;
    s += "<text x=\"" + format_fixed(f.px(xv), 1) + "\" y=\"" + format_fixed(Frame::height - Frame::bottom + 14, 1) +
         "\" text-anchor=\"middle\">" + format_fixed(xv, 2) + "</text>\n";
    s += "<text x=\"" + format_fixed(Frame::left - 4, 1) + "\" y=\"" + format_fixed(f.py(yv) + 4, 1) +
         "\" text-anchor=\"end\">" + format_fixed(yv, 2) + "</text>\n";
  }
  return s;
}

}  // namespace detail

inline std::string line_plot(std::span<const Series> series, const std::string& title, const std::string& xlabel,
                             const std::string& ylabel) {
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw ShapeError("series x and y lengths differ");
    for (double v : s.x)
      if (std::isfinite(v)) x0 = std::min(x0, v), x1 = std::max(x1, v);
    for (double v : s.y)
      if (std::isfinite(v)) y0 = std::min(y0, v), y1 = std::max(y1, v);
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  const auto f = detail::make_frame(x0, x1, y0, y1);
  std::string svg = detail::axes(f, title, xlabel, ylabel);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = detail::kPalette[k % detail::kPalette.size()];
    std::string pts;
    for (std::size_t i = 0; i < series[k].x.size(); ++i) {
      if (!std::isfinite(series[k].x[i]) || !std::isfinite(series[k].y[i])) continue;
      pts += format_fixed(f.px(series[k].x[i]), 2) + "," + format_fixed(f.py(series[k].y[i]), 2) + " ";
    }
    svg += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
    const double ly = detail::Frame::top + 14.0 * static_cast<double>(k + 1);
    svg += "<text x=\"" + format_fixed(detail::Frame::width - detail::Frame::right + 8, 1) + "\" y=\"" +
           format_fixed(ly, 1) + "\" fill=\"" + color + "\">" + detail::escape(series[k].name) + "</text>\n";
  }
  return svg + "</svg>\n";
}

/// Two-column points, one colour per label.
inline std::string scatter_plot(const Matrix& points, std::span<const int> labels, const std::string& title) {
  if (points.cols() < 2) throw ShapeError("scatter plot needs two coordinates");
  if (labels.size() != static_cast<std::size_t>(points.rows())) throw ShapeError("label count differs from point count");
  const double x0 = points.rows() ? points.col(0).minCoeff() : 0.0, x1 = points.rows() ? points.col(0).maxCoeff() : 1.0;
  const double y0 = points.rows() ? points.col(1).minCoeff() : 0.0, y1 = points.rows() ? points.col(1).maxCoeff() : 1.0;
  const auto f = detail::make_frame(x0, x1, y0, y1);
  std::string svg = detail::axes(f, title, "MDS 1", "MDS 2");
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const auto label = static_cast<std::size_t>(std::max(labels[static_cast<std::size_t>(i)], 0));
    svg += "<circle cx=\"" + format_fixed(f.px(points(i, 0)), 2) + "\" cy=\"" + format_fixed(f.py(points(i, 1)), 2) +
           "\" r=\"1.5\" fill=\"" + detail::kPalette[label % detail::kPalette.size()] + "\"/>\n";
  }
  return svg + "</svg>\n";
}

}  // namespace alimit::io

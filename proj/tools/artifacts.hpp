#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dlqr/linalg.hpp"

namespace dlqr::cli {

using Json = nlohmann::ordered_json;

/// 17 significant digits with '.' as decimal separator, independent of the
/// locale.
std::string format_double(double v);

Json to_json(const linalg::Matrix& m);
Json to_json(const linalg::Vector& v);

/// Comma-separated table with a header row and LF line endings.
class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header);
  void add_row(const std::vector<std::string>& cells);
  const std::string& str() const { return text_; }

 private:
  std::size_t columns_;
  std::string text_;
};

/// Minimal self-contained SVG plotter: polylines, scatter points, a
/// horizontal reference line and an optional unit circle.
class SvgPlot {
 public:
  SvgPlot(std::string title, std::string x_label, std::string y_label);

  void add_line(const std::vector<double>& x, const std::vector<double>& y,
                std::string color, std::string label);
  void add_scatter(const std::vector<double>& x, const std::vector<double>& y,
                   std::string color);
  void add_hline(double y, std::string color);
  /// Draws the unit circle and keeps one data unit equal on both axes.
  void add_unit_circle();

  std::string render() const;

 private:
  struct Series {
    std::vector<double> x;
    std::vector<double> y;
    std::string color;
    std::string label;
    bool scatter = false;
  };
  struct HLine {
    double y;
    std::string color;
  };

  std::string title_;
  std::string x_label_;
  std::string y_label_;
  std::vector<Series> series_;
  std::vector<HLine> hlines_;
  bool unit_circle_ = false;
};

std::string read_text_file(const std::filesystem::path& path);

/// An output directory whose files are written atomically (temporary file
/// plus rename) and recorded for the manifest.
class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path root);

  void write(const std::string& name, std::string_view content);
  const std::vector<std::string>& files() const { return files_; }

  /// Writes manifest.json last, listing every file written so far.
  void write_manifest(const std::string& command, const std::string& problem_hash,
                      const Json& parameters);

 private:
  void write_atomic(const std::string& name, std::string_view content);

  std::filesystem::path root_;
  std::vector<std::string> files_;
};

}  // namespace dlqr::cli

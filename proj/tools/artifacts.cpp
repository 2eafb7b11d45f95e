#include "artifacts.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <system_error>

#include "cli.hpp"

#ifndef DLQR_VERSION
#define DLQR_VERSION "unknown"
#endif

namespace dlqr::cli {

namespace {

std::string chars(double v, std::chars_format fmt, int precision) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, fmt, precision);
  return std::string(buf, res.ptr);
}

std::string fixed2(double v) { return chars(v, std::chars_format::fixed, 2); }

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void include(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!(lo <= hi)) {
      lo = 0.0;
      hi = 1.0;
    }
    if (hi - lo < 1e-12 * (1.0 + std::abs(lo))) {
      lo -= 0.5;
      hi += 0.5;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
  double span() const { return hi - lo; }
};

}  // namespace

std::string format_double(double v) { return chars(v, std::chars_format::general, 17); }

Json to_json(const linalg::Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json to_json(const linalg::Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

CsvWriter::CsvWriter(const std::vector<std::string>& header) : columns_(header.size()) {
  add_row(header);
}

void CsvWriter::add_row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw Error("csv: row has wrong number of cells");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) text_ += ',';
    text_ += cells[i];
  }
  text_ += '\n';
}

SvgPlot::SvgPlot(std::string title, std::string x_label, std::string y_label)
    : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

void SvgPlot::add_line(const std::vector<double>& x, const std::vector<double>& y,
                       std::string color, std::string label) {
  series_.push_back({x, y, std::move(color), std::move(label), false});
}

void SvgPlot::add_scatter(const std::vector<double>& x, const std::vector<double>& y,
                          std::string color) {
  series_.push_back({x, y, std::move(color), "", true});
}

void SvgPlot::add_hline(double y, std::string color) { hlines_.push_back({y, std::move(color)}); }

void SvgPlot::add_unit_circle() { unit_circle_ = true; }

std::string SvgPlot::render() const {
  constexpr double width = 640, height = 420;
  constexpr double left = 80, right = 20, top = 40, bottom = 50;
  const double pw = width - left - right;
  const double ph = height - top - bottom;

  Range xr, yr;
  for (const auto& s : series_) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) {
        xr.include(s.x[i]);
        yr.include(s.y[i]);
      }
    }
  }
  for (const auto& h : hlines_) yr.include(h.y);
  if (unit_circle_) {
    xr.include(-1.0);
    xr.include(1.0);
    yr.include(-1.0);
    yr.include(1.0);
  }
  xr.finish();
  yr.finish();
  if (unit_circle_) {
    // Equal data units per pixel on both axes.
    const double scale = std::max(xr.span() / pw, yr.span() / ph);
    const double cx = 0.5 * (xr.lo + xr.hi), cy = 0.5 * (yr.lo + yr.hi);
    xr.lo = cx - 0.5 * scale * pw;
    xr.hi = cx + 0.5 * scale * pw;
    yr.lo = cy - 0.5 * scale * ph;
    yr.hi = cy + 0.5 * scale * ph;
  }
  auto px = [&](double x) { return left + (x - xr.lo) / xr.span() * pw; };
  auto py = [&](double y) { return top + (yr.hi - y) / yr.span() * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed2(width)
      << "\" height=\"" << fixed2(height) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << fixed2(width / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
      << xml_escape(title_) << "</text>\n";
  svg << "<rect x=\"" << fixed2(left) << "\" y=\"" << fixed2(top) << "\" width=\"" << fixed2(pw)
      << "\" height=\"" << fixed2(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int k = 0; k <= 4; ++k) {
    const double xv = xr.lo + xr.span() * k / 4.0;
    const double yv = yr.lo + yr.span() * k / 4.0;
    svg << "<text x=\"" << fixed2(px(xv)) << "\" y=\"" << fixed2(top + ph + 16)
        << "\" text-anchor=\"middle\">" << chars(xv, std::chars_format::general, 3) << "</text>\n";
    svg << "<text x=\"" << fixed2(left - 6) << "\" y=\"" << fixed2(py(yv) + 4)
        << "\" text-anchor=\"end\">" << chars(yv, std::chars_format::general, 3) << "</text>\n";
  }
  svg << "<text x=\"" << fixed2(left + pw / 2) << "\" y=\"" << fixed2(height - 10)
      << "\" text-anchor=\"middle\">" << xml_escape(x_label_) << "</text>\n";
  svg << "<text x=\"16\" y=\"" << fixed2(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << fixed2(top + ph / 2) << ")\">" << xml_escape(y_label_) << "</text>\n";

  for (const auto& h : hlines_) {
    svg << "<line x1=\"" << fixed2(left) << "\" x2=\"" << fixed2(left + pw) << "\" y1=\""
        << fixed2(py(h.y)) << "\" y2=\"" << fixed2(py(h.y)) << "\" stroke=\"" << h.color
        << "\" stroke-dasharray=\"4 3\"/>\n";
  }
  if (unit_circle_) {
    svg << "<ellipse cx=\"" << fixed2(px(0.0)) << "\" cy=\"" << fixed2(py(0.0)) << "\" rx=\""
        << fixed2(px(1.0) - px(0.0)) << "\" ry=\"" << fixed2(py(0.0) - py(1.0))
        << "\" fill=\"none\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  }
  for (const auto& s : series_) {
    const std::size_t count = std::min(s.x.size(), s.y.size());
    if (s.scatter) {
      for (std::size_t i = 0; i < count; ++i) {
        if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
        svg << "<circle cx=\"" << fixed2(px(s.x[i])) << "\" cy=\"" << fixed2(py(s.y[i]))
            << "\" r=\"2\" fill=\"" << s.color << "\"/>\n";
      }
      continue;
    }
    // Non-finite values split the polyline.
    std::string points;
    auto flush = [&] {
      if (!points.empty()) {
        svg << "<polyline fill=\"none\" stroke=\"" << s.color << "\" points=\"" << points
            << "\"/>\n";
      }
      points.clear();
    };
    for (std::size_t i = 0; i < count; ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
        flush();
        continue;
      }
      if (!points.empty()) points += ' ';
      points += fixed2(px(s.x[i])) + "," + fixed2(py(s.y[i]));
    }
    flush();
  }

  double legend_y = top + 16;
  for (const auto& s : series_) {
    if (s.label.empty()) continue;
    svg << "<line x1=\"" << fixed2(left + 10) << "\" x2=\"" << fixed2(left + 30)
        << "\" y1=\"" << fixed2(legend_y - 4) << "\" y2=\"" << fixed2(legend_y - 4)
        << "\" stroke=\"" << s.color << "\"/>\n";
    svg << "<text x=\"" << fixed2(left + 35) << "\" y=\"" << fixed2(legend_y) << "\">"
        << xml_escape(s.label) << "</text>\n";
    legend_y += 16;
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("error while reading " + path.string());
  return buf.str();
}

OutputDir::OutputDir(std::filesystem::path root) : root_(std::move(root)) {
  std::error_code ec;
  std::filesystem::create_directories(root_, ec);
  if (ec || !std::filesystem::is_directory(root_)) {
    throw IoError("cannot create output directory " + root_.string() +
                  (ec ? ": " + ec.message() : std::string()));
  }
}

void OutputDir::write_atomic(const std::string& name, std::string_view content) {
  const std::filesystem::path target = root_ / name;
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.close();
    if (!out) throw IoError("error while writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move " + tmp.string() + " into place");
  }
}

void OutputDir::write(const std::string& name, std::string_view content) {
  write_atomic(name, content);
  if (std::find(files_.begin(), files_.end(), name) == files_.end()) files_.push_back(name);
}

void OutputDir::write_manifest(const std::string& command, const std::string& problem_hash,
                               const Json& parameters) {
  Json manifest;
  manifest["command"] = command;
  manifest["problem_hash"] = problem_hash;
  manifest["parameters"] = parameters;
  manifest["toolkit_version"] = DLQR_VERSION;
  manifest["files"] = files_;
  write_atomic("manifest.json", manifest.dump(2) + "\n");
}

}  // namespace dlqr::cli

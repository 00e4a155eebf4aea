#pragma once

// Tabular and graphical output: RFC-4180 CSV with round-trip precision and
// self-contained SVG plots on a fixed 800x600 canvas.

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace qtel::cli {

// ---------------------------------------------------------------------------
// CSV

using Cell = std::variant<std::monostate, double, long long, std::string>;

inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", x);
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add(std::vector<Cell> row) {
    if (row.size() != header_.size()) throw std::logic_error("csv row width does not match header");
    rows_.push_back(std::move(row));
  }

  std::size_t size() const { return rows_.size(); }
  const std::vector<std::string>& header() const { return header_; }

  std::string str() const {
    std::string out;
    auto line = [&](const auto& cells, auto render) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += render(cells[i]);
      }
      out += "\r\n";
    };
    line(header_, [](const std::string& h) { return csv_escape(h); });
    for (const auto& r : rows_)
      line(r, [](const Cell& c) -> std::string {
        if (std::holds_alternative<double>(c)) return format_number(std::get<double>(c));
        if (std::holds_alternative<long long>(c)) return std::to_string(std::get<long long>(c));
        if (std::holds_alternative<std::string>(c)) return csv_escape(std::get<std::string>(c));
        return "";
      });
    return out;
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<Cell>> rows_;
};

// ---------------------------------------------------------------------------
// SVG

struct Series {
  std::string label;
  std::vector<double> x, y;
  std::vector<double> err;  // optional symmetric error bars
  std::string color = "#1f77b4";
  bool markers = false;
  bool line = true;
};

struct Plot {
  std::string title, xlabel, ylabel;
  std::vector<Series> series;
  std::vector<double> vlines;  // reference lines at given x
  std::optional<double> hline;
};

struct BarChart {
  std::string title, ylabel;
  std::vector<std::string> labels;
  std::vector<double> values;
  std::vector<double> reference;  // optional marker per bar
};

namespace detail {

inline constexpr double W = 800, H = 600, ML = 90, MR = 30, MT = 50, MB = 70;

inline std::string esc(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '&': o += "&amp;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

inline std::string num(double v) { return fmt::format("{:.2f}", v); }

// "Nice" tick positions covering [lo, hi].
inline std::vector<double> ticks(double lo, double hi, int target = 6) {
  if (!(hi > lo)) return {lo};
  const double raw = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double norm = raw / mag;
  const double step = (norm < 1.5 ? 1.0 : norm < 3.0 ? 2.0 : norm < 7.0 ? 5.0 : 10.0) * mag;
  std::vector<double> t;
  for (double v = std::ceil(lo / step - 1e-9) * step; v <= hi + 1e-9 * step; v += step)
    t.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
  return t;
}

inline std::string header(const std::string& title) {
  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 600\" width=\"800\" height=\"600\" "
      "font-family=\"sans-serif\" font-size=\"13\">\n"
      "<rect x=\"0\" y=\"0\" width=\"800\" height=\"600\" fill=\"white\"/>\n");
  s += fmt::format("<text x=\"400\" y=\"28\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n", esc(title));
  return s;
}

}  // namespace detail

inline std::string render_svg(const Plot& p) {
  using namespace detail;
  double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
  for (const auto& s : p.series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      const double e = i < s.err.size() && std::isfinite(s.err[i]) ? s.err[i] : 0.0;
      xlo = std::min(xlo, s.x[i]);
      xhi = std::max(xhi, s.x[i]);
      ylo = std::min(ylo, s.y[i] - e);
      yhi = std::max(yhi, s.y[i] + e);
    }
  if (p.hline) {
    ylo = std::min(ylo, *p.hline);
    yhi = std::max(yhi, *p.hline);
  }
  if (!std::isfinite(xlo)) xlo = 0, xhi = 1, ylo = 0, yhi = 1;
  if (!(xhi > xlo)) xhi = xlo + 1;
  if (!(yhi > ylo)) yhi = ylo + 1e-3, ylo -= 1e-3;
  const double pad = 0.05 * (yhi - ylo);
  ylo -= pad;
  yhi += pad;
  const double pw = W - ML - MR, ph = H - MT - MB;
  auto X = [&](double x) { return ML + (x - xlo) / (xhi - xlo) * pw; };
  auto Y = [&](double y) { return MT + (yhi - y) / (yhi - ylo) * ph; };

  std::string s = header(p.title);
  s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", num(ML),
                   num(MT), num(pw), num(ph));
  for (double t : ticks(xlo, xhi)) {
    s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", num(X(t)), num(MT + ph),
                     num(MT + ph + 5));
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{:.4g}</text>\n", num(X(t)), num(MT + ph + 20), t);
  }
  for (double t : ticks(ylo, yhi)) {
    s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", num(ML - 5), num(Y(t)),
                     num(ML));
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.5g}</text>\n", num(ML - 8), num(Y(t) + 4), t);
  }
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", num(ML + pw / 2), num(H - 20),
                   esc(p.xlabel));
  s += fmt::format("<text x=\"20\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 20 {0})\">{1}</text>\n",
                   num(MT + ph / 2), esc(p.ylabel));
  for (double v : p.vlines)
    if (v >= xlo && v <= xhi)
      s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n",
                       num(X(v)), num(MT), num(MT + ph));
  if (p.hline)
    s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n",
                     num(ML), num(Y(*p.hline)), num(ML + pw));

  int legend = 0;
  for (const auto& ser : p.series) {
    if (ser.line) {
      std::string pts;
      for (std::size_t i = 0; i < ser.x.size(); ++i)
        if (std::isfinite(ser.y[i])) pts += fmt::format("{},{} ", num(X(ser.x[i])), num(Y(ser.y[i])));
      s += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n", ser.color, pts);
    }
    for (std::size_t i = 0; i < ser.x.size(); ++i) {
      if (!std::isfinite(ser.y[i])) continue;
      if (i < ser.err.size() && std::isfinite(ser.err[i]) && ser.err[i] > 0)
        s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"{3}\"/>\n", num(X(ser.x[i])),
                         num(Y(ser.y[i] - ser.err[i])), num(Y(ser.y[i] + ser.err[i])), ser.color);
      if (ser.markers)
        s += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"{}\"/>\n", num(X(ser.x[i])), num(Y(ser.y[i])),
                         ser.color);
    }
    const double ly = MT + 18 + 18 * legend++;
    s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"14\" height=\"4\" fill=\"{}\"/>\n", num(ML + pw - 220),
                     num(ly - 6), ser.color);
    s += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", num(ML + pw - 200), num(ly), esc(ser.label));
  }
  s += "</svg>\n";
  return s;
}

inline std::string render_svg(const BarChart& b) {
  using namespace detail;
  double yhi = 0.0;
  for (double v : b.values) yhi = std::max(yhi, v);
  for (double v : b.reference) yhi = std::max(yhi, v);
  if (!(yhi > 0)) yhi = 1.0;
  yhi *= 1.1;
  const double pw = W - ML - MR, ph = H - MT - MB;
  auto Y = [&](double y) { return MT + (yhi - y) / yhi * ph; };
  std::string s = header(b.title);
  s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", num(ML),
                   num(MT), num(pw), num(ph));
  for (double t : ticks(0.0, yhi)) {
    s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", num(ML - 5), num(Y(t)),
                     num(ML));
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.4g}</text>\n", num(ML - 8), num(Y(t) + 4), t);
  }
  s += fmt::format("<text x=\"20\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 20 {0})\">{1}</text>\n",
                   num(MT + ph / 2), esc(b.ylabel));
  const double n = static_cast<double>(std::max<std::size_t>(1, b.values.size()));
  const double slot = pw / n;
  for (std::size_t i = 0; i < b.values.size(); ++i) {
    const double x0 = ML + slot * static_cast<double>(i) + slot * 0.2;
    const double bw = slot * 0.6;
    s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#1f77b4\"/>\n", num(x0),
                     num(Y(b.values[i])), num(bw), num(MT + ph - Y(b.values[i])));
    if (i < b.reference.size())
      s += fmt::format("<line x1=\"{0}\" y1=\"{2}\" x2=\"{1}\" y2=\"{2}\" stroke=\"#d62728\" stroke-width=\"3\"/>\n",
                       num(x0 - 4), num(x0 + bw + 4), num(Y(b.reference[i])));
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", num(x0 + bw / 2),
                     num(MT + ph + 20), esc(i < b.labels.size() ? b.labels[i] : ""));
  }
  s += "</svg>\n";
  return s;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
}

}  // namespace qtel::cli

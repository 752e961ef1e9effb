#include "cylstable/output.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "cylstable/error.hpp"

namespace cylstable {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::ConfigError, "cannot write " + path.string());
  out << text;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                          "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22"};

std::string fmt(double v, int prec = 4) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

struct Axis {
  bool log = false;
  double lo = 0.0, hi = 1.0;  // in transformed units
  double px0 = 0.0, px1 = 1.0;

  double tr(double v) const { return log ? std::log10(v) : v; }
  double map(double v) const { return px0 + (tr(v) - lo) / (hi - lo) * (px1 - px0); }
  bool usable(double v) const { return std::isfinite(v) && (!log || v > 0.0); }

  void fit(double mn, double mx) {
    if (!(mn <= mx)) {
      mn = log ? 0.0 : 0.0;
      mx = 1.0;
    }
    if (mx - mn < 1e-12) {
      const double pad = log ? 0.5 : std::max(1e-3, std::abs(mn) * 0.1);
      mn -= pad;
      mx += pad;
    }
    const double pad = 0.05 * (mx - mn);
    lo = mn - pad;
    hi = mx + pad;
  }

  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      const bool sparse = hi - lo > 1.5;
      for (int e = static_cast<int>(std::floor(lo)); e <= static_cast<int>(std::ceil(hi)); ++e) {
        for (double m : {1.0, 2.0, 5.0}) {
          if (sparse && m != 1.0) continue;
          const double v = m * std::pow(10.0, e);
          if (std::log10(v) >= lo && std::log10(v) <= hi) out.push_back(v);
        }
      }
      return out;
    }
    const double raw = (hi - lo) / 6.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
      if (m * mag >= raw) {
        step = m * mag;
        break;
      }
    }
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) {
      out.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
    }
    return out;
  }
};

}  // namespace

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvTable::add_row(std::vector<Cell> cells) {
  if (cells.size() != header_.size()) {
    throw Error(ErrorCode::InvalidArgument, "CSV row has " + std::to_string(cells.size()) + " cells, header has " +
                                                std::to_string(header_.size()));
  }
  std::vector<std::string> row;
  row.reserve(cells.size());
  for (const auto& c : cells) row.push_back(c.text());
  rows_.push_back(std::move(row));
}

std::string CsvTable::str() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += csv_escape(cells[i]);
    }
    out += '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

void CsvTable::write(const std::filesystem::path& path) const { write_text(path, str()); }

SvgPlot::SvgPlot(std::string title, std::string x_label, std::string y_label, bool log_x, bool log_y)
    : title_(std::move(title)),
      x_label_(std::move(x_label)),
      y_label_(std::move(y_label)),
      log_x_(log_x),
      log_y_(log_y) {}

void SvgPlot::add_series(std::string name, std::vector<double> x, std::vector<double> y, bool lines,
                         bool markers) {
  if (x.size() != y.size()) throw Error(ErrorCode::InvalidArgument, "series x and y differ in length");
  series_.push_back({std::move(name), std::move(x), std::move(y), lines, markers});
}

void SvgPlot::add_band(std::string name, double lo, double hi) { bands_.push_back({std::move(name), lo, hi}); }

void SvgPlot::add_reference(std::string name, double a, double b) { refs_.push_back({std::move(name), a, b}); }

std::string SvgPlot::str() const {
  constexpr double W = 720, H = 440, left = 80, right = 190, top = 40, bottom = 56;
  Axis ax{log_x_}, ay{log_y_};
  ax.px0 = left;
  ax.px1 = W - right;
  ay.px0 = H - bottom;
  ay.px1 = top;

  double xmn = std::numeric_limits<double>::infinity(), xmx = -xmn, ymn = xmn, ymx = -xmn;
  for (const auto& s : series_) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!ax.usable(s.x[i]) || !ay.usable(s.y[i])) continue;
      xmn = std::min(xmn, ax.tr(s.x[i]));
      xmx = std::max(xmx, ax.tr(s.x[i]));
      ymn = std::min(ymn, ay.tr(s.y[i]));
      ymx = std::max(ymx, ay.tr(s.y[i]));
    }
  }
  for (const auto& b : bands_) {
    for (double v : {b.lo, b.hi}) {
      if (!ay.usable(v)) continue;
      ymn = std::min(ymn, ay.tr(v));
      ymx = std::max(ymx, ay.tr(v));
    }
  }
  ax.fit(xmn, xmx);
  ay.fit(ymn, ymx);

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << (ax.px0 + ax.px1) / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
    << xml_escape(title_) << "</text>\n";
  o << "<defs><clipPath id=\"plot\"><rect x=\"" << ax.px0 << "\" y=\"" << ay.px1 << "\" width=\""
    << ax.px1 - ax.px0 << "\" height=\"" << ay.px0 - ay.px1 << "\"/></clipPath></defs>\n";

  for (double t : ax.ticks()) {
    const double px = ax.map(t);
    o << "<line x1=\"" << px << "\" y1=\"" << ay.px0 << "\" x2=\"" << px << "\" y2=\"" << ay.px1
      << "\" stroke=\"#e5e5e5\"/>\n";
    o << "<text x=\"" << px << "\" y=\"" << ay.px0 + 16 << "\" text-anchor=\"middle\">" << fmt(t) << "</text>\n";
  }
  for (double t : ay.ticks()) {
    const double py = ay.map(t);
    o << "<line x1=\"" << ax.px0 << "\" y1=\"" << py << "\" x2=\"" << ax.px1 << "\" y2=\"" << py
      << "\" stroke=\"#e5e5e5\"/>\n";
    o << "<text x=\"" << ax.px0 - 6 << "\" y=\"" << py + 4 << "\" text-anchor=\"end\">" << fmt(t) << "</text>\n";
  }
  o << "<rect x=\"" << ax.px0 << "\" y=\"" << ay.px1 << "\" width=\"" << ax.px1 - ax.px0 << "\" height=\""
    << ay.px0 - ay.px1 << "\" fill=\"none\" stroke=\"black\"/>\n";
  o << "<text x=\"" << (ax.px0 + ax.px1) / 2 << "\" y=\"" << H - 14 << "\" text-anchor=\"middle\">"
    << xml_escape(x_label_) << (log_x_ ? " (log)" : "") << "</text>\n";
  o << "<text transform=\"translate(18," << (ay.px0 + ay.px1) / 2
    << ") rotate(-90)\" text-anchor=\"middle\">" << xml_escape(y_label_) << (log_y_ ? " (log)" : "")
    << "</text>\n";

  o << "<g clip-path=\"url(#plot)\">\n";
  for (const auto& b : bands_) {
    if (!ay.usable(b.lo) || !ay.usable(b.hi)) continue;
    const double y0 = ay.map(b.hi), y1 = ay.map(b.lo);
    o << "<rect x=\"" << ax.px0 << "\" y=\"" << y0 << "\" width=\"" << ax.px1 - ax.px0 << "\" height=\""
      << y1 - y0 << "\" fill=\"#fdd49e\" fill-opacity=\"0.45\"/>\n";
  }
  for (const auto& r : refs_) {
    std::ostringstream pts;
    for (int k = 0; k <= 64; ++k) {
      const double u = ax.lo + (ax.hi - ax.lo) * k / 64.0;
      const double xv = log_x_ ? std::pow(10.0, u) : u;
      const double yv = (log_x_ && log_y_) ? r.a * std::pow(xv, r.b) : r.a + r.b * xv;
      if (!ay.usable(yv)) continue;
      pts << ax.map(xv) << ',' << ay.map(yv) << ' ';
    }
    o << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\"#555\" stroke-dasharray=\"5,4\"/>\n";
  }
  for (std::size_t s = 0; s < series_.size(); ++s) {
    const auto& se = series_[s];
    const char* color = kPalette[s % std::size(kPalette)];
    std::ostringstream pts;
    for (std::size_t i = 0; i < se.x.size(); ++i) {
      if (!ax.usable(se.x[i]) || !ay.usable(se.y[i])) continue;
      pts << ax.map(se.x[i]) << ',' << ay.map(se.y[i]) << ' ';
    }
    if (se.lines) {
      o << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.6\"/>\n";
    }
    if (se.markers) {
      for (std::size_t i = 0; i < se.x.size(); ++i) {
        if (!ax.usable(se.x[i]) || !ay.usable(se.y[i])) continue;
        o << "<circle cx=\"" << ax.map(se.x[i]) << "\" cy=\"" << ay.map(se.y[i]) << "\" r=\"3\" fill=\"" << color
          << "\"/>\n";
      }
    }
  }
  o << "</g>\n";

  double ly = top + 10;
  auto legend = [&](const std::string& name, const std::string& swatch) {
    o << swatch;
    o << "<text x=\"" << W - right + 34 << "\" y=\"" << ly + 4 << "\">" << xml_escape(name) << "</text>\n";
    ly += 18;
  };
  const double lx = W - right + 10;
  for (std::size_t s = 0; s < series_.size(); ++s) {
    std::ostringstream sw;
    sw << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 18 << "\" y2=\"" << ly << "\" stroke=\""
       << kPalette[s % std::size(kPalette)] << "\" stroke-width=\"3\"/>\n";
    legend(series_[s].name, sw.str());
  }
  for (const auto& r : refs_) {
    std::ostringstream sw;
    sw << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 18 << "\" y2=\"" << ly
       << "\" stroke=\"#555\" stroke-dasharray=\"5,4\"/>\n";
    legend(r.name, sw.str());
  }
  for (const auto& b : bands_) {
    std::ostringstream sw;
    sw << "<rect x=\"" << lx << "\" y=\"" << ly - 6 << "\" width=\"18\" height=\"12\" fill=\"#fdd49e\"/>\n";
    legend(b.name, sw.str());
  }
  o << "</svg>\n";
  return o.str();
}

void SvgPlot::write(const std::filesystem::path& path) const { write_text(path, str()); }

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) throw Error(ErrorCode::InvalidArgument, "line fit needs at least two points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0) throw Error(ErrorCode::InvalidArgument, "line fit needs distinct abscissae");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (n > 2) {
    double rss = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - f.intercept - f.slope * x[i];
      rss += r * r;
    }
    f.slope_se = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  }
  return f;
}

}  // namespace cylstable

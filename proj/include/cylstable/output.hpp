#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cylstable {

// Fixed "%.12g" rendering, so CSV bytes depend only on the values.
std::string format_number(double v);

class CsvTable {
 public:
  class Cell {
   public:
    Cell(double v) : text_(format_number(v)) {}
    Cell(int v) : text_(std::to_string(v)) {}
    Cell(std::int64_t v) : text_(std::to_string(v)) {}
    Cell(bool v) : text_(v ? "1" : "0") {}
    Cell(const char* s) : text_(s) {}
    Cell(std::string s) : text_(std::move(s)) {}
    Cell(std::string_view s) : text_(s) {}
    const std::string& text() const noexcept { return text_; }

   private:
    std::string text_;
  };

  explicit CsvTable(std::vector<std::string> header);

  void add_row(std::vector<Cell> cells);
  std::size_t rows() const noexcept { return rows_.size(); }
  std::string str() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// Small line/marker chart written as standalone SVG.
class SvgPlot {
 public:
  SvgPlot(std::string title, std::string x_label, std::string y_label, bool log_x = false, bool log_y = false);

  // Non-finite points, and non-positive ones on log axes, are skipped.
  void add_series(std::string name, std::vector<double> x, std::vector<double> y, bool lines = true,
                  bool markers = true);
  // Shaded horizontal band [lo, hi].
  void add_band(std::string name, double lo, double hi);
  // Straight reference line y = a * x^b on log-log axes, y = a + b x otherwise.
  void add_reference(std::string name, double a, double b);

  std::string str() const;
  void write(const std::filesystem::path& path) const;

 private:
  struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    bool lines;
    bool markers;
  };
  struct Band {
    std::string name;
    double lo;
    double hi;
  };
  struct Reference {
    std::string name;
    double a;
    double b;
  };

  std::string title_, x_label_, y_label_;
  bool log_x_, log_y_;
  std::vector<Series> series_;
  std::vector<Band> bands_;
  std::vector<Reference> refs_;
};

// Least-squares slope and intercept of y on x.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;  // 0 with fewer than three points
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace cylstable

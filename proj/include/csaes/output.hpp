#pragma once

// CSV rows with shortest round-trip number formatting.

#include <charconv>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace csaes {

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return {buf, end};
}

inline std::string format_number(long long v) { return std::to_string(v); }
inline std::string format_number(int v) { return std::to_string(v); }

/// A CSV cell: text, integer, real, or empty (for absent values).
class Cell {
 public:
  Cell(std::string_view s) : text_(s) {}
  Cell(const char* s) : text_(s) {}
  Cell(const std::string& s) : text_(s) {}
  Cell(int v) : text_(format_number(v)) {}
  Cell(long long v) : text_(format_number(v)) {}
  Cell(double v) : text_(format_number(v)) {}
  Cell(std::optional<double> v) : text_(v ? format_number(*v) : std::string()) {}

  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

class CsvWriter {
 public:
  CsvWriter(const std::string& path, std::initializer_list<std::string_view> header)
      : out_(path), columns_(header.size()) {
    if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
    write_line(std::vector<Cell>(header.begin(), header.end()));
  }

  void row(std::initializer_list<Cell> cells) { write_line(std::vector<Cell>(cells)); }

  void close() {
    out_.close();
    if (out_.fail()) throw std::runtime_error("failed writing CSV output");
  }

 private:
  void write_line(const std::vector<Cell>& cells) {
    if (cells.size() != columns_) throw std::logic_error("CSV row width does not match header");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i].text();
    }
    out_ << '\n';
    if (!out_) throw std::runtime_error("failed writing CSV output");
  }

  std::ofstream out_;
  std::size_t columns_;
};

}  // namespace csaes

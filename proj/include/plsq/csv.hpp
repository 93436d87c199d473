#pragma once

#include <cctype>
#include <charconv>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "plsq/dataset.hpp"
#include "plsq/matrix.hpp"

namespace plsq {

namespace detail {

// One RFC-4180 record; handles quoted fields with "" escapes and embedded
// separators/newlines. Returns false at end of input.
inline bool read_csv_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (int ci = in.get(); ; ci = in.get()) {
    if (ci == std::char_traits<char>::eof()) {
      if (!any && field.empty() && fields.empty()) return false;
      fields.push_back(std::move(field));
      return true;
    }
    const char c = static_cast<char>(ci);
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      fields.push_back(std::move(field));
      return true;
    } else if (c == '\r') {
      if (in.peek() == '\n') in.get();
      fields.push_back(std::move(field));
      return true;
    } else {
      field.push_back(c);
    }
  }
}

inline std::string trimmed(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline double parse_cell(const std::string& raw, std::size_t row, std::size_t col) {
  const std::string s = trimmed(raw);
  double value = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    throw ValidationError("csv: non-numeric cell \"" + raw + "\" at row " + std::to_string(row) +
                          ", col " + std::to_string(col));
  return value;
}

}  // namespace detail

// Target column selected by header name or by zero-based index.
using ColumnRef = std::variant<std::string, std::size_t>;

// Reads a rectangular numeric table; the target column becomes y and the
// remaining columns X in file order. A trailing blank line is tolerated.
inline Dataset load_csv(const std::string& path, bool has_header, const ColumnRef& target) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("csv: cannot open " + path);

  std::vector<std::string> fields;
  std::vector<std::string> header;
  std::size_t width = 0;
  std::size_t target_col = 0;

  if (has_header) {
    if (!detail::read_csv_record(in, fields)) throw ValidationError("csv: empty file " + path);
    for (auto& f : fields) header.push_back(detail::trimmed(f));
    width = header.size();
  }

  if (std::holds_alternative<std::string>(target)) {
    const std::string& name = std::get<std::string>(target);
    if (!has_header)
      throw ValidationError("csv: target by name \"" + name + "\" requires a header");
    bool found = false;
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) {
        target_col = j;
        found = true;
        break;
      }
    if (!found) throw ValidationError("csv: target column \"" + name + "\" not found");
  } else {
    target_col = std::get<std::size_t>(target);
  }

  std::vector<Vector> rows;
  std::size_t line = has_header ? 2 : 1;
  while (detail::read_csv_record(in, fields)) {
    if (fields.size() == 1 && detail::trimmed(fields[0]).empty()) {
      ++line;
      continue;  // blank (or trailing) line
    }
    if (width == 0) width = fields.size();
    if (fields.size() != width)
      throw ValidationError("csv: row " + std::to_string(line) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(width));
    Vector row(width);
    for (std::size_t j = 0; j < width; ++j) row[j] = detail::parse_cell(fields[j], line, j + 1);
    rows.push_back(std::move(row));
    ++line;
  }
  if (rows.empty()) throw ValidationError("csv: no data rows in " + path);
  if (target_col >= width)
    throw ValidationError("csv: target column index " + std::to_string(target_col) +
                          " out of range (width " + std::to_string(width) + ")");

  Dataset d;
  const std::size_t n = rows.size(), p = width - 1;
  if (p == 0) throw ValidationError("csv: no predictor columns besides the target");
  d.y.resize(n);
  d.x = Matrix(n, p);
  for (std::size_t i = 0; i < n; ++i) {
    d.y[i] = rows[i][target_col];
    std::size_t jj = 0;
    for (std::size_t j = 0; j < width; ++j) {
      if (j == target_col) continue;
      d.x(i, jj++) = rows[i][j];
    }
  }
  if (has_header) {
    std::vector<std::string> names;
    for (std::size_t j = 0; j < width; ++j)
      if (j != target_col) names.push_back(header[j]);
    d.names = std::move(names);
  }
  d.validate("csv");
  return d;
}

// Decimal with 17 significant digits; locale-independent.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

}  // namespace plsq

#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace pairhop::detail {

using Cell = std::variant<double, long long, bool, std::string>;

// Shortest round-trip decimal for a double; "inf"/"-inf" pass through, NaN is refused.
inline std::string format_double(double x) {
  if (std::isnan(x)) throw std::domain_error("csv: NaN cell");
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return "0";
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

inline std::string quote_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += (c == '\n' || c == '\r') ? ' ' : c;
  }
  return out + "\"";
}

inline std::string format_cell(const Cell& c) {
  if (const double* d = std::get_if<double>(&c)) return format_double(*d);
  if (const long long* i = std::get_if<long long>(&c)) return std::to_string(*i);
  if (const bool* b = std::get_if<bool>(&c)) return *b ? "1" : "0";
  return quote_field(std::get<std::string>(c));
}

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) {
    if (row.size() != columns.size())
      throw std::logic_error("csv: row has " + std::to_string(row.size()) + " cells, header has " +
                             std::to_string(columns.size()));
    rows.push_back(std::move(row));
  }
};

inline void write_csv(std::ostream& os, const Table& t) {
  for (size_t k = 0; k < t.columns.size(); ++k) os << (k ? "," : "") << t.columns[k];
  os << '\n';
  for (const auto& r : t.rows) {
    for (size_t k = 0; k < r.size(); ++k) os << (k ? "," : "") << format_cell(r[k]);
    os << '\n';
  }
}

}  // namespace pairhop::detail

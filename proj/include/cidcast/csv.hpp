#pragma once

#include <charconv>
#include <cmath>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cidcast::csv {

/// Splits one CSV record. Double-quoted fields may contain commas; `""`
/// inside quotes is an escaped quote.
std::vector<std::string> split(std::string_view line, char delim = ',');

/// Header row of a CSV file with case-sensitive column lookup.
class Header {
 public:
  Header() = default;
  explicit Header(std::vector<std::string> names);

  std::optional<std::size_t> find(std::string_view name) const;
  /// Throws std::runtime_error naming the missing column.
  std::size_t require(std::string_view name) const;
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Reads the next non-empty line; strips a trailing '\r'.
bool next_line(std::istream& in, std::string& line);

double parse_double(std::string_view text);  // throws std::invalid_argument
int parse_int(std::string_view text);

/// Shortest round-trip representation; NaN renders as an empty cell.
std::string format_double(double v);

inline std::string format_optional(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string{};
}

}  // namespace cidcast::csv

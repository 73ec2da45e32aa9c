#include "screenlab/csv.hpp"

#include <array>
#include <charconv>
#include <istream>
#include <system_error>

#include "screenlab/errors.hpp"

namespace screenlab::csv {

std::string format(double value) {
  std::array<char, 64> buf{};
  // Shortest representation that round-trips, never more than 17 significant digits.
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) throw std::runtime_error("csv::format failed");
  return std::string(buf.data(), end);
}

std::vector<std::string_view> split(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

double parse_double(std::string_view field, std::size_t row, std::size_t column) {
  double v = 0.0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || field.empty()) {
    throw ParseError("expected a number, got '" + std::string(field) + "'", row, column);
  }
  return v;
}

long long parse_integer(std::string_view field, std::size_t row, std::size_t column) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw ParseError("expected an integer, got '" + std::string(field) + "'", row, column);
  }
  return v;
}

void expect_header(std::istream& in, const std::vector<std::string>& expected) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing header row", 1, 1);
  const auto fields = split(line);
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (i >= fields.size() || fields[i] != expected[i]) {
      throw ParseError("header column should be '" + expected[i] + "'", 1, i + 1);
    }
  }
  if (fields.size() != expected.size()) throw ParseError("unexpected extra header column", 1, expected.size() + 1);
}

}  // namespace screenlab::csv

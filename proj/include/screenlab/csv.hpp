#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace screenlab::csv {

// Locale-independent shortest-exact formatting (17 significant digits at most).
std::string format(double value);

// Splits one line on commas; no quoting is supported or needed by our formats.
std::vector<std::string_view> split(std::string_view line);

// Parse a whole field; ParseError carries the row and column on failure.
double parse_double(std::string_view field, std::size_t row, std::size_t column);
long long parse_integer(std::string_view field, std::size_t row, std::size_t column);

// Reads the header row and checks it matches `expected` exactly.
void expect_header(std::istream& in, const std::vector<std::string>& expected);

}  // namespace screenlab::csv

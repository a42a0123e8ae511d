#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace genepdmp {

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

/// Parses a decimal number or a rational literal such as "1/3".
/// Throws ArgumentError on malformed input.
double parse_number(std::string_view text);

/// Splits on a delimiter and parses each field with parse_number.
std::vector<double> parse_number_list(std::string_view text, char delim = ',');

std::string join_numbers(const std::vector<double>& values, std::string_view delim = ",");

}  // namespace genepdmp

#include "genepdmp/format.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <string>

#include "genepdmp/error.hpp"

namespace genepdmp {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

double parse_decimal(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        throw ArgumentError("cannot parse number '" + std::string(s) + "'");
    }
    return v;
}

}  // namespace

std::string format_double(double v) {
    if (v == 0.0) return "0";
    std::array<char, 64> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc()) throw ArgumentError("cannot format number");
    return std::string(buf.data(), ptr);
}

double parse_number(std::string_view text) {
    const auto slash = text.find('/');
    if (slash == std::string_view::npos) return parse_decimal(text);
    const double num = parse_decimal(text.substr(0, slash));
    const double den = parse_decimal(text.substr(slash + 1));
    if (den == 0.0) throw ArgumentError("zero denominator in '" + std::string(text) + "'");
    return num / den;
}

std::vector<double> parse_number_list(std::string_view text, char delim) {
    std::vector<double> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(delim, start);
        out.push_back(parse_number(text.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string join_numbers(const std::vector<double>& values, std::string_view delim) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += delim;
        out += format_double(values[i]);
    }
    return out;
}

}  // namespace genepdmp

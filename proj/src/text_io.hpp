#pragma once

// Small helpers shared by the text file readers and writers.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace bodymap::detail {

[[noreturn]] void parse_error(std::string_view what, std::size_t line, std::string_view message);

std::string hex(std::uint64_t v);
std::uint64_t parse_hex(std::string_view text);

std::vector<std::string_view> split(std::string_view text, char sep);
std::string_view trim(std::string_view text);

std::uint64_t parse_unsigned(std::string_view text, std::string_view what, std::size_t line);
double parse_double(std::string_view text, std::string_view what, std::size_t line);

/// Round-trippable decimal ("%.17g").
std::string format_double(double v);

/// Fixed decimals; "nan" for NaN.
std::string format_fixed(double v, int decimals);

}  // namespace bodymap::detail

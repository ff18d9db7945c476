#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace cypherprune {

constexpr bool is_space(char c) noexcept {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string_view trim(std::string_view s) noexcept;

/// Collapses every whitespace run to one space and trims both ends.
std::string normalize_whitespace(std::string_view s);

/// Number of UTF-8 code points (continuation bytes are not counted).
std::size_t utf8_length(std::string_view s) noexcept;

std::string to_upper_ascii(std::string_view s);

bool iequals_ascii(std::string_view a, std::string_view b) noexcept;

/// Shortest round-trip decimal rendering of a double.
std::string format_double(double value);

} // namespace cypherprune

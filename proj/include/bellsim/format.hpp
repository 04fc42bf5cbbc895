#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bellsim {

// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);

std::optional<double> parse_double(std::string_view s) noexcept;
std::optional<long> parse_long(std::string_view s) noexcept;
std::optional<std::uint64_t> parse_u64(std::string_view s) noexcept;

std::vector<std::string_view> split_ws(std::string_view s);
std::string_view trim(std::string_view s) noexcept;

}  // namespace bellsim

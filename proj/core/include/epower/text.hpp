#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace epower::text {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);

/// Fixed-point with the given number of decimals (report lines).
std::string format_fixed(double value, int decimals);

/// Strict full-string parses; throw Error{format} naming `what` on failure.
double parse_double(std::string_view s, std::string_view what);
std::uint64_t parse_u64(std::string_view s, std::string_view what);
std::int64_t parse_i64(std::string_view s, std::string_view what);

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);
std::vector<std::string_view> lines(std::string_view s);

std::string hex64(std::uint64_t value);
std::uint64_t parse_hex64(std::string_view s, std::string_view what);

/// 64-bit FNV-1a; used as a content digest, not for security.
std::uint64_t fnv1a64(std::string_view bytes);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace epower::text

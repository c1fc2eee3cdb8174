#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace stratinv {

using json = nlohmann::json;

// Shortest decimal rendering of a time limit: 30 -> "30", 0.5 -> "0.5".
std::string format_limit(double seconds);

// Round to millisecond resolution.
double round_ms(double seconds);

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

// Lowercase hex of the low `digits` nibbles.
std::string hex_digits(std::uint64_t value, int digits);

// Deterministic 64-bit mixer used to derive per-step seeds from a campaign seed.
std::uint64_t splitmix64(std::uint64_t x);

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

json parse_json_file(const std::filesystem::path& path);

// Reads a JSON Lines file; blank lines are skipped.
std::vector<json> read_json_lines(const std::filesystem::path& path);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

bool contains_whitespace(std::string_view s);

}  // namespace stratinv

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace usersim::text {

std::string trim(std::string_view s);
/// Trims and collapses every run of whitespace into one space.
std::string normalize_space(std::string_view s);
std::string to_lower(std::string_view s);
/// Key used for case-insensitive, whitespace-insensitive title matching.
std::string title_key(std::string_view s);

std::vector<std::string> split(std::string_view s, std::string_view sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::vector<std::string> lines(std::string_view s);
std::string first_nonempty_line(std::string_view s);

bool icontains(std::string_view haystack, std::string_view needle);
bool istarts_with(std::string_view s, std::string_view prefix);

/// Lowercased alphanumeric word tokens; any other character separates words.
std::vector<std::string> word_tokens(std::string_view s);

/// RFC 4180 style parsing: quoted fields, doubled quotes, embedded newlines.
std::vector<std::vector<std::string>> parse_csv(std::string_view content);
std::string csv_escape(std::string_view field);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace usersim::text

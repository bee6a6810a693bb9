#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cotforge::io {

std::string read_file(const std::filesystem::path& path);

/// Writes through a sibling temp file and renames it into place, so readers
/// never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Appends one record line with a single write(2) on an O_APPEND descriptor
/// and fsyncs it. `line` must not contain a newline; one is added.
void append_line(const std::filesystem::path& path, std::string_view line);

/// Splits into lines. A trailing fragment without a terminating newline is a
/// torn append and is dropped when `drop_torn_tail` is set.
std::vector<std::string> split_lines(std::string_view text, bool drop_torn_tail = false);

/// Collapses whitespace runs to one space and trims both ends.
std::string normalize_whitespace(std::string_view text);

std::string trim(std::string_view text);
std::string to_lower(std::string_view text);
bool istarts_with(std::string_view text, std::string_view prefix);

/// Hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

}  // namespace cotforge::io

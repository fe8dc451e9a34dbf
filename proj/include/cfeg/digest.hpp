#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace cfeg {

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// SHA-256 of a file's contents. Throws std::runtime_error if unreadable.
std::string file_digest(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file, then renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace cfeg

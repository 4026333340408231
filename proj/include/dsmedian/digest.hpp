#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace dsmedian {

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// Lowercase hex SHA-256 of a file's contents. Throws InvalidInput if the
/// file cannot be read.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace dsmedian

#pragma once

#include <string>

namespace dyno {

/// Hex digest of the SHA-256 of a byte string.
std::string sha256_hex(const std::string& data);

/// Hex digest of a file's contents; throws IoError when unreadable.
std::string sha256_file(const std::string& path);

}  // namespace dyno

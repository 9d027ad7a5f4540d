#pragma once

#include <string>
#include <string_view>

namespace dpcc {

/// Lowercase hex SHA-256 of arbitrary bytes.
std::string sha256_hex(std::string_view bytes);

}  // namespace dpcc

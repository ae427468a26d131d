#pragma once

#include <string>
#include <string_view>

namespace masvqa {

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);

// Standard base64 with padding, no line breaks.
std::string base64_encode(std::string_view bytes);

}  // namespace masvqa

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace masvqa::utf8 {

// Number of code points, counting every byte that is not a continuation byte.
std::size_t length(std::string_view text);

// byte_index[k] is the byte offset of code point k; the table has
// length(text) + 1 entries, the last being text.size().
std::vector<std::size_t> code_point_byte_offsets(std::string_view text);

// Substring by code-point indices [start, end). Indices are clamped.
std::string substr(std::string_view text, std::size_t start, std::size_t end);

}  // namespace masvqa::utf8

#include "masvqa/utf8.hpp"

#include <algorithm>

namespace masvqa::utf8 {

namespace {

bool is_continuation(char c) {
  return (static_cast<unsigned char>(c) & 0xC0u) == 0x80u;
}

}  // namespace

std::size_t length(std::string_view text) {
  return static_cast<std::size_t>(
      std::count_if(text.begin(), text.end(), [](char c) { return !is_continuation(c); }));
}

std::vector<std::size_t> code_point_byte_offsets(std::string_view text) {
  std::vector<std::size_t> offsets;
  offsets.reserve(text.size() + 1);
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (!is_continuation(text[i])) offsets.push_back(i);
  }
  offsets.push_back(text.size());
  return offsets;
}

std::string substr(std::string_view text, std::size_t start, std::size_t end) {
  const auto offsets = code_point_byte_offsets(text);
  const std::size_t n = offsets.size() - 1;
  start = std::min(start, n);
  end = std::clamp(end, start, n);
  return std::string(text.substr(offsets[start], offsets[end] - offsets[start]));
}

}  // namespace masvqa::utf8

#include "masvqa/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>

namespace masvqa {

bool Tensor3::bit_equal(const Tensor3& other) const {
  if (dims_ != other.dims_) return false;
  return std::equal(data_.begin(), data_.end(), other.data_.begin(), [](float a, float b) {
    return std::bit_cast<std::uint32_t>(a) == std::bit_cast<std::uint32_t>(b);
  });
}

std::size_t BoolMatrix::count() const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), char{1}));
}

}  // namespace masvqa

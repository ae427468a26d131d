#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace masvqa {

// Dense row-major rank-3 float tensor, used for [H, L, P] and [H, L, L]
// attention dumps.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t d0, std::size_t d1, std::size_t d2, float fill = 0.0f)
      : dims_{d0, d1, d2}, data_(d0 * d1 * d2, fill) {}

  std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  const std::array<std::size_t, 3>& shape() const { return dims_; }
  std::size_t size() const { return data_.size(); }

  float& operator()(std::size_t a, std::size_t b, std::size_t c) {
    return data_[(a * dims_[1] + b) * dims_[2] + c];
  }
  float operator()(std::size_t a, std::size_t b, std::size_t c) const {
    return data_[(a * dims_[1] + b) * dims_[2] + c];
  }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  // Bit-level equality: NaN payloads and signed zeros are compared exactly.
  bool bit_equal(const Tensor3& other) const;

 private:
  std::array<std::size_t, 3> dims_{0, 0, 0};
  std::vector<float> data_;
};

// Row-major double matrix for relevance and score maps.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<const double> data() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Row-major boolean matrix. Backed by std::vector<char> so rows are
// addressable as spans.
class BoolMatrix {
 public:
  BoolMatrix() = default;
  BoolMatrix(std::size_t rows, std::size_t cols, bool fill = false)
      : rows_(rows), cols_(cols), data_(rows * cols, fill ? 1 : 0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  bool operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c] != 0; }
  void set(std::size_t r, std::size_t c, bool v) { data_[r * cols_ + c] = v ? 1 : 0; }

  std::size_t count() const;

  bool operator==(const BoolMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<char> data_;
};

}  // namespace masvqa

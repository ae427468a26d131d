#include "masvqa/relevance.hpp"

#include <algorithm>
#include <cmath>

#include "masvqa/error.hpp"

namespace masvqa {

Matrix gradient_weighted_head_mean(const Tensor3& attn, const Tensor3& grad) {
  if (attn.shape() != grad.shape()) {
    throw Error(ErrorCode::kShapeMismatch, "attention and gradient shapes differ");
  }
  const std::size_t heads = attn.dim(0), rows = attn.dim(1), cols = attn.dim(2);
  if (heads == 0) throw Error(ErrorCode::kShapeMismatch, "zero attention heads");

  Matrix out(rows, cols);
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t p = 0; p < cols; ++p) {
        const double a = attn(h, i, p);
        const double g = grad(h, i, p);
        if (!std::isfinite(a) || !std::isfinite(g)) {
          throw Error(ErrorCode::kNonFiniteTensor, "non-finite attention or gradient entry");
        }
        out(i, p) += a * std::max(g, 0.0);
      }
    }
  }
  const double inv_heads = 1.0 / static_cast<double>(heads);
  for (std::size_t i = 0; i < rows; ++i) {
    for (double& v : out.row(i)) v *= inv_heads;
  }
  return out;
}

RelevanceMap token_patch_relevance(const Tensor3& cross_attn, const Tensor3& cross_grad) {
  return {gradient_weighted_head_mean(cross_attn, cross_grad), false};
}

RelevanceMap normalize_token_maps(const RelevanceMap& relevance) {
  RelevanceMap out{relevance.values, true};
  for (std::size_t i = 0; i < out.values.rows(); ++i) {
    auto row = out.values.row(i);
    if (row.empty()) continue;
    const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
    const double min = *lo, range = *hi - *lo;
    if (!(range > 0.0)) {
      std::fill(row.begin(), row.end(), 0.0);
      continue;
    }
    for (double& v : row) v = (v - min) / range;
  }
  return out;
}

TokenStrength token_strength(const RelevanceMap& relevance) {
  if (!relevance.normalized) {
    throw Error(ErrorCode::kInvalidArgument, "token strength requires a normalized relevance map");
  }
  const Matrix& r = relevance.values;
  TokenStrength s(r.rows(), 0.0);
  if (r.cols() == 0) return s;
  for (std::size_t i = 0; i < r.rows(); ++i) {
    double sum = 0.0;
    for (double v : r.row(i)) sum += v;
    s[i] = sum / static_cast<double>(r.cols());
  }
  return s;
}

}  // namespace masvqa

#pragma once

#include <vector>

#include "masvqa/tensor.hpp"

namespace masvqa {

// Token-to-patch relevance, [L, P]. Entries are non-negative; once
// normalized, every row is in [0, 1] with row max 0 or 1.
struct RelevanceMap {
  Matrix values;
  bool normalized = false;
};

using TokenStrength = std::vector<double>;

// R[i, p] = mean over heads of attn[h, i, p] * max(grad[h, i, p], 0).
RelevanceMap token_patch_relevance(const Tensor3& cross_attn, const Tensor3& cross_grad);

// Per-row min-max normalization. Constant rows become all zeros.
RelevanceMap normalize_token_maps(const RelevanceMap& relevance);

// s[i] = mean over patches of R[i, :]. Requires a normalized map.
TokenStrength token_strength(const RelevanceMap& relevance);

// Shared by cross- and self-attention paths: mean over heads of
// attn * ReLU(grad), accumulated in double.
Matrix gradient_weighted_head_mean(const Tensor3& attn, const Tensor3& grad);

}  // namespace masvqa

#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "masvqa/dump.hpp"
#include "masvqa/raster.hpp"
#include "masvqa/relevance.hpp"
#include "masvqa/tensor.hpp"

namespace masvqa {

struct TokenWeights {
  std::vector<double> values;  // [L], zero outside the knowledge and question ranges
  double alpha_knowledge = 0.0;
  double alpha_question = 0.0;
  // Sum of alpha-scaled weights before the final rescale to one.
  double pre_normalization_sum = 0.0;
};

struct PatchMask {
  std::size_t grid = 0;
  BoolMatrix bits;  // [g, g], row-major patch order

  std::size_t active() const { return bits.count(); }
  bool operator==(const PatchMask&) const = default;
};

// Softmax(s / tau) inside each token group, balanced across groups by
// softmax([mean_K, mean_Q] / tau), then rescaled to sum to one.
TokenWeights group_weights(std::span<const double> strength, const SequenceLayout& layout,
                           double tau);

// R_hat[i, p] = w[i] * R[i, p].
Matrix weighted_scores(const RelevanceMap& relevance, const TokenWeights& weights);

// Linear interpolation between closest ranks; rho in [0, 100].
double quantile(std::span<const double> row, double rho);

// B[i, p] = R_hat[i, p] > quantile(R_hat[i, :], rho).
BoolMatrix token_threshold_masks(const Matrix& scores, double rho);

// Column-wise OR over tokens, laid out row-major as g x g.
PatchMask compose_mask(const BoolMatrix& token_masks, std::size_t grid);

// Nearest-neighbour upsampling to a [height, width] pixel mask.
BoolMatrix render_mask(const PatchMask& mask, std::size_t width, std::size_t height);

// Pixels outside the mask become white.
RgbImage apply_mask(const RgbImage& image, const BoolMatrix& pixel_mask);

struct MaskParams {
  double tau = 1.0;
  double rho = 90.0;
};

// Full image-side path from a dump: relevance, normalization, strength,
// grouped weights, thresholding and OR composition.
PatchMask build_patch_mask(const AttentionDump& dump, const MaskParams& params);

PatchMask full_patch_mask(std::size_t grid);

}  // namespace masvqa

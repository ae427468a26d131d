#include "masvqa/mask.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "masvqa/error.hpp"

namespace masvqa {

namespace {

// Writes softmax(s[range] / tau) into out[range].
void group_softmax(std::span<const double> s, const TokenRange& range, double tau,
                   std::vector<double>& out) {
  double peak = s[range.begin];
  for (std::size_t i = range.begin; i < range.end; ++i) peak = std::max(peak, s[i]);
  double total = 0.0;
  for (std::size_t i = range.begin; i < range.end; ++i) {
    out[i] = std::exp((s[i] - peak) / tau);
    total += out[i];
  }
  for (std::size_t i = range.begin; i < range.end; ++i) out[i] /= total;
}

double group_mean(std::span<const double> s, const TokenRange& range) {
  double sum = 0.0;
  for (std::size_t i = range.begin; i < range.end; ++i) sum += s[i];
  return sum / static_cast<double>(range.size());
}

}  // namespace

TokenWeights group_weights(std::span<const double> strength, const SequenceLayout& layout,
                           double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw Error(ErrorCode::kNonPositiveTemperature, fmt::format("temperature must be positive, got {}", tau));
  }
  if (layout.knowledge.empty() || layout.question.empty()) {
    throw Error(ErrorCode::kEmptyGroup, "token weighting needs non-empty knowledge and question groups");
  }
  if (layout.knowledge.end > strength.size() || layout.question.end > strength.size()) {
    throw Error(ErrorCode::kShapeMismatch, "token ranges exceed strength vector");
  }

  TokenWeights w;
  w.values.assign(strength.size(), 0.0);
  group_softmax(strength, layout.knowledge, tau, w.values);
  group_softmax(strength, layout.question, tau, w.values);

  const double mean_k = group_mean(strength, layout.knowledge) / tau;
  const double mean_q = group_mean(strength, layout.question) / tau;
  const double peak = std::max(mean_k, mean_q);
  const double ek = std::exp(mean_k - peak), eq = std::exp(mean_q - peak);
  w.alpha_knowledge = ek / (ek + eq);
  w.alpha_question = eq / (ek + eq);

  for (std::size_t i = layout.knowledge.begin; i < layout.knowledge.end; ++i) w.values[i] *= w.alpha_knowledge;
  for (std::size_t i = layout.question.begin; i < layout.question.end; ++i) w.values[i] *= w.alpha_question;

  double total = 0.0;
  for (double v : w.values) total += v;
  w.pre_normalization_sum = total;
  for (double& v : w.values) v /= total;
  return w;
}

Matrix weighted_scores(const RelevanceMap& relevance, const TokenWeights& weights) {
  const Matrix& r = relevance.values;
  if (weights.values.size() != r.rows()) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("{} weights for {} relevance rows", weights.values.size(), r.rows()));
  }
  Matrix out(r.rows(), r.cols());
  for (std::size_t i = 0; i < r.rows(); ++i) {
    for (std::size_t p = 0; p < r.cols(); ++p) out(i, p) = weights.values[i] * r(i, p);
  }
  return out;
}

double quantile(std::span<const double> row, double rho) {
  if (!(rho >= 0.0 && rho <= 100.0)) {
    throw Error(ErrorCode::kOutOfRange, fmt::format("percentile {} outside [0, 100]", rho));
  }
  if (row.empty()) throw Error(ErrorCode::kInvalidArgument, "quantile of an empty row");

  std::vector<double> sorted(row.begin(), row.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = static_cast<double>(sorted.size() - 1) * rho / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  const double value = sorted[lo] + frac * (sorted[hi] - sorted[lo]);
  // Keeps the result between its bracketing ranks under rounding.
  return std::clamp(value, sorted[lo], sorted[hi]);
}

BoolMatrix token_threshold_masks(const Matrix& scores, double rho) {
  BoolMatrix out(scores.rows(), scores.cols());
  if (scores.cols() == 0) return out;
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    const auto row = scores.row(i);
    const double threshold = quantile(row, rho);
    for (std::size_t p = 0; p < row.size(); ++p) out.set(i, p, row[p] > threshold);
  }
  return out;
}

PatchMask compose_mask(const BoolMatrix& token_masks, std::size_t grid) {
  if (grid == 0 || token_masks.cols() != grid * grid) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("{} patch columns cannot form a {}x{} grid", token_masks.cols(), grid, grid));
  }
  PatchMask mask{grid, BoolMatrix(grid, grid)};
  for (std::size_t p = 0; p < token_masks.cols(); ++p) {
    bool any = false;
    for (std::size_t i = 0; i < token_masks.rows() && !any; ++i) any = token_masks(i, p);
    mask.bits.set(p / grid, p % grid, any);
  }
  return mask;
}

BoolMatrix render_mask(const PatchMask& mask, std::size_t width, std::size_t height) {
  const std::size_t g = mask.grid;
  if (g == 0 || width < g || height < g) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("render size {}x{} smaller than grid {}", width, height, g));
  }
  BoolMatrix pixels(height, width);
  for (std::size_t y = 0; y < height; ++y) {
    const std::size_t row = y * g / height;
    for (std::size_t x = 0; x < width; ++x) pixels.set(y, x, mask.bits(row, x * g / width));
  }
  return pixels;
}

RgbImage apply_mask(const RgbImage& image, const BoolMatrix& pixel_mask) {
  if (pixel_mask.rows() != image.height || pixel_mask.cols() != image.width) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("mask {}x{} does not match image {}x{}", pixel_mask.cols(),
                            pixel_mask.rows(), image.width, image.height));
  }
  RgbImage out = image;
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t x = 0; x < image.width; ++x) {
      if (!pixel_mask(y, x)) std::fill_n(out.at(x, y), 3, std::uint8_t{255});
    }
  }
  return out;
}

PatchMask build_patch_mask(const AttentionDump& dump, const MaskParams& params) {
  const SequenceLayout layout = layout_of(dump.meta);
  const RelevanceMap normalized =
      normalize_token_maps(token_patch_relevance(dump.cross_attn, dump.cross_grad));
  const TokenStrength strength = token_strength(normalized);
  const TokenWeights weights = group_weights(strength, layout, params.tau);
  const BoolMatrix token_masks = token_threshold_masks(weighted_scores(normalized, weights), params.rho);
  return compose_mask(token_masks, dump.meta.grid);
}

PatchMask full_patch_mask(std::size_t grid) {
  return {grid, BoolMatrix(grid, grid, true)};
}

}  // namespace masvqa

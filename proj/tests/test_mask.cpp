#include <random>

#include <gtest/gtest.h>

#include "masvqa/dump.hpp"
#include "masvqa/error.hpp"
#include "masvqa/mask.hpp"
#include "oracles.hpp"

using namespace masvqa;

namespace {

SequenceLayout layout(std::size_t kb, std::size_t ke, std::size_t qb, std::size_t qe) {
  SequenceLayout l;
  l.knowledge = {kb, ke};
  l.question = {qb, qe};
  return l;
}

Matrix rows_to_matrix(const std::vector<std::vector<double>>& rows) {
  Matrix m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t p = 0; p < rows[i].size(); ++p) m(i, p) = rows[i][p];
  }
  return m;
}

}  // namespace

TEST(GroupWeights, UniformStrengthIsSymmetric) {
  const std::vector<double> s(6, 0.4);
  const TokenWeights w = group_weights(s, layout(1, 3, 4, 6), 1.0);
  for (std::size_t i : {1u, 2u, 4u, 5u}) EXPECT_DOUBLE_EQ(w.values[i], 0.25);
  EXPECT_EQ(w.values[0], 0.0);
  EXPECT_EQ(w.values[3], 0.0);
}

TEST(GroupWeights, EqualGroupMeansGiveEvenAlpha) {
  // Dyadic values so both group sums are exact.
  const std::vector<double> s{0.0, 0.125, 0.75, 0.0, 0.5, 0.375, 0.0};
  const TokenWeights w = group_weights(s, layout(1, 3, 4, 6), 0.3);
  EXPECT_EQ(w.alpha_knowledge, 0.5);
  EXPECT_EQ(w.alpha_question, 0.5);
}

TEST(GroupWeights, MatchesDirectFormula) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t L = 5 + rng() % 40;
    const std::size_t sep0 = 2 + rng() % (L - 4);
    const std::size_t sep1 = sep0 + 2 + rng() % (L - sep0 - 2);
    std::vector<double> s(L);
    for (double& v : s) v = u(rng);
    const double tau = trial % 2 == 0 ? 1.0 : 0.1 + u(rng);
    const TokenWeights w = group_weights(s, layout(1, sep0, sep0 + 1, sep1), tau);
    const oracle::Weights want = oracle::group_weights(s, 1, sep0, sep0 + 1, sep1, tau);
    double sum = 0.0;
    for (std::size_t i = 0; i < L; ++i) {
      EXPECT_NEAR(w.values[i], want.w[i], 1e-9);
      sum += w.values[i];
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
    EXPECT_NEAR(w.alpha_knowledge, want.alpha_k, 1e-12);
  }
}

TEST(GroupWeights, ShiftInvariant) {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> s(12);
  for (double& v : s) v = u(rng);
  std::vector<double> shifted = s;
  for (double& v : shifted) v += 37.5;
  const auto a = group_weights(s, layout(1, 6, 7, 11), 0.5);
  const auto b = group_weights(shifted, layout(1, 6, 7, 11), 0.5);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-9);
}

TEST(GroupWeights, PreNormalizationSumIsOne) {
  const std::vector<double> s{0.0, 0.9, 0.2, 0.0, 0.4, 0.0};
  EXPECT_NEAR(group_weights(s, layout(1, 3, 4, 5), 1.0).pre_normalization_sum, 1.0, 1e-12);
}

TEST(GroupWeights, Errors) {
  const std::vector<double> s(6, 0.1);
  EXPECT_THROW(group_weights(s, layout(1, 3, 4, 6), 0.0), Error);
  try {
    group_weights(s, layout(1, 1, 2, 5), 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyGroup);
  }
}

TEST(WeightedScores, Examples) {
  RelevanceMap r{rows_to_matrix({{0.2, 0.8}, {1.0, 0.0}}), true};
  TokenWeights w;
  w.values = {1.0, 0.0};
  const Matrix out = weighted_scores(r, w);
  EXPECT_EQ(out(0, 0), 0.2);
  EXPECT_EQ(out(0, 1), 0.8);
  EXPECT_EQ(out(1, 0), 0.0);
  EXPECT_EQ(out(1, 1), 0.0);
}

TEST(Quantile, Examples) {
  const std::vector<double> row{3, 0, 2, 1};
  EXPECT_EQ(quantile(row, 50), 1.5);
  EXPECT_EQ(quantile(row, 0), 0.0);
  EXPECT_EQ(quantile(row, 100), 3.0);
  EXPECT_DOUBLE_EQ(quantile(std::vector<double>{0, 0, 0, 1}, 90), 0.7);
  EXPECT_THROW(quantile(row, 101), Error);
  EXPECT_THROW(quantile(row, -1), Error);
}

TEST(Quantile, MatchesSortedInterpolationOracle) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> row(1 + rng() % 200);
    for (double& v : row) v = u(rng);
    const double rho = 100.0 * u(rng);
    EXPECT_NEAR(quantile(row, rho), oracle::quantile(row, rho), 1e-12);
  }
}

TEST(Threshold, Examples) {
  const BoolMatrix b = token_threshold_masks(rows_to_matrix({{0, 0, 0, 1}, {2, 2, 2, 2}, {1, 0, 3, 0}}), 90);
  EXPECT_EQ(b, [] {
    BoolMatrix m(3, 4);
    m.set(0, 3, true);
    m.set(2, 2, true);
    return m;
  }());
  const BoolMatrix zero = token_threshold_masks(rows_to_matrix({{1, 0, 3, 0}}), 0);
  EXPECT_TRUE(zero(0, 0));
  EXPECT_FALSE(zero(0, 1));
  EXPECT_TRUE(zero(0, 2));
  EXPECT_FALSE(zero(0, 3));
}

TEST(Compose, Examples) {
  EXPECT_EQ(compose_mask(BoolMatrix(3, 4), 2).active(), 0u);
  BoolMatrix one(3, 4);
  one.set(1, 0, true);
  const PatchMask m = compose_mask(one, 2);
  EXPECT_EQ(m.active(), 1u);
  EXPECT_TRUE(m.bits(0, 0));
  EXPECT_THROW(compose_mask(BoolMatrix(3, 5), 2), Error);
}

TEST(Compose, EqualsColumnwiseAny) {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t g = 1 + rng() % 6, L = 1 + rng() % 10;
    BoolMatrix b(L, g * g);
    std::vector<std::vector<bool>> rows(L, std::vector<bool>(g * g));
    for (std::size_t i = 0; i < L; ++i) {
      for (std::size_t p = 0; p < g * g; ++p) {
        rows[i][p] = rng() % 7 == 0;
        b.set(i, p, rows[i][p]);
      }
    }
    const auto want = oracle::column_any(rows, g * g);
    const PatchMask m = compose_mask(b, g);
    for (std::size_t p = 0; p < g * g; ++p) EXPECT_EQ(m.bits(p / g, p % g), want[p]);
  }
}

TEST(Render, PatchBlocks) {
  PatchMask m{2, BoolMatrix(2, 2)};
  m.bits.set(0, 1, true);
  const BoolMatrix px = render_mask(m, 4, 4);
  for (std::size_t y = 0; y < 4; ++y) {
    for (std::size_t x = 0; x < 4; ++x) EXPECT_EQ(px(y, x), y < 2 && x >= 2);
  }
  EXPECT_EQ(render_mask(m, 2, 2), m.bits);
}

TEST(Render, Grid14At224HasSixteenPixelPatches) {
  std::mt19937_64 rng(25);
  PatchMask m{14, BoolMatrix(14, 14)};
  for (std::size_t r = 0; r < 14; ++r) {
    for (std::size_t c = 0; c < 14; ++c) m.bits.set(r, c, rng() % 2 == 0);
  }
  const BoolMatrix px = render_mask(m, 224, 224);
  for (std::size_t r = 0; r < 14; ++r) {
    for (std::size_t c = 0; c < 14; ++c) {
      std::size_t on = 0;
      for (std::size_t y = 16 * r; y < 16 * r + 16; ++y) {
        for (std::size_t x = 16 * c; x < 16 * c + 16; ++x) on += px(y, x) ? 1 : 0;
      }
      EXPECT_EQ(on, m.bits(r, c) ? 256u : 0u);
    }
  }
  EXPECT_EQ(px.count(), 256 * m.active());
}

TEST(ApplyMask, Examples) {
  RgbImage img(4, 4);
  for (std::size_t k = 0; k < img.pixels.size(); ++k) img.pixels[k] = static_cast<std::uint8_t>(k * 5);
  EXPECT_EQ(apply_mask(img, BoolMatrix(4, 4, true)), img);
  EXPECT_EQ(apply_mask(img, BoolMatrix(4, 4, false)), RgbImage(4, 4, 255));

  BoolMatrix checker(4, 4);
  for (std::size_t y = 0; y < 4; ++y) {
    for (std::size_t x = 0; x < 4; ++x) checker.set(y, x, (x + y) % 2 == 0);
  }
  const RgbImage out = apply_mask(img, checker);
  for (std::size_t y = 0; y < 4; ++y) {
    for (std::size_t x = 0; x < 4; ++x) {
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const std::uint8_t want = (x + y) % 2 == 0 ? img.at(x, y)[ch] : 255;
        EXPECT_EQ(out.at(x, y)[ch], want);
      }
    }
  }
}

TEST(BuildPatchMask, ZeroGradientGivesEmptyMask) {
  AttentionDump dump = synth_dump(4, {2, 12, 3, {6, 10}});
  for (float& g : dump.cross_grad.data()) g = 0.0f;
  EXPECT_EQ(build_patch_mask(dump, {}).active(), 0u);
}

TEST(BuildPatchMask, ShrinksAsRhoRises) {
  const AttentionDump dump = synth_dump(8, {2, 16, 7, {8, 14}});
  PatchMask prev = build_patch_mask(dump, {1.0, 0.0});
  for (double rho : {50.0, 90.0, 99.0, 100.0}) {
    const PatchMask next = build_patch_mask(dump, {1.0, rho});
    for (std::size_t r = 0; r < 7; ++r) {
      for (std::size_t c = 0; c < 7; ++c) EXPECT_TRUE(!next.bits(r, c) || prev.bits(r, c));
    }
    prev = next;
  }
  EXPECT_EQ(prev.active(), 0u);
}

TEST(BuildPatchMask, FullMask) {
  EXPECT_EQ(full_patch_mask(3).active(), 9u);
}

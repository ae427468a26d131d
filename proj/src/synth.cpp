#include <array>
#include <string>

#include <fmt/format.h>

#include "masvqa/dump.hpp"
#include "masvqa/error.hpp"
#include "masvqa/utf8.hpp"

namespace masvqa {

namespace {

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // k * 2^-24, exactly representable as float.
  float unit() { return static_cast<float>(next() >> 40) * 0x1p-24f; }

  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(unit() * static_cast<float>(n));
  }

 private:
  std::uint64_t state_;
};

constexpr std::array<const char*, 16> kSyllables = {
    "al", "dro", "va", "ne", "ves", "ic", "u", "lo", "sa", "tor", "mi", "ra", "ken", "do", "pe", "ti"};

std::string make_word(SplitMix64& rng) {
  std::string word;
  const std::size_t syllables = 1 + rng.below(3);
  for (std::size_t k = 0; k < syllables; ++k) word += kSyllables[rng.below(kSyllables.size())];
  return word;
}

void fill_attention(Tensor3& t, SplitMix64& rng) {
  for (std::size_t h = 0; h < t.dim(0); ++h) {
    for (std::size_t i = 0; i < t.dim(1); ++i) {
      double sum = 0.0;
      for (std::size_t p = 0; p < t.dim(2); ++p) {
        t(h, i, p) = rng.unit();
        sum += t(h, i, p);
      }
      if (sum > 0.0) {
        for (std::size_t p = 0; p < t.dim(2); ++p) {
          t(h, i, p) = static_cast<float>(t(h, i, p) / sum);
        }
      }
    }
  }
}

void fill_gradient(Tensor3& t, SplitMix64& rng) {
  for (float& v : t.data()) v = 2.0f * rng.unit() - 1.0f;
}

}  // namespace

AttentionDump synth_dump(std::uint64_t seed, const SynthDims& dims) {
  const auto [sep0, sep1] = dims.sep_positions;
  if (dims.heads == 0 || dims.grid == 0 || !(0 < sep0 && sep0 < sep1 && sep1 < dims.seq_len)) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("illegal synth dims H={} L={} g={} sep=({}, {})", dims.heads,
                            dims.seq_len, dims.grid, sep0, sep1));
  }

  SplitMix64 rng(seed);
  AttentionDump dump;
  DumpMeta& meta = dump.meta;
  meta.heads = dims.heads;
  meta.seq_len = dims.seq_len;
  meta.grid = dims.grid;
  meta.patches = dims.grid * dims.grid;
  meta.block = 7;
  meta.sep_positions = dims.sep_positions;
  meta.offset_mapping.assign(dims.seq_len, OffsetPair{});

  for (std::size_t i = 1; i < sep0; ++i) {
    if (!meta.knowledge_text.empty()) meta.knowledge_text += ' ';
    const std::size_t start = utf8::length(meta.knowledge_text);
    const std::string word = make_word(rng);
    meta.knowledge_text += word;
    meta.offset_mapping[i] = {start, start + utf8::length(word)};
  }
  for (std::size_t i = sep0 + 1; i < sep1; ++i) {
    if (!meta.question_text.empty()) meta.question_text += ' ';
    meta.question_text += make_word(rng);
  }
  meta.question_text += '?';
  meta.truncated = false;
  meta.effective_knowledge_length = utf8::length(meta.knowledge_text);

  const std::size_t H = dims.heads, L = dims.seq_len, P = meta.patches;
  dump.cross_attn = Tensor3(H, L, P);
  dump.cross_grad = Tensor3(H, L, P);
  dump.self_attn = Tensor3(H, L, L);
  dump.self_grad = Tensor3(H, L, L);
  fill_attention(dump.cross_attn, rng);
  fill_gradient(dump.cross_grad, rng);
  fill_attention(dump.self_attn, rng);
  fill_gradient(dump.self_grad, rng);
  return dump;
}

}  // namespace masvqa

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "masvqa/tensor.hpp"

namespace masvqa {

inline constexpr std::string_view kDumpMagic = "MASVQA01";

// Character offsets are Unicode code-point indices into the passage, which is
// what fast tokenizers report. (0, 0) marks special and question tokens.
struct OffsetPair {
  std::size_t start = 0;
  std::size_t end = 0;

  bool empty() const { return end <= start; }
  bool operator==(const OffsetPair&) const = default;
};

struct DumpMeta {
  std::size_t heads = 0;
  std::size_t seq_len = 0;
  std::size_t patches = 0;
  std::size_t grid = 0;
  std::size_t block = 7;
  std::array<std::size_t, 2> sep_positions{0, 0};
  std::vector<OffsetPair> offset_mapping;
  std::string knowledge_text;
  std::string question_text;
  bool truncated = false;
  // Knowledge length (code points) that survived truncation. Equals the full
  // passage length when `truncated` is false.
  std::size_t effective_knowledge_length = 0;

  bool operator==(const DumpMeta&) const = default;
};

struct AttentionDump {
  DumpMeta meta;
  Tensor3 cross_attn;  // [H, L, P]
  Tensor3 cross_grad;  // [H, L, P]
  Tensor3 self_attn;   // [H, L, L]
  Tensor3 self_grad;   // [H, L, L]

  bool bit_equal(const AttentionDump& other) const;
};

// Half-open token index range [begin, end).
struct TokenRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end > begin ? end - begin : 0; }
  bool empty() const { return end <= begin; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
  bool operator==(const TokenRange&) const = default;
};

struct SequenceLayout {
  TokenRange knowledge;
  TokenRange question;
  std::vector<OffsetPair> offset_mapping;
  std::string knowledge_text;
  bool truncated = false;
  std::size_t effective_knowledge_length = 0;
};

// Throws Error with kShapeMismatch / kNonFiniteTensor / kInvalidArgument when
// any dump invariant is violated.
void validate_dump(const AttentionDump& dump);

void write_dump(const AttentionDump& dump, std::ostream& sink);
AttentionDump read_dump(std::istream& source);

void write_dump_file(const AttentionDump& dump, const std::filesystem::path& path);
AttentionDump read_dump_file(const std::filesystem::path& path);

// Knowledge tokens occupy [1, sep0); question tokens occupy [sep0 + 1, sep1).
SequenceLayout layout_of(const DumpMeta& meta);

struct SynthDims {
  std::size_t heads = 2;
  std::size_t seq_len = 16;
  std::size_t grid = 2;
  std::array<std::size_t, 2> sep_positions{8, 14};
};

// Deterministic pseudo-random dump; a pure function of (seed, dims).
//
// Generator: SplitMix64 seeded with `seed`. Each uniform draw takes the top
// 24 bits of the next output, giving u = k * 2^-24 in [0, 1). Draw order:
//   1. knowledge words, one per knowledge token: syllable count 1 + (u*3),
//      then each syllable index (u*16) into a fixed table;
//   2. question words likewise, one per question token;
//   3. cross_attn (u), each (h, i) row rescaled to sum to one;
//   4. cross_grad (2u - 1);
//   5. self_attn (u), each (h, i) row rescaled to sum to one;
//   6. self_grad (2u - 1).
// Words are joined by single spaces; knowledge tokens map to their word's
// code-point span, every other token maps to (0, 0).
AttentionDump synth_dump(std::uint64_t seed, const SynthDims& dims);

}  // namespace masvqa

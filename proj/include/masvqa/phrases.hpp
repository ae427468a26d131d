#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "masvqa/dump.hpp"
#include "masvqa/tensor.hpp"

namespace masvqa {

// Half-open code-point span into the passage text.
struct CharSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  bool operator==(const CharSpan&) const = default;
};

struct Phrase {
  std::string text;
  CharSpan span;
  double score = 0.0;  // diagnostic only

  bool operator==(const Phrase&) const = default;
};

// Non-overlapping phrases in text order.
struct KeywordSet {
  std::vector<Phrase> phrases;

  bool empty() const { return phrases.empty(); }
  std::vector<std::string> texts() const;
  bool operator==(const KeywordSet&) const = default;
};

struct TokenScore {
  std::size_t index = 0;
  double score = 0.0;
};

struct PhraseParams {
  std::size_t top_m = 30;
  std::size_t gap = 3;
  std::size_t max_phrases = 10;
};

// S = mean over heads of self_attn * ReLU(self_grad), [L, L].
Matrix interaction_matrix(const Tensor3& self_attn, const Tensor3& self_grad);

// Score of each knowledge token j: mean of S[i, j] over question tokens i.
std::vector<TokenScore> knowledge_token_scores(const Matrix& interaction, const SequenceLayout& layout);

// Indices of the min(m, n) best-scoring tokens, ties to the lower index,
// returned in ascending index order.
std::vector<std::size_t> select_top_tokens(std::span<const TokenScore> scores, std::size_t m);

// Offset-mapped spans for the given knowledge tokens, clipped to the
// effective (post-truncation) passage length, sorted by start.
std::vector<CharSpan> tokens_to_spans(std::span<const std::size_t> indices, const SequenceLayout& layout);

// Greedy left-to-right merge of spans whose distance b.start - a.end <= gap.
std::vector<CharSpan> merge_spans(std::span<const CharSpan> spans, std::size_t gap);

KeywordSet extract_phrases(std::span<const CharSpan> merged, const SequenceLayout& layout,
                           std::size_t max_phrases, std::span<const TokenScore> token_scores);

// Full text-side path from a dump.
KeywordSet select_phrases(const AttentionDump& dump, const PhraseParams& params);

nlohmann::json to_json(const KeywordSet& keywords);

}  // namespace masvqa

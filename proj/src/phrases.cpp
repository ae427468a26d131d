#include "masvqa/phrases.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "masvqa/error.hpp"
#include "masvqa/relevance.hpp"
#include "masvqa/utf8.hpp"

namespace masvqa {

namespace {

bool is_blank(std::string_view text) {
  return std::all_of(text.begin(), text.end(),
                     [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; });
}

// Offset span of token `index`, clipped to the effective passage length;
// returns false when the token carries no usable span.
bool token_span(const SequenceLayout& layout, std::size_t index, CharSpan& out) {
  if (index >= layout.offset_mapping.size()) return false;
  const OffsetPair& off = layout.offset_mapping[index];
  if (off.empty()) return false;
  const std::size_t end = std::min(off.end, layout.effective_knowledge_length);
  if (off.start >= end) return false;
  out = {off.start, end};
  return true;
}

}  // namespace

std::vector<std::string> KeywordSet::texts() const {
  std::vector<std::string> out;
  out.reserve(phrases.size());
  for (const auto& p : phrases) out.push_back(p.text);
  return out;
}

Matrix interaction_matrix(const Tensor3& self_attn, const Tensor3& self_grad) {
  if (self_attn.dim(1) != self_attn.dim(2)) {
    throw Error(ErrorCode::kShapeMismatch, "self-attention must be square per head");
  }
  return gradient_weighted_head_mean(self_attn, self_grad);
}

std::vector<TokenScore> knowledge_token_scores(const Matrix& interaction, const SequenceLayout& layout) {
  if (layout.question.empty()) throw Error(ErrorCode::kEmptyGroup, "question token range is empty");
  if (layout.question.end > interaction.rows() || layout.knowledge.end > interaction.cols()) {
    throw Error(ErrorCode::kShapeMismatch, "token ranges exceed interaction matrix");
  }
  const double inv_q = 1.0 / static_cast<double>(layout.question.size());
  std::vector<TokenScore> scores;
  scores.reserve(layout.knowledge.size());
  for (std::size_t j = layout.knowledge.begin; j < layout.knowledge.end; ++j) {
    double sum = 0.0;
    for (std::size_t i = layout.question.begin; i < layout.question.end; ++i) sum += interaction(i, j);
    scores.push_back({j, sum * inv_q});
  }
  return scores;
}

std::vector<std::size_t> select_top_tokens(std::span<const TokenScore> scores, std::size_t m) {
  if (m == 0) throw Error(ErrorCode::kInvalidArgument, "top-m needs m >= 1");
  std::vector<TokenScore> ranked(scores.begin(), scores.end());
  const std::size_t keep = std::min(m, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep), ranked.end(),
                    [](const TokenScore& a, const TokenScore& b) {
                      if (a.score != b.score) return a.score > b.score;
                      return a.index < b.index;
                    });
  std::vector<std::size_t> out;
  out.reserve(keep);
  for (std::size_t k = 0; k < keep; ++k) out.push_back(ranked[k].index);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<CharSpan> tokens_to_spans(std::span<const std::size_t> indices, const SequenceLayout& layout) {
  std::vector<CharSpan> spans;
  for (std::size_t index : indices) {
    if (!layout.knowledge.contains(index)) {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("token {} is not a knowledge token", index));
    }
    CharSpan span;
    if (token_span(layout, index, span)) spans.push_back(span);
  }
  std::stable_sort(spans.begin(), spans.end(), [](const CharSpan& a, const CharSpan& b) {
    return a.start != b.start ? a.start < b.start : a.end < b.end;
  });
  return spans;
}

std::vector<CharSpan> merge_spans(std::span<const CharSpan> spans, std::size_t gap) {
  std::vector<CharSpan> merged;
  for (std::size_t k = 0; k < spans.size(); ++k) {
    const CharSpan& s = spans[k];
    if (s.start >= s.end) {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("empty or inverted span [{}, {})", s.start, s.end));
    }
    if (k > 0 && s.start < spans[k - 1].start) {
      throw Error(ErrorCode::kUnsortedInput, "spans must be sorted by start");
    }
    if (!merged.empty() && s.start <= merged.back().end + gap) {
      merged.back().end = std::max(merged.back().end, s.end);
    } else {
      merged.push_back(s);
    }
  }
  return merged;
}

KeywordSet extract_phrases(std::span<const CharSpan> merged, const SequenceLayout& layout,
                           std::size_t max_phrases, std::span<const TokenScore> token_scores) {
  const auto offsets = utf8::code_point_byte_offsets(layout.knowledge_text);
  const std::size_t text_len = offsets.size() - 1;
  const std::string_view text = layout.knowledge_text;

  KeywordSet out;
  std::unordered_set<std::string> seen;
  for (const CharSpan& span : merged) {
    if (span.start >= span.end || span.end > text_len) {
      throw Error(ErrorCode::kOutOfRange,
                  fmt::format("span [{}, {}) outside passage of length {}", span.start, span.end, text_len));
    }
    if (out.phrases.size() >= max_phrases) break;
    std::string phrase(text.substr(offsets[span.start], offsets[span.end] - offsets[span.start]));
    if (is_blank(phrase) || !seen.insert(phrase).second) continue;

    double score = 0.0;
    for (const TokenScore& ts : token_scores) {
      CharSpan tok;
      if (token_span(layout, ts.index, tok) && tok.start < span.end && span.start < tok.end) {
        score = std::max(score, ts.score);
      }
    }
    out.phrases.push_back({std::move(phrase), span, score});
  }
  return out;
}

KeywordSet select_phrases(const AttentionDump& dump, const PhraseParams& params) {
  const SequenceLayout layout = layout_of(dump.meta);
  const Matrix interaction = interaction_matrix(dump.self_attn, dump.self_grad);
  const auto scores = knowledge_token_scores(interaction, layout);
  const auto top = select_top_tokens(scores, params.top_m);
  const auto spans = merge_spans(tokens_to_spans(top, layout), params.gap);

  std::vector<TokenScore> selected;
  for (const TokenScore& s : scores) {
    if (std::binary_search(top.begin(), top.end(), s.index)) selected.push_back(s);
  }
  return extract_phrases(spans, layout, params.max_phrases, selected);
}

nlohmann::json to_json(const KeywordSet& keywords) {
  nlohmann::json phrases = nlohmann::json::array();
  for (const auto& p : keywords.phrases) {
    phrases.push_back({{"text", p.text}, {"start", p.span.start}, {"end", p.span.end}, {"score", p.score}});
  }
  return {{"phrases", std::move(phrases)}};
}

}  // namespace masvqa

#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "masvqa/mask.hpp"
#include "masvqa/phrases.hpp"

namespace masvqa {

inline constexpr std::string_view kImagePlaceholder = "<image>";

// An encoded image as it will travel to the model.
struct ImageRef {
  std::string mime_type;  // e.g. "image/png"
  std::string bytes;
  std::string label;      // "original" or "attention_map"

  bool operator==(const ImageRef&) const = default;
};

struct GenerationParams {
  double temperature = 0.7;
  int max_tokens = 512;
};

struct PromptBundle {
  std::string text;
  std::array<ImageRef, 2> images;  // original first, attention map second
  GenerationParams generation;

  // SHA-256 over the text and both images, each length-prefixed.
  std::string hash() const;
};

struct ExplicitPackage {
  std::vector<std::string> passages;   // retrieval rank order
  std::vector<KeywordSet> keywords;    // one per passage
  PatchMask mask;                      // from the rank-1 passage
};

std::string_view implicit_template();
std::string_view answer_template();

// Single left-to-right pass: substituted values are never re-scanned, so
// literal "{question}" inside a passage survives untouched.
std::string fill_template(std::string_view tmpl,
                          std::initializer_list<std::pair<std::string_view, std::string_view>> values);

// "Knowledge: {passage}\nKeywords: {p1; p2; ...}" blocks joined by a blank line.
std::string format_evidence(const ExplicitPackage& package);

PromptBundle build_implicit_prompt(std::string_view evidence, std::string_view question,
                                   std::array<ImageRef, 2> images = {}, GenerationParams params = {});

PromptBundle build_answer_prompt(std::string_view evidence, std::string_view implicit,
                                 std::string_view question, std::array<ImageRef, 2> images = {},
                                 GenerationParams params = {});

}  // namespace masvqa

#include "masvqa/prompt.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "masvqa/digest.hpp"
#include "masvqa/error.hpp"

namespace masvqa {

namespace detail {
extern const std::string_view kImplicitTemplate;
extern const std::string_view kAnswerTemplate;
}  // namespace detail

namespace {

std::string normalize_newlines(std::string_view in) {
  std::string out;
  out.reserve(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i] == '\r') {
      out += '\n';
      if (i + 1 < in.size() && in[i + 1] == '\n') ++i;
    } else {
      out += in[i];
    }
  }
  return out;
}

void require_question(std::string_view question) {
  if (question.empty()) throw Error(ErrorCode::kInvalidArgument, "question must not be empty");
}

}  // namespace

std::string PromptBundle::hash() const {
  std::string material = fmt::format("{}:", text.size());
  material += text;
  for (const ImageRef& img : images) {
    material += fmt::format("|{}:{}:", img.mime_type, img.bytes.size());
    material += img.bytes;
  }
  return sha256_hex(material);
}

std::string_view implicit_template() { return detail::kImplicitTemplate; }
std::string_view answer_template() { return detail::kAnswerTemplate; }

std::string fill_template(std::string_view tmpl,
                          std::initializer_list<std::pair<std::string_view, std::string_view>> values) {
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    bool replaced = false;
    if (tmpl[pos] == '{') {
      for (const auto& [name, value] : values) {
        if (tmpl.substr(pos + 1, name.size()) == name && pos + 1 + name.size() < tmpl.size() &&
            tmpl[pos + 1 + name.size()] == '}') {
          out += value;
          pos += name.size() + 2;
          replaced = true;
          break;
        }
      }
    }
    if (!replaced) out += tmpl[pos++];
  }
  return normalize_newlines(out);
}

std::string format_evidence(const ExplicitPackage& package) {
  if (package.keywords.size() != package.passages.size()) {
    throw Error(ErrorCode::kShapeMismatch, "one keyword set is required per passage");
  }
  std::string out;
  for (std::size_t i = 0; i < package.passages.size(); ++i) {
    if (i > 0) out += "\n\n";
    out += "Knowledge: ";
    out += package.passages[i];
    out += "\nKeywords: ";
    out += fmt::format("{}", fmt::join(package.keywords[i].texts(), "; "));
  }
  return normalize_newlines(out);
}

PromptBundle build_implicit_prompt(std::string_view evidence, std::string_view question,
                                   std::array<ImageRef, 2> images, GenerationParams params) {
  require_question(question);
  return {fill_template(implicit_template(), {{"evidence", evidence}, {"question", question}}),
          std::move(images), params};
}

PromptBundle build_answer_prompt(std::string_view evidence, std::string_view implicit,
                                 std::string_view question, std::array<ImageRef, 2> images,
                                 GenerationParams params) {
  require_question(question);
  return {fill_template(answer_template(),
                        {{"evidence", evidence}, {"imknowledge", implicit}, {"question", question}}),
          std::move(images), params};
}

}  // namespace masvqa

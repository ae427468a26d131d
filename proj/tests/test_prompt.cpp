#include <sstream>

#include <gtest/gtest.h>

#include "masvqa/digest.hpp"
#include "masvqa/error.hpp"
#include "masvqa/prompt.hpp"
#include "test_support.hpp"

using namespace masvqa;

namespace {

const std::filesystem::path kGolden = MASVQA_GOLDEN_DIR;
const std::filesystem::path kTemplates = MASVQA_TEMPLATE_DIR;

constexpr const char* kQuestion = "When was this plant first described?";
constexpr const char* kImplicit = "The plant is Aldrovanda vesiculosa, first described by Leonard Plukenet in 1696.";

KeywordSet keywords(std::initializer_list<const char*> texts) {
  KeywordSet k;
  for (const char* t : texts) k.phrases.push_back({t, {}, 0.0});
  return k;
}

ExplicitPackage fixture_k5() {
  ExplicitPackage p;
  p.passages = {
      "Aldrovanda vesiculosa, the waterwheel plant, is a carnivorous aquatic plant.",
      "The species was first described in 1696 by Leonard Plukenet.",
      "It is found in Europe, Asia, Africa and Australia.",
      "A template literal {question} must survive untouched.",
      "Traps close in 10\xE2\x80\x93" "20 milliseconds, among the fastest plant movements.",
  };
  p.keywords = {
      keywords({"Aldrovanda vesiculosa", "waterwheel plant", "carnivorous"}),
      keywords({"1696", "Leonard Plukenet"}),
      keywords({"Europe, Asia, Africa"}),
      keywords({}),
      keywords({"10\xE2\x80\x93" "20 milliseconds", "fastest plant movements"}),
  };
  p.mask = full_patch_mask(2);
  return p;
}

std::size_t count_of(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST(Templates, MatchFilesOnDiskAndFrozenHashes) {
  EXPECT_EQ(implicit_template(), testsupport::slurp(kTemplates / "implicit_knowledge.txt"));
  EXPECT_EQ(answer_template(), testsupport::slurp(kTemplates / "final_answer.txt"));
  EXPECT_EQ(sha256_hex(implicit_template()), "472e20dff6d940ff379920dc93721530c81d8203185f1ce023af2411e43c1410");
  EXPECT_EQ(sha256_hex(answer_template()), "32b81b8239b13b3b8973823b3f2f6af2e736381ef877eb390fd75ab2e31a3a44");
}

TEST(Templates, CarryRequiredInstructions) {
  const std::string implicit(implicit_template()), answer(answer_template());
  EXPECT_EQ(implicit.rfind("Synthesize implicit knowledge by integrating the four inputs below.", 0), 0u);
  EXPECT_EQ(count_of(implicit, "Do not answer the question"), 1u);
  EXPECT_EQ(count_of(implicit, "White areas are masked"), 1u);
  EXPECT_EQ(count_of(answer, "White areas are masked"), 1u);
  EXPECT_TRUE(answer.ends_with("Answer:"));
  EXPECT_TRUE(implicit.ends_with("Implicit Knowledge:"));
  EXPECT_EQ(count_of(implicit, "<image>"), 2u);
  EXPECT_EQ(count_of(answer, "<image>"), 2u);
}

TEST(Evidence, Examples) {
  ExplicitPackage p;
  p.passages = {"P"};
  p.keywords = {keywords({"a", "b"})};
  EXPECT_EQ(format_evidence(p), "Knowledge: P\nKeywords: a; b");
  p.keywords = {keywords({})};
  EXPECT_EQ(format_evidence(p), "Knowledge: P\nKeywords: ");
  p.keywords.clear();
  EXPECT_THROW(format_evidence(p), Error);
}

TEST(Evidence, GoldenK5) {
  EXPECT_EQ(format_evidence(fixture_k5()), testsupport::slurp(kGolden / "evidence_k5.txt"));
}

TEST(Evidence, CrlfNormalized) {
  ExplicitPackage p;
  p.passages = {"line one\r\nline two\rthree"};
  p.keywords = {keywords({})};
  EXPECT_EQ(format_evidence(p), "Knowledge: line one\nline two\nthree\nKeywords: ");
}

TEST(ImplicitPrompt, Golden) {
  const PromptBundle b = build_implicit_prompt(format_evidence(fixture_k5()), kQuestion);
  EXPECT_EQ(b.text, testsupport::slurp(kGolden / "implicit_prompt.txt"));
}

TEST(ImplicitPrompt, EmptyEvidenceStillValid) {
  const PromptBundle b = build_implicit_prompt("", kQuestion);
  EXPECT_NE(b.text.find("\nEvidence: \n"), std::string::npos);
  EXPECT_THROW(build_implicit_prompt("", ""), Error);
}

TEST(AnswerPrompt, Golden) {
  const std::string evidence = format_evidence(fixture_k5());
  const PromptBundle b = build_answer_prompt(evidence, kImplicit, kQuestion);
  EXPECT_EQ(b.text, testsupport::slurp(kGolden / "answer_prompt.txt"));
  EXPECT_TRUE(b.text.ends_with("Answer:"));
  const PromptBundle none = build_answer_prompt(evidence, "", kQuestion);
  EXPECT_EQ(none.text, testsupport::slurp(kGolden / "answer_prompt_no_implicit.txt"));
  EXPECT_NE(none.text.find("\nImplicit Knowledge: \n"), std::string::npos);
}

TEST(AnswerPrompt, LiteralPlaceholdersInValuesSurvive) {
  const std::string evidence = format_evidence(fixture_k5());
  const PromptBundle b = build_answer_prompt(evidence, "{evidence} {imknowledge}", kQuestion);
  EXPECT_EQ(count_of(b.text, "{question}"), 1u);
  EXPECT_EQ(count_of(b.text, "{evidence} {imknowledge}"), 1u);
  EXPECT_EQ(count_of(b.text, kQuestion), 1u);
}

TEST(AnswerPrompt, DroppingPhrasesOnlyTouchesKeywordLines) {
  ExplicitPackage with = fixture_k5(), without = fixture_k5();
  for (auto& k : without.keywords) k.phrases.clear();
  const auto a = lines(build_answer_prompt(format_evidence(with), kImplicit, kQuestion).text);
  const auto b = lines(build_answer_prompt(format_evidence(without), kImplicit, kQuestion).text);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) EXPECT_EQ(b[i], "Keywords: ") << "line " << i;
  }
}

TEST(AnswerPrompt, DroppingImplicitOnlyTouchesItsLine) {
  const std::string evidence = format_evidence(fixture_k5());
  const auto a = lines(build_answer_prompt(evidence, kImplicit, kQuestion).text);
  const auto b = lines(build_answer_prompt(evidence, "", kQuestion).text);
  ASSERT_EQ(a.size(), b.size());
  std::size_t diffs = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) {
      ++diffs;
      EXPECT_EQ(b[i], "Implicit Knowledge: ");
    }
  }
  EXPECT_EQ(diffs, 1u);
}

TEST(FillTemplate, SinglePassAndCrlf) {
  EXPECT_EQ(fill_template("{a}{b}{c}", {{"a", "{b}"}, {"b", "x"}}), "{b}x{c}");
  EXPECT_EQ(fill_template("x\r\ny{a", {{"a", "z"}}), "x\ny{a");
}

TEST(PromptHash, StableAndSensitive) {
  const PromptBundle a = build_implicit_prompt("e", "q");
  PromptBundle b = build_implicit_prompt("e", "q");
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(a.hash().size(), 64u);
  b.images[1] = {"image/png", "xyz", "attention_map"};
  EXPECT_NE(a.hash(), b.hash());
  EXPECT_NE(a.hash(), build_implicit_prompt("e", "q2").hash());
}

TEST(Digest, KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(base64_encode("foobar"), "Zm9vYmFy");
  EXPECT_EQ(base64_encode("fo"), "Zm8=");
  EXPECT_EQ(base64_encode(""), "");
}

#include <algorithm>
#include <random>

#include <fmt/format.h>
#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "masvqa/error.hpp"
#include "masvqa/evaluator.hpp"
#include "test_support.hpp"

using namespace masvqa;

namespace {

const std::filesystem::path kFixtures = MASVQA_FIXTURE_DIR;

VqaSample sample(std::string id, QuestionType type, std::vector<std::string> golds,
                 std::vector<std::string> splits = {}) {
  VqaSample s;
  s.sample_id = std::move(id);
  s.question = "q";
  s.question_type = type;
  s.gold_answers = std::move(golds);
  s.split_tags = std::move(splits);
  return s;
}

PredictionRecord answered(std::string id, std::string answer) {
  PredictionRecord r;
  r.sample_id = std::move(id);
  r.answer = std::move(answer);
  return r;
}

PredictionRecord failed(std::string id) {
  PredictionRecord r;
  r.sample_id = std::move(id);
  r.error = "kTimeout: slow";
  return r;
}

class CountingJudge final : public AnswerJudge {
 public:
  std::string name() const override { return "counting"; }
  bool correct(const VqaSample&, std::string_view pred) override {
    ++calls;
    return pred == "yes";
  }
  int calls = 0;
};

}  // namespace

TEST(Normalize, Examples) {
  EXPECT_EQ(normalize_answer("The  Eiffel Tower!"), "eiffel tower");
  EXPECT_EQ(normalize_answer(""), "");
  EXPECT_EQ(normalize_answer("A cat, a hat"), "cat hat");
  EXPECT_EQ(normalize_answer("  Theatre  "), "theatre");
  EXPECT_EQ(normalize_answer("M\xC3\xBCller"), "m\xC3\xBCller");
}

TEST(Normalize, IdempotentOnRandomStrings) {
  std::mt19937_64 rng(51);
  const std::string alphabet = "aAbTthHeEnN .,!?-'\"\t():;0123456789";
  for (int trial = 0; trial < 1000; ++trial) {
    std::string s(rng() % 40, ' ');
    for (char& c : s) c = alphabet[rng() % alphabet.size()];
    const std::string once = normalize_answer(s);
    EXPECT_EQ(normalize_answer(once), once) << s;
  }
}

TEST(StringMatch, Examples) {
  const std::vector<std::string> paris{"paris"};
  EXPECT_TRUE(vqa_string_match("Paris", paris));
  EXPECT_FALSE(vqa_string_match("pairs", paris));
  const std::vector<std::string> usa{"USA", "United States"};
  EXPECT_TRUE(vqa_string_match("the united states", usa));
}

TEST(StringMatch, SymmetricWithMatchingAlias) {
  const std::vector<std::string> golds{"The Louvre", "Louvre Museum"};
  for (const std::string pred : {"louvre", "LOUVRE MUSEUM.", "the louvre"}) {
    for (const auto& g : golds) {
      if (vqa_string_match(pred, std::vector<std::string>{g})) {
        EXPECT_TRUE(vqa_string_match(g, std::vector<std::string>{pred}));
      }
    }
  }
}

TEST(ParseNumber, Forms) {
  EXPECT_EQ(parse_first_number("about 1,234.5 m"), 1234.5);
  EXPECT_EQ(parse_first_number("-3.25 degrees"), -3.25);
  EXPECT_EQ(parse_first_number("+7"), 7.0);
  EXPECT_EQ(parse_first_number("1,2"), 1.0);
  EXPECT_EQ(parse_first_number(".5"), 0.5);
  EXPECT_FALSE(parse_first_number("none").has_value());
}

TEST(RelaxedNumeric, Examples) {
  EXPECT_TRUE(relaxed_numeric("104", 100.0));
  EXPECT_FALSE(relaxed_numeric("106", 100.0));
  EXPECT_TRUE(relaxed_numeric("105", 100.0, 0.05));
  EXPECT_FALSE(relaxed_numeric("105.01", 100.0, 0.05));
  EXPECT_TRUE(relaxed_numeric("95", 100.0, 0.05));
  EXPECT_TRUE(relaxed_numeric("0.315", 0.3, 0.05));
  EXPECT_TRUE(relaxed_numeric("0", 0.0));
  EXPECT_FALSE(relaxed_numeric("0.001", 0.0));
  EXPECT_FALSE(relaxed_numeric("many", 100.0));
  EXPECT_TRUE(relaxed_numeric("15 meters", NumericRange{10, 20}));
  EXPECT_TRUE(relaxed_numeric("10", NumericRange{10, 20}));
  EXPECT_FALSE(relaxed_numeric("21", NumericRange{10, 20}));
}

TEST(RelaxedNumeric, Monotone) {
  std::mt19937_64 rng(52);
  std::uniform_real_distribution<double> u(-1000.0, 1000.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const double g = u(rng);
    const std::string p_text = fmt::format("{:.6f}", g * (1.0 + (u(rng) / 1000.0) * 0.08));
    if (!relaxed_numeric(p_text, g, 0.05)) continue;
    const double p = *parse_first_number(p_text);
    for (double t : {0.25, 0.5, 0.9}) {
      const double between = p + t * (g - p);
      EXPECT_TRUE(relaxed_numeric(fmt::format("{:.12f}", between), g, 0.05)) << p << " " << g;
    }
  }
}

TEST(TimeMatch, Examples) {
  const std::vector<std::string> gold{"1889"};
  EXPECT_TRUE(time_match("in 1889", gold));
  EXPECT_FALSE(time_match("1890", gold));
  EXPECT_FALSE(time_match("the 19th century", gold));
  EXPECT_TRUE(time_match("March 31, 1889", std::vector<std::string>{"31 March 1889"}));
  EXPECT_TRUE(time_match("Bronze Age", std::vector<std::string>{"the bronze age"}));
}

TEST(Evaluate, Basics) {
  const std::vector<VqaSample> ds{sample("a", QuestionType::kString, {"x"}), sample("b", QuestionType::kString, {"y"}),
                                  sample("c", QuestionType::kString, {"z"}), sample("d", QuestionType::kString, {"w"})};
  const std::vector<PredictionRecord> three{answered("a", "x"), answered("b", "y"), answered("c", "z"),
                                            answered("d", "nope")};
  EXPECT_EQ(evaluate(three, ds).overall.accuracy(), 0.75);
  const std::vector<PredictionRecord> errors{failed("a"), failed("b"), failed("c"), failed("d")};
  const MetricsReport r = evaluate(errors, ds);
  EXPECT_EQ(r.overall.accuracy(), 0.0);
  EXPECT_EQ(r.overall.total, 4u);
  EXPECT_EQ(r.failed_ids.size(), 4u);
}

TEST(Evaluate, UnknownAndDuplicateRecords) {
  const std::vector<VqaSample> ds{sample("a", QuestionType::kString, {"x"})};
  try {
    evaluate(std::vector<PredictionRecord>{answered("zz", "x")}, ds);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownSampleId);
  }
  try {
    evaluate(std::vector<PredictionRecord>{answered("a", "x"), answered("a", "x")}, ds);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDuplicateSample);
  }
}

TEST(Evaluate, HandScoredFixture) {
  const auto ds = load_dataset(kFixtures / "eval10" / "dataset.jsonl");
  const auto records = load_records(kFixtures / "eval10" / "records.jsonl");
  const auto want = nlohmann::json::parse(testsupport::slurp(kFixtures / "eval10" / "expected_report.json"));
  EXPECT_EQ(to_json(evaluate(records, ds)), want);
}

TEST(Evaluate, PermutationInvariant) {
  const auto ds = load_dataset(kFixtures / "eval10" / "dataset.jsonl");
  auto records = load_records(kFixtures / "eval10" / "records.jsonl");
  const auto base = to_json(evaluate(records, ds));
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(records.begin(), records.end(), rng);
    EXPECT_EQ(to_json(evaluate(records, ds)), base);
  }
}

TEST(Evaluate, JudgeOnlyForStringLikeTypes) {
  const std::vector<VqaSample> ds{sample("s", QuestionType::kString, {"gold"}),
                                  sample("o", QuestionType::kOther, {"gold"}),
                                  sample("n", QuestionType::kNumerical, {"10"}),
                                  sample("t", QuestionType::kTime, {"1900"})};
  const std::vector<PredictionRecord> recs{answered("s", "yes"), answered("o", "no"), answered("n", "10"),
                                           answered("t", "1900")};
  CountingJudge judge;
  const MetricsReport r = evaluate(recs, ds, {0.05, &judge});
  EXPECT_EQ(judge.calls, 2);
  EXPECT_EQ(r.overall.correct, 3u);
  EXPECT_EQ(r.judge, "counting");
}

TEST(Evaluate, HttpJudgeProtocol) {
  auto t = std::make_shared<testsupport::ScriptedTransport>([](const std::string& body, int) {
    const auto j = nlohmann::json::parse(body);
    const bool ok = j.at("prediction") == j.at("gold_answers")[0];
    return HttpReply{200, nlohmann::json{{"correct", ok}}.dump()};
  });
  HttpJudge judge("http://judge.invalid/score", t);
  EXPECT_TRUE(judge.correct(sample("s", QuestionType::kString, {"oak"}), "oak"));
  EXPECT_FALSE(judge.correct(sample("s", QuestionType::kString, {"oak"}), "elm"));
  EXPECT_EQ(judge.name(), "external:http://judge.invalid/score");
}

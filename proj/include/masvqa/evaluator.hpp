#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "masvqa/inference.hpp"
#include "masvqa/records.hpp"

namespace masvqa {

// Lowercase, strip punctuation, drop the articles a/an/the, collapse spaces.
std::string normalize_answer(std::string_view text);

bool vqa_string_match(std::string_view pred, std::span<const std::string> golds);

// First number in the text; accepts a sign, decimals and comma thousands
// separators ("1,234.5").
std::optional<double> parse_first_number(std::string_view text);

// Point gold: |p - g| / |g| <= tol (exact match when g == 0).
bool relaxed_numeric(std::string_view pred, double gold, double tol = 0.05);
// Range gold: lo <= p <= hi.
bool relaxed_numeric(std::string_view pred, const NumericRange& gold);

// Compares the first four-digit year of each side; falls back to string
// matching when either side has no year.
bool time_match(std::string_view pred, std::span<const std::string> golds);

// Verdict source for string-like questions.
class AnswerJudge {
 public:
  virtual ~AnswerJudge() = default;
  virtual std::string name() const = 0;
  virtual bool correct(const VqaSample& sample, std::string_view pred) = 0;
};

class StringMatchJudge final : public AnswerJudge {
 public:
  std::string name() const override { return "normalized-string-match"; }
  bool correct(const VqaSample& sample, std::string_view pred) override {
    return vqa_string_match(pred, sample.gold_answers);
  }
};

// POSTs {"question", "gold_answers", "prediction"} and reads {"correct": bool}.
class HttpJudge final : public AnswerJudge {
 public:
  HttpJudge(std::string endpoint_url, std::shared_ptr<Transport> transport, double timeout_seconds = 60.0);
  explicit HttpJudge(std::string endpoint_url);

  std::string name() const override { return "external:" + endpoint_; }
  bool correct(const VqaSample& sample, std::string_view pred) override;

 private:
  std::string endpoint_;
  std::shared_ptr<Transport> transport_;
  double timeout_seconds_;
};

struct EvalOptions {
  double relaxed_tol = 0.05;
  AnswerJudge* judge = nullptr;  // defaults to normalized string match
};

struct AccuracyBucket {
  std::size_t correct = 0;
  std::size_t total = 0;

  double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

struct MetricsReport {
  std::string judge;
  double relaxed_tol = 0.05;
  AccuracyBucket overall;
  std::map<std::string, AccuracyBucket> by_type;
  std::map<std::string, AccuracyBucket> by_split;
  std::vector<std::string> failed_ids;   // error records
  std::vector<std::string> missing_ids;  // no record at all
};

// Scores one sample's prediction with the metric for its question type.
bool score_sample(const VqaSample& sample, std::string_view pred, const EvalOptions& options);

// Error and missing records score zero. Throws kUnknownSampleId for records
// whose sample is not in the dataset.
MetricsReport evaluate(std::span<const PredictionRecord> records, std::span<const VqaSample> dataset,
                       const EvalOptions& options = {});

nlohmann::json to_json(const MetricsReport& report);

}  // namespace masvqa

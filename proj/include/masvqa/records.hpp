#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace masvqa {

enum class QuestionType { kString, kNumerical, kTime, kOther };

// Case-insensitive; unrecognised names map to kOther.
QuestionType parse_question_type(std::string_view name);
std::string_view to_string(QuestionType type);

struct NumericRange {
  double lo = 0.0;
  double hi = 0.0;
};

struct VqaSample {
  std::string sample_id;
  std::filesystem::path image_path;
  std::string question;
  std::vector<std::string> gold_answers;
  QuestionType question_type = QuestionType::kString;
  std::vector<std::string> split_tags;
  std::optional<NumericRange> gold_range;
};

struct Passage {
  std::string text;
  double score = 0.0;
  std::string source_id;
};

// Passages in descending score order.
struct RetrievalResult {
  std::string sample_id;
  std::vector<Passage> passages;
};

struct MaskStats {
  std::size_t grid = 0;
  std::size_t active = 0;
  double fraction = 0.0;
};

struct Timings {
  double explicit_ms = 0.0;
  double implicit_ms = 0.0;
  double answer_ms = 0.0;
};

// Exactly one of `answer` and `error` is set.
struct PredictionRecord {
  std::string sample_id;
  std::vector<std::vector<std::string>> phrases;  // per passage, rank order
  MaskStats mask;
  std::string implicit_knowledge;
  std::optional<std::string> answer;
  std::optional<std::string> error;
  std::string implicit_prompt_hash;
  std::string answer_prompt_hash;
  std::optional<Timings> timings;
};

// JSONL, one sample per line. Accepts `sample_id` or `data_id`; gold answers
// from `gold_answers` or `answer`, plus `answer_eval` aliases; a numeric
// `{"range": [lo, hi]}` entry in `answer_eval` becomes gold_range. Relative
// image paths resolve against the dataset file's directory. Unknown fields
// are ignored. Errors name the offending line.
std::vector<VqaSample> load_dataset(const std::filesystem::path& path);

// JSONL of {"sample_id", "passages": [{"text", "score", "source_id"}]}.
// Passages are re-sorted by descending score (stable) and cut to `k`.
std::map<std::string, RetrievalResult> load_retrievals(const std::filesystem::path& path, std::size_t k);

nlohmann::json to_json(const PredictionRecord& record);
PredictionRecord record_from_json(const nlohmann::json& j);

// One JSON object per line, compact, keys sorted.
std::string to_jsonl_line(const PredictionRecord& record);

// Reads a records file. A malformed final line (interrupted write) is
// skipped and reported through `dropped_tail`; malformed lines elsewhere are
// errors.
std::vector<PredictionRecord> load_records(const std::filesystem::path& path, bool* dropped_tail = nullptr);

}  // namespace masvqa

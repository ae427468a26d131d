#include "masvqa/evaluator.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <regex>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "masvqa/error.hpp"

namespace masvqa {

namespace {

using json = nlohmann::json;

std::optional<std::string> first_year(std::string_view text) {
  static const std::regex kYear(R"((^|[^0-9])([0-9]{4})([^0-9]|$))");
  std::match_results<std::string_view::const_iterator> m;
  if (std::regex_search(text.begin(), text.end(), m, kYear)) return m[2].str();
  return std::nullopt;
}

json bucket_json(const AccuracyBucket& b) {
  return {{"correct", b.correct}, {"total", b.total}, {"accuracy", b.accuracy()}};
}

}  // namespace

std::string normalize_answer(std::string_view text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 0x80 && std::ispunct(u)) continue;
    cleaned += u < 0x80 ? static_cast<char>(std::tolower(u)) : c;
  }
  std::istringstream words(cleaned);
  std::string out;
  for (std::string w; words >> w;) {
    if (w == "a" || w == "an" || w == "the") continue;
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

bool vqa_string_match(std::string_view pred, std::span<const std::string> golds) {
  const std::string p = normalize_answer(pred);
  for (const auto& g : golds) {
    if (normalize_answer(g) == p) return true;
  }
  return false;
}

std::optional<double> parse_first_number(std::string_view text) {
  static const std::regex kNumber(R"([-+]?(?:(?:[0-9]{1,3}(?:,[0-9]{3})+|[0-9]+)(?:\.[0-9]+)?|\.[0-9]+))");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(text.begin(), text.end(), m, kNumber)) return std::nullopt;
  std::string digits;
  for (char c : m.str()) {
    if (c != ',') digits += c;
  }
  const double value = std::strtod(digits.c_str(), nullptr);
  if (!std::isfinite(value)) return std::nullopt;
  return value;
}

bool relaxed_numeric(std::string_view pred, double gold, double tol) {
  const auto p = parse_first_number(pred);
  if (!p) return false;
  if (gold == 0.0) return *p == 0.0;
  // The slack absorbs binary rounding of decimal inputs such as 0.315 vs 0.3.
  return std::abs(*p - gold) / std::abs(gold) <= tol + 1e-12;
}

bool relaxed_numeric(std::string_view pred, const NumericRange& gold) {
  const auto p = parse_first_number(pred);
  return p && gold.lo <= *p && *p <= gold.hi;
}

bool time_match(std::string_view pred, std::span<const std::string> golds) {
  const auto pred_year = first_year(pred);
  bool gold_has_year = false;
  if (pred_year) {
    for (const auto& g : golds) {
      const auto gy = first_year(g);
      if (!gy) continue;
      gold_has_year = true;
      if (*gy == *pred_year) return true;
    }
  }
  if (pred_year && gold_has_year) return false;
  return vqa_string_match(pred, golds);
}

HttpJudge::HttpJudge(std::string endpoint_url, std::shared_ptr<Transport> transport, double timeout_seconds)
    : endpoint_(std::move(endpoint_url)), transport_(std::move(transport)), timeout_seconds_(timeout_seconds) {}

HttpJudge::HttpJudge(std::string endpoint_url)
    : HttpJudge(endpoint_url, make_http_transport(endpoint_url)) {}

bool HttpJudge::correct(const VqaSample& sample, std::string_view pred) {
  const json body = {{"question", sample.question}, {"gold_answers", sample.gold_answers}, {"prediction", pred}};
  const auto reply = transport_->post(
      body.dump(), std::chrono::milliseconds(static_cast<long>(std::llround(timeout_seconds_ * 1000.0))));
  if (reply.status < 200 || reply.status >= 300) {
    throw Error(ErrorCode::kHttpStatus, fmt::format("judge returned HTTP {}", reply.status));
  }
  try {
    return json::parse(reply.body).at("correct").get<bool>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedResponse, fmt::format("judge reply unreadable: {}", e.what()));
  }
}

bool score_sample(const VqaSample& sample, std::string_view pred, const EvalOptions& options) {
  switch (sample.question_type) {
    case QuestionType::kNumerical: {
      if (sample.gold_range) return relaxed_numeric(pred, *sample.gold_range);
      bool any_numeric = false;
      for (const auto& g : sample.gold_answers) {
        const auto gold = parse_first_number(g);
        if (!gold) continue;
        any_numeric = true;
        if (relaxed_numeric(pred, *gold, options.relaxed_tol)) return true;
      }
      if (any_numeric) return false;
      return vqa_string_match(pred, sample.gold_answers);
    }
    case QuestionType::kTime:
      return time_match(pred, sample.gold_answers);
    case QuestionType::kString:
    case QuestionType::kOther:
      if (options.judge != nullptr) return options.judge->correct(sample, pred);
      return vqa_string_match(pred, sample.gold_answers);
  }
  return false;
}

MetricsReport evaluate(std::span<const PredictionRecord> records, std::span<const VqaSample> dataset,
                       const EvalOptions& options) {
  std::unordered_map<std::string, const VqaSample*> by_id;
  for (const auto& s : dataset) by_id.emplace(s.sample_id, &s);

  std::unordered_map<std::string, const PredictionRecord*> record_of;
  for (const auto& r : records) {
    if (!by_id.contains(r.sample_id)) {
      throw Error(ErrorCode::kUnknownSampleId, fmt::format("record for unknown sample '{}'", r.sample_id));
    }
    if (!record_of.emplace(r.sample_id, &r).second) {
      throw Error(ErrorCode::kDuplicateSample, fmt::format("duplicate record for '{}'", r.sample_id));
    }
  }

  MetricsReport report;
  report.judge = options.judge ? options.judge->name() : StringMatchJudge{}.name();
  report.relaxed_tol = options.relaxed_tol;
  for (const auto& sample : dataset) {
    bool correct = false;
    const auto it = record_of.find(sample.sample_id);
    if (it == record_of.end()) {
      report.missing_ids.push_back(sample.sample_id);
    } else if (!it->second->answer) {
      report.failed_ids.push_back(sample.sample_id);
    } else {
      correct = score_sample(sample, *it->second->answer, options);
    }
    const std::size_t hit = correct ? 1 : 0;
    auto add = [hit](AccuracyBucket& b) {
      b.correct += hit;
      b.total += 1;
    };
    add(report.overall);
    add(report.by_type[std::string(to_string(sample.question_type))]);
    for (const auto& tag : sample.split_tags) add(report.by_split[tag]);
  }
  return report;
}

json to_json(const MetricsReport& report) {
  json by_type = json::object(), by_split = json::object();
  for (const auto& [k, b] : report.by_type) by_type[k] = bucket_json(b);
  for (const auto& [k, b] : report.by_split) by_split[k] = bucket_json(b);
  return {
      {"judge", report.judge},
      {"relaxed_tol", report.relaxed_tol},
      {"overall", bucket_json(report.overall)},
      {"by_question_type", by_type},
      {"by_split", by_split},
      {"failed_ids", report.failed_ids},
      {"missing_ids", report.missing_ids},
  };
}

}  // namespace masvqa

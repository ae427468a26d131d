#include "masvqa/records.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "masvqa/error.hpp"

namespace masvqa {

namespace {

using json = nlohmann::json;

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; });
}

std::string scalar_to_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return fmt::format("{}", v.get<double>());
  throw Error(ErrorCode::kParse, "answer entries must be strings or numbers");
}

void add_unique(std::vector<std::string>& list, std::string value) {
  if (std::find(list.begin(), list.end(), value) == list.end()) list.push_back(std::move(value));
}

VqaSample sample_from_json(const json& j, const std::filesystem::path& base_dir) {
  VqaSample s;
  if (j.contains("sample_id")) {
    s.sample_id = scalar_to_string(j.at("sample_id"));
  } else if (j.contains("data_id")) {
    s.sample_id = scalar_to_string(j.at("data_id"));
  } else {
    throw Error(ErrorCode::kParse, "missing sample_id");
  }

  if (!j.contains("question") || !j.at("question").is_string() || j.at("question").get<std::string>().empty()) {
    throw Error(ErrorCode::kParse, "missing question");
  }
  s.question = j.at("question").get<std::string>();

  std::filesystem::path image;
  if (j.contains("image_path")) {
    image = j.at("image_path").get<std::string>();
  } else if (j.contains("image")) {
    image = j.at("image").get<std::string>();
  } else if (j.contains("image_id")) {
    image = j.at("image_id").get<std::string>() + ".jpg";
  }
  s.image_path = image.empty() || image.is_absolute() ? image : base_dir / image;

  for (const char* key : {"gold_answers", "answer"}) {
    if (!j.contains(key)) continue;
    const json& v = j.at(key);
    if (v.is_array()) {
      for (const auto& a : v) add_unique(s.gold_answers, scalar_to_string(a));
    } else {
      add_unique(s.gold_answers, scalar_to_string(v));
    }
  }
  if (j.contains("answer_eval") && j.at("answer_eval").is_array()) {
    for (const auto& a : j.at("answer_eval")) {
      if (a.is_object()) {
        if (a.contains("range")) {
          const auto r = a.at("range").get<std::vector<double>>();
          if (r.size() != 2 || r[0] > r[1]) throw Error(ErrorCode::kParse, "answer_eval range must be [lo, hi]");
          s.gold_range = NumericRange{r[0], r[1]};
        }
        if (a.contains("wikidata")) add_unique(s.gold_answers, scalar_to_string(a.at("wikidata")));
      } else {
        add_unique(s.gold_answers, scalar_to_string(a));
      }
    }
  }
  if (s.gold_answers.empty() && !s.gold_range) throw Error(ErrorCode::kParse, "missing gold answers");

  if (j.contains("question_type")) {
    s.question_type = parse_question_type(j.at("question_type").get<std::string>());
  } else if (s.gold_range) {
    s.question_type = QuestionType::kNumerical;
  }

  if (j.contains("split_tags")) {
    s.split_tags = j.at("split_tags").get<std::vector<std::string>>();
  } else if (j.contains("data_split")) {
    s.split_tags.push_back(j.at("data_split").get<std::string>());
  }
  return s;
}

template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot open {}", path.string()));
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (blank(line)) continue;
    try {
      fn(json::parse(line), number);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParse, fmt::format("{}:{}: {}", path.string(), number, e.what()));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kParse && e.code() != ErrorCode::kDuplicateSample) throw;
      throw Error(e.code(), fmt::format("{}:{}: {}", path.string(), number, e.what()));
    }
  }
}

}  // namespace

QuestionType parse_question_type(std::string_view name) {
  const std::string n = lower(name);
  if (n == "string") return QuestionType::kString;
  if (n == "numerical" || n == "numeric" || n == "number") return QuestionType::kNumerical;
  if (n == "time" || n == "date") return QuestionType::kTime;
  return QuestionType::kOther;
}

std::string_view to_string(QuestionType type) {
  switch (type) {
    case QuestionType::kString: return "string";
    case QuestionType::kNumerical: return "numerical";
    case QuestionType::kTime: return "time";
    case QuestionType::kOther: return "other";
  }
  return "other";
}

std::vector<VqaSample> load_dataset(const std::filesystem::path& path) {
  std::vector<VqaSample> samples;
  std::set<std::string> ids;
  const auto base = path.parent_path();
  for_each_line(path, [&](const json& j, std::size_t) {
    VqaSample s = sample_from_json(j, base);
    if (!ids.insert(s.sample_id).second) {
      throw Error(ErrorCode::kDuplicateSample, fmt::format("duplicate sample_id '{}'", s.sample_id));
    }
    samples.push_back(std::move(s));
  });
  return samples;
}

std::map<std::string, RetrievalResult> load_retrievals(const std::filesystem::path& path, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  std::map<std::string, RetrievalResult> out;
  for_each_line(path, [&](const json& j, std::size_t) {
    RetrievalResult r;
    r.sample_id = scalar_to_string(j.at(j.contains("sample_id") ? "sample_id" : "data_id"));
    for (const auto& p : j.at("passages")) {
      Passage passage;
      passage.text = p.at("text").get<std::string>();
      passage.score = p.value("score", 0.0);
      passage.source_id = p.contains("source_id") ? scalar_to_string(p.at("source_id")) : std::string{};
      r.passages.push_back(std::move(passage));
    }
    if (r.passages.empty()) {
      throw Error(ErrorCode::kParse, fmt::format("sample '{}' has no passages", r.sample_id));
    }
    std::stable_sort(r.passages.begin(), r.passages.end(),
                     [](const Passage& a, const Passage& b) { return a.score > b.score; });
    if (r.passages.size() > k) r.passages.resize(k);
    const std::string id = r.sample_id;
    if (!out.emplace(id, std::move(r)).second) {
      throw Error(ErrorCode::kDuplicateSample, fmt::format("duplicate retrieval for '{}'", id));
    }
  });
  return out;
}

json to_json(const PredictionRecord& r) {
  json j = {
      {"sample_id", r.sample_id},
      {"phrases", r.phrases},
      {"mask", {{"grid", r.mask.grid}, {"active", r.mask.active}, {"fraction", r.mask.fraction}}},
      {"implicit_knowledge", r.implicit_knowledge},
      {"answer", r.answer ? json(*r.answer) : json(nullptr)},
      {"error", r.error ? json(*r.error) : json(nullptr)},
      {"prompt_hashes", {{"implicit", r.implicit_prompt_hash}, {"answer", r.answer_prompt_hash}}},
  };
  if (r.timings) {
    j["timings_ms"] = {{"explicit", r.timings->explicit_ms},
                       {"implicit", r.timings->implicit_ms},
                       {"answer", r.timings->answer_ms}};
  }
  return j;
}

PredictionRecord record_from_json(const json& j) {
  PredictionRecord r;
  r.sample_id = j.at("sample_id").get<std::string>();
  r.phrases = j.value("phrases", std::vector<std::vector<std::string>>{});
  if (j.contains("mask")) {
    const auto& m = j.at("mask");
    r.mask = {m.value("grid", std::size_t{0}), m.value("active", std::size_t{0}), m.value("fraction", 0.0)};
  }
  r.implicit_knowledge = j.value("implicit_knowledge", "");
  if (j.contains("answer") && j.at("answer").is_string()) r.answer = j.at("answer").get<std::string>();
  if (j.contains("error") && j.at("error").is_string()) r.error = j.at("error").get<std::string>();
  if (j.contains("prompt_hashes")) {
    r.implicit_prompt_hash = j.at("prompt_hashes").value("implicit", "");
    r.answer_prompt_hash = j.at("prompt_hashes").value("answer", "");
  }
  if (j.contains("timings_ms")) {
    const auto& t = j.at("timings_ms");
    r.timings = Timings{t.value("explicit", 0.0), t.value("implicit", 0.0), t.value("answer", 0.0)};
  }
  if (r.answer.has_value() == r.error.has_value()) {
    throw Error(ErrorCode::kParse, fmt::format("record '{}' must carry exactly one of answer/error", r.sample_id));
  }
  return r;
}

std::string to_jsonl_line(const PredictionRecord& record) { return to_json(record).dump() + "\n"; }

std::vector<PredictionRecord> load_records(const std::filesystem::path& path, bool* dropped_tail) {
  if (dropped_tail) *dropped_tail = false;
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot open {}", path.string()));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!blank(line)) lines.push_back(std::move(line));
  }
  std::vector<PredictionRecord> records;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      records.push_back(record_from_json(json::parse(lines[i])));
    } catch (const std::exception& e) {
      if (i + 1 == lines.size() && dropped_tail) {
        *dropped_tail = true;
        break;
      }
      throw Error(ErrorCode::kParse, fmt::format("{}: record {}: {}", path.string(), i + 1, e.what()));
    }
  }
  return records;
}

}  // namespace masvqa

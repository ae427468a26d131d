#include "masvqa/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>
#include <mutex>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "masvqa/bounded.hpp"
#include "masvqa/error.hpp"
#include "masvqa/raster.hpp"

namespace masvqa {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string trim(std::string_view s) {
  const auto not_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) == 0; };
  const auto b = std::find_if(s.begin(), s.end(), not_space);
  const auto e = std::find_if(s.rbegin(), s.rend(), not_space).base();
  return b < e ? std::string(b, e) : std::string{};
}

std::string describe(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    return fmt::format("{}: {}", error_code_name(err->code()), err->what());
  }
  return e.what();
}

AttentionDump checked_dump(const DumpSource& dumps, const VqaSample& sample, const Passage& passage,
                           std::size_t rank, const PipelineConfig& cfg) {
  AttentionDump dump = dumps(sample.sample_id, rank);
  if (dump.meta.seq_len > cfg.max_txt_len) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("dump {} r{} has L={} above max_txt_len={}", sample.sample_id, rank,
                            dump.meta.seq_len, cfg.max_txt_len));
  }
  if (dump.meta.knowledge_text != passage.text) {
    spdlog::warn("dump {} r{} was built from a different passage text", sample.sample_id, rank);
  }
  return dump;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot open {}", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

void validate(const PipelineConfig& cfg) {
  if (!(cfg.tau > 0.0)) throw Error(ErrorCode::kNonPositiveTemperature, "tau must be positive");
  if (!(cfg.rho >= 0.0 && cfg.rho <= 100.0)) throw Error(ErrorCode::kOutOfRange, "rho must be in [0, 100]");
  if (cfg.m < 1) throw Error(ErrorCode::kInvalidArgument, "m must be >= 1");
  if (cfg.max_phrases < 1) throw Error(ErrorCode::kInvalidArgument, "max_phrases must be >= 1");
  if (cfg.k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  if (cfg.max_txt_len < 3) throw Error(ErrorCode::kInvalidArgument, "max_txt_len must be >= 3");
  validate(cfg.inference);
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig cfg;
  try {
    cfg.tau = j.value("tau", cfg.tau);
    cfg.rho = j.value("rho", cfg.rho);
    cfg.m = j.value("m", cfg.m);
    cfg.gap = j.value("gap", cfg.gap);
    cfg.max_phrases = j.value("max_phrases", cfg.max_phrases);
    cfg.k = j.value("k", cfg.k);
    cfg.max_txt_len = j.value("max_txt_len", cfg.max_txt_len);
    cfg.ablation.use_mask = j.value("use_mask", cfg.ablation.use_mask);
    cfg.ablation.use_phrases = j.value("use_phrases", cfg.ablation.use_phrases);
    cfg.ablation.use_implicit = j.value("use_implicit", cfg.ablation.use_implicit);
    cfg.record_timings = j.value("record_timings", cfg.record_timings);
    cfg.masked_image_dir = j.value("masked_image_dir", std::string{});
    if (j.contains("inference")) {
      const json& inf = j.at("inference");
      InferenceConfig& ic = cfg.inference;
      ic.endpoint_url = inf.value("endpoint_url", ic.endpoint_url);
      ic.model_name = inf.value("model_name", ic.model_name);
      ic.temperature = inf.value("temperature", ic.temperature);
      ic.max_tokens = inf.value("max_tokens", ic.max_tokens);
      ic.max_in_flight = inf.value("max_in_flight", ic.max_in_flight);
      ic.timeout_seconds = inf.value("timeout_seconds", ic.timeout_seconds);
      ic.retry_count = inf.value("retry_count", ic.retry_count);
      ic.backoff_initial_ms = inf.value("backoff_initial_ms", ic.backoff_initial_ms);
      ic.api_key_env = inf.value("api_key_env", ic.api_key_env);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, fmt::format("bad pipeline config: {}", e.what()));
  }
  validate(cfg);
  return cfg;
}

json to_json(const PipelineConfig& cfg) {
  const InferenceConfig& ic = cfg.inference;
  return {
      {"tau", cfg.tau},
      {"rho", cfg.rho},
      {"m", cfg.m},
      {"gap", cfg.gap},
      {"max_phrases", cfg.max_phrases},
      {"k", cfg.k},
      {"max_txt_len", cfg.max_txt_len},
      {"use_mask", cfg.ablation.use_mask},
      {"use_phrases", cfg.ablation.use_phrases},
      {"use_implicit", cfg.ablation.use_implicit},
      {"record_timings", cfg.record_timings},
      {"masked_image_dir", cfg.masked_image_dir.string()},
      {"inference",
       {{"endpoint_url", ic.endpoint_url},
        {"model_name", ic.model_name},
        {"temperature", ic.temperature},
        {"max_tokens", ic.max_tokens},
        {"max_in_flight", ic.max_in_flight},
        {"timeout_seconds", ic.timeout_seconds},
        {"retry_count", ic.retry_count},
        {"backoff_initial_ms", ic.backoff_initial_ms},
        {"api_key_env", ic.api_key_env}}},
  };
}

PipelineConfig load_config(const std::filesystem::path& path) {
  try {
    return config_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::filesystem::path dump_path(const std::filesystem::path& dir, const std::string& sample_id, std::size_t rank) {
  return dir / fmt::format("{}.r{}.mvd", sample_id, rank);
}

DumpSource directory_dumps(std::filesystem::path dir) {
  return [dir = std::move(dir)](const std::string& sample_id, std::size_t rank) {
    const auto path = dump_path(dir, sample_id, rank);
    if (!std::filesystem::exists(path)) {
      throw Error(ErrorCode::kMissingDump, fmt::format("no dump for sample '{}' rank {} ({})", sample_id, rank,
                                                       path.string()));
    }
    return read_dump_file(path);
  };
}

ExplicitPackage build_explicit(const VqaSample& sample, const RetrievalResult& retrieval,
                               const DumpSource& dumps, const PipelineConfig& cfg) {
  if (retrieval.passages.empty()) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("sample '{}' has no passages", sample.sample_id));
  }
  ExplicitPackage package;
  const std::size_t k = std::min(cfg.k, retrieval.passages.size());
  for (std::size_t r = 0; r < k; ++r) {
    const Passage& passage = retrieval.passages[r];
    package.passages.push_back(passage.text);
    if (!cfg.ablation.use_phrases) {
      package.keywords.emplace_back();
      continue;
    }
    const AttentionDump dump = checked_dump(dumps, sample, passage, r + 1, cfg);
    package.keywords.push_back(select_phrases(dump, cfg.phrase_params()));
    if (r == 0 && cfg.ablation.use_mask) package.mask = build_patch_mask(dump, cfg.mask_params());
  }
  if (!cfg.ablation.use_mask) {
    package.mask = full_patch_mask(1);
  } else if (!cfg.ablation.use_phrases) {
    const AttentionDump dump = checked_dump(dumps, sample, retrieval.passages[0], 1, cfg);
    package.mask = build_patch_mask(dump, cfg.mask_params());
  }
  return package;
}

std::array<ImageRef, 2> prepare_images(const VqaSample& sample, const PatchMask& mask, const PipelineConfig& cfg) {
  const RgbImage image = decode_image(read_file(sample.image_path));
  ImageRef original{"image/png", encode_png(image), "original"};
  ImageRef masked{"image/png", original.bytes, "attention_map"};
  if (cfg.ablation.use_mask) {
    const RgbImage view = apply_mask(image, render_mask(mask, image.width, image.height));
    masked.bytes = encode_png(view);
  }
  if (!cfg.masked_image_dir.empty()) {
    std::filesystem::create_directories(cfg.masked_image_dir);
    std::ofstream out(cfg.masked_image_dir / (sample.sample_id + ".mask.png"), std::ios::binary | std::ios::trunc);
    out.write(masked.bytes.data(), static_cast<std::streamsize>(masked.bytes.size()));
  }
  return {std::move(original), std::move(masked)};
}

PredictionRecord run_sample(const VqaSample& sample, const RetrievalResult* retrieval, const DumpSource& dumps,
                            const ChatClient& client, const PipelineConfig& cfg) {
  PredictionRecord record;
  record.sample_id = sample.sample_id;
  Timings timings;
  try {
    if (retrieval == nullptr) {
      throw Error(ErrorCode::kInvalidArgument, fmt::format("no retrieval for sample '{}'", sample.sample_id));
    }
    auto t0 = Clock::now();
    const ExplicitPackage package = build_explicit(sample, *retrieval, dumps, cfg);
    for (const auto& kw : package.keywords) record.phrases.push_back(kw.texts());
    record.mask.grid = package.mask.grid;
    record.mask.active = package.mask.active();
    record.mask.fraction = package.mask.grid == 0
                               ? 0.0
                               : static_cast<double>(record.mask.active) /
                                     static_cast<double>(package.mask.grid * package.mask.grid);
    const auto images = prepare_images(sample, package.mask, cfg);
    const std::string evidence = format_evidence(package);
    const GenerationParams gen{cfg.inference.temperature, cfg.inference.max_tokens};
    timings.explicit_ms = ms_since(t0);

    if (cfg.ablation.use_implicit) {
      t0 = Clock::now();
      const PromptBundle implicit_prompt = build_implicit_prompt(evidence, sample.question, images, gen);
      record.implicit_prompt_hash = implicit_prompt.hash();
      record.implicit_knowledge = trim(client.complete(implicit_prompt));
      timings.implicit_ms = ms_since(t0);
    }

    t0 = Clock::now();
    const PromptBundle answer_prompt =
        build_answer_prompt(evidence, record.implicit_knowledge, sample.question, images, gen);
    record.answer_prompt_hash = answer_prompt.hash();
    record.answer = trim(client.complete(answer_prompt));
    timings.answer_ms = ms_since(t0);
  } catch (const std::exception& e) {
    record.answer.reset();
    record.error = describe(e);
    spdlog::warn("sample {} failed: {}", sample.sample_id, *record.error);
  }
  if (cfg.record_timings) record.timings = timings;
  return record;
}

RunSummary run_dataset(const RunPaths& paths, const PipelineConfig& cfg, const ChatClient& client) {
  const auto samples = load_dataset(paths.dataset);
  const auto retrievals = load_retrievals(paths.retrievals, cfg.k);
  const DumpSource dumps = directory_dumps(paths.dumps);

  // Existing records; an interrupted final line is discarded.
  std::set<std::string> done;
  if (std::filesystem::exists(paths.out)) {
    std::ifstream in(paths.out);
    std::vector<std::string> good;
    bool rewrite = false;
    for (std::string line; std::getline(in, line);) {
      if (trim(line).empty()) continue;
      try {
        done.insert(record_from_json(json::parse(line)).sample_id);
        good.push_back(line);
      } catch (const std::exception& e) {
        if (in.peek() != std::char_traits<char>::eof()) {
          throw Error(ErrorCode::kParse, fmt::format("{}: corrupt record line: {}", paths.out.string(), e.what()));
        }
        spdlog::warn("discarding incomplete final record in {}", paths.out.string());
        rewrite = true;
      }
    }
    in.close();
    const auto size = std::filesystem::file_size(paths.out);
    if (!rewrite && size > 0) {
      std::ifstream tail(paths.out, std::ios::binary);
      tail.seekg(static_cast<std::streamoff>(size - 1));
      rewrite = tail.get() != '\n';
    }
    if (rewrite) {
      std::ofstream out(paths.out, std::ios::trunc);
      for (const auto& line : good) out << line << '\n';
    }
  }

  std::vector<const VqaSample*> pending;
  for (const auto& s : samples) {
    if (!done.contains(s.sample_id)) pending.push_back(&s);
  }

  RunSummary summary;
  summary.total = samples.size();
  summary.skipped = samples.size() - pending.size();

  std::ofstream out(paths.out, std::ios::app);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot open {} for appending", paths.out.string()));

  std::mutex mu;
  std::vector<std::optional<PredictionRecord>> finished(pending.size());
  std::size_t next_to_write = 0;

  bounded_for_each(pending.size(), cfg.inference.max_in_flight, [&](std::size_t i) {
    const VqaSample& sample = *pending[i];
    const auto it = retrievals.find(sample.sample_id);
    PredictionRecord record =
        run_sample(sample, it == retrievals.end() ? nullptr : &it->second, dumps, client, cfg);

    std::lock_guard lock(mu);
    finished[i] = std::move(record);
    while (next_to_write < finished.size() && finished[next_to_write]) {
      const PredictionRecord& r = *finished[next_to_write];
      out << to_jsonl_line(r);
      out.flush();
      ++summary.processed;
      if (r.answer) ++summary.answered; else ++summary.errors;
      finished[next_to_write].reset();
      ++next_to_write;
    }
  });
  return summary;
}

}  // namespace masvqa

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "masvqa/dump.hpp"
#include "masvqa/inference.hpp"
#include "masvqa/mask.hpp"
#include "masvqa/phrases.hpp"
#include "masvqa/prompt.hpp"
#include "masvqa/records.hpp"

namespace masvqa {

struct AblationFlags {
  bool use_mask = true;
  bool use_phrases = true;
  bool use_implicit = true;
};

struct PipelineConfig {
  double tau = 1.0;
  double rho = 90.0;
  std::size_t m = 30;
  std::size_t gap = 3;
  std::size_t max_phrases = 10;
  std::size_t k = 5;
  std::size_t max_txt_len = 512;
  AblationFlags ablation;
  bool record_timings = true;
  std::filesystem::path masked_image_dir;  // empty: masked views are not saved
  InferenceConfig inference;

  MaskParams mask_params() const { return {tau, rho}; }
  PhraseParams phrase_params() const { return {m, gap, max_phrases}; }
};

void validate(const PipelineConfig& cfg);

// Field names mirror PipelineConfig; missing fields keep their defaults.
PipelineConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PipelineConfig& cfg);
PipelineConfig load_config(const std::filesystem::path& path);

// Returns the dump for (sample, 1-based retrieval rank) or throws
// Error(kMissingDump).
using DumpSource = std::function<AttentionDump(const std::string& sample_id, std::size_t rank)>;

std::filesystem::path dump_path(const std::filesystem::path& dir, const std::string& sample_id, std::size_t rank);

// Reads "<dir>/<sample_id>.r<rank>.mvd".
DumpSource directory_dumps(std::filesystem::path dir);

// Phrases for every passage; mask from the rank-1 passage. Disabled
// channels yield empty keyword sets or an all-true mask.
ExplicitPackage build_explicit(const VqaSample& sample, const RetrievalResult& retrieval,
                               const DumpSource& dumps, const PipelineConfig& cfg);

// Original and masked views of the sample image, both PNG encoded.
std::array<ImageRef, 2> prepare_images(const VqaSample& sample, const PatchMask& mask,
                                       const PipelineConfig& cfg);

// Never throws for per-sample failures; they land in record.error.
PredictionRecord run_sample(const VqaSample& sample, const RetrievalResult* retrieval,
                            const DumpSource& dumps, const ChatClient& client, const PipelineConfig& cfg);

struct RunPaths {
  std::filesystem::path dataset;
  std::filesystem::path retrievals;
  std::filesystem::path dumps;
  std::filesystem::path out;
};

struct RunSummary {
  std::size_t total = 0;
  std::size_t skipped = 0;   // already present in the output file
  std::size_t processed = 0;
  std::size_t answered = 0;
  std::size_t errors = 0;
};

// Appends one record per pending sample to paths.out in dataset order;
// samples already recorded there are skipped.
RunSummary run_dataset(const RunPaths& paths, const PipelineConfig& cfg, const ChatClient& client);

}  // namespace masvqa

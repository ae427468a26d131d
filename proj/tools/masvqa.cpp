// masvqa: command-line front end for the Mask-and-Select pipeline.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "masvqa/dump.hpp"
#include "masvqa/error.hpp"
#include "masvqa/evaluator.hpp"
#include "masvqa/fixture.hpp"
#include "masvqa/mask.hpp"
#include "masvqa/phrases.hpp"
#include "masvqa/pipeline.hpp"
#include "masvqa/raster.hpp"
#include "masvqa/records.hpp"

namespace {

using json = nlohmann::json;
using namespace masvqa;

void write_json(const json& j, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write {}", path));
  out << j.dump(2) << '\n';
}

json grid_json(const PatchMask& mask) {
  json rows = json::array();
  for (std::size_t r = 0; r < mask.grid; ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < mask.grid; ++c) row.push_back(mask.bits(r, c) ? 1 : 0);
    rows.push_back(std::move(row));
  }
  return {{"g", mask.grid}, {"bits", std::move(rows)}};
}

struct MaskArgs {
  std::string dump, out_grid, image, out_image;
  double rho = 90.0, tau = 1.0;
};

int cmd_mask(const MaskArgs& a) {
  const AttentionDump dump = read_dump_file(a.dump);
  const PatchMask mask = build_patch_mask(dump, {a.tau, a.rho});
  write_json(grid_json(mask), a.out_grid);
  if (!a.image.empty()) {
    const RgbImage image = read_image(a.image);
    const RgbImage masked = apply_mask(image, render_mask(mask, image.width, image.height));
    write_image(masked, a.out_image.empty() ? std::string("masked.png") : a.out_image);
  }
  return 0;
}

struct PhraseArgs {
  std::string dump, out;
  std::size_t m = 30, gap = 3, max_phrases = 10;
};

int cmd_phrases(const PhraseArgs& a) {
  const AttentionDump dump = read_dump_file(a.dump);
  write_json(to_json(select_phrases(dump, {a.m, a.gap, a.max_phrases})), a.out);
  return 0;
}

struct RunArgs {
  std::string dataset, retrievals, dumps, config, out, endpoint, model;
  std::size_t max_in_flight = 0;
};

PipelineConfig resolve_config(const RunArgs& a) {
  PipelineConfig cfg = a.config.empty() ? PipelineConfig{} : load_config(a.config);
  if (!a.endpoint.empty()) cfg.inference.endpoint_url = a.endpoint;
  if (!a.model.empty()) cfg.inference.model_name = a.model;
  if (a.max_in_flight > 0) cfg.inference.max_in_flight = a.max_in_flight;
  validate(cfg);
  return cfg;
}

int cmd_run(const RunArgs& a) {
  const PipelineConfig cfg = resolve_config(a);
  const ChatClient client(cfg.inference);
  const RunSummary s = run_dataset({a.dataset, a.retrievals, a.dumps, a.out}, cfg, client);
  std::cout << json{{"total", s.total}, {"skipped", s.skipped}, {"processed", s.processed},
                    {"answered", s.answered}, {"errors", s.errors}}
                   .dump()
            << '\n';
  return 0;
}

int cmd_select(const RunArgs& a) {
  const PipelineConfig cfg = resolve_config(a);
  const auto samples = load_dataset(a.dataset);
  const auto retrievals = load_retrievals(a.retrievals, cfg.k);
  const DumpSource dumps = directory_dumps(a.dumps);

  std::ofstream file;
  const bool to_stdout = a.out.empty() || a.out == "-";
  if (!to_stdout) file.open(a.out, std::ios::trunc);
  std::ostream& out = to_stdout ? std::cout : file;

  int failures = 0;
  for (const auto& sample : samples) {
    json line = {{"sample_id", sample.sample_id}};
    try {
      const auto it = retrievals.find(sample.sample_id);
      if (it == retrievals.end()) throw Error(ErrorCode::kInvalidArgument, "no retrieval for sample");
      const ExplicitPackage package = build_explicit(sample, it->second, dumps, cfg);
      json keywords = json::array();
      for (const auto& kw : package.keywords) keywords.push_back(to_json(kw)["phrases"]);
      line["passages"] = package.passages;
      line["keywords"] = std::move(keywords);
      line["mask"] = grid_json(package.mask);
      line["evidence"] = format_evidence(package);
    } catch (const Error& e) {
      line["error"] = fmt::format("{}: {}", error_code_name(e.code()), e.what());
      ++failures;
    }
    out << line.dump() << '\n';
  }
  return failures == 0 ? 0 : 2;
}

struct EvalArgs {
  std::string records, dataset, out, judge_endpoint;
  double relaxed_tol = 0.05;
};

int cmd_eval(const EvalArgs& a) {
  const auto dataset = load_dataset(a.dataset);
  const auto records = load_records(a.records);
  std::unique_ptr<AnswerJudge> judge;
  if (!a.judge_endpoint.empty()) judge = std::make_unique<HttpJudge>(a.judge_endpoint);
  const MetricsReport report = evaluate(records, dataset, {a.relaxed_tol, judge.get()});
  write_json(to_json(report), a.out);
  return 0;
}

struct SynthArgs {
  std::uint64_t seed = 0;
  std::size_t heads = 2, seq_len = 16, grid = 2;
  std::vector<std::size_t> sep{8, 14};
  std::string out, fixture;
  std::size_t samples = 3, passages = 2;
};

int cmd_synth(const SynthArgs& a) {
  if (a.sep.size() != 2) throw Error(ErrorCode::kInvalidArgument, "--sep takes two positions");
  const SynthDims dims{a.heads, a.seq_len, a.grid, {a.sep[0], a.sep[1]}};
  if (!a.fixture.empty()) {
    FixtureSpec spec;
    spec.samples = a.samples;
    spec.passages = a.passages;
    spec.seed = a.seed;
    const auto written = write_synthetic_fixture(a.fixture, spec);
    json ids = json::array();
    for (const auto& s : written) ids.push_back({{"sample_id", s.sample_id}, {"gold", s.gold_answer}});
    std::cout << ids.dump() << '\n';
    return 0;
  }
  if (a.out.empty()) throw Error(ErrorCode::kInvalidArgument, "synth needs --out or --fixture");
  write_dump_file(synth_dump(a.seed, dims), a.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mask-and-Select knowledge-based VQA pipeline"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  MaskArgs mask_args;
  auto* mask = app.add_subcommand("mask", "Compute the knowledge-guided patch mask of one dump");
  mask->add_option("--dump", mask_args.dump, "Attention dump (.mvd)")->required()->check(CLI::ExistingFile);
  mask->add_option("--rho", mask_args.rho, "Percentile threshold")->capture_default_str();
  mask->add_option("--tau", mask_args.tau, "Softmax temperature")->capture_default_str();
  mask->add_option("--out-grid", mask_args.out_grid, "Grid JSON output ('-' for stdout)");
  mask->add_option("--image", mask_args.image, "Image to mask (.ppm/.png)")->check(CLI::ExistingFile);
  mask->add_option("--out-image", mask_args.out_image, "Masked image output (.ppm/.png)");

  PhraseArgs phrase_args;
  auto* phrases = app.add_subcommand("phrases", "Select keyword phrases from one dump");
  phrases->add_option("--dump", phrase_args.dump, "Attention dump (.mvd)")->required()->check(CLI::ExistingFile);
  phrases->add_option("--m", phrase_args.m, "Top-m knowledge tokens")->capture_default_str();
  phrases->add_option("--gap", phrase_args.gap, "Span merge gap (characters)")->capture_default_str();
  phrases->add_option("--max-phrases", phrase_args.max_phrases, "Phrases kept")->capture_default_str();
  phrases->add_option("--out", phrase_args.out, "Output JSON ('-' for stdout)");

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run the full pipeline over a dataset");
  auto* select = app.add_subcommand("select", "Build explicit evidence packages without inference");
  for (auto* sub : {run, select}) {
    sub->add_option("--dataset", run_args.dataset, "Dataset JSONL")->required()->check(CLI::ExistingFile);
    sub->add_option("--retrievals", run_args.retrievals, "Retrieval JSONL")->required()->check(CLI::ExistingFile);
    sub->add_option("--dumps", run_args.dumps, "Directory of <sample_id>.r<rank>.mvd dumps")->required();
    sub->add_option("--config", run_args.config, "Pipeline config JSON")->check(CLI::ExistingFile);
    sub->add_option("--out", run_args.out, "Output JSONL")->required(sub == run);
    sub->add_option("--endpoint", run_args.endpoint, "Chat-completions endpoint URL");
    sub->add_option("--model", run_args.model, "Model name sent with each request");
    sub->add_option("--max-in-flight", run_args.max_in_flight, "Concurrent request cap");
  }

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Score prediction records");
  eval->add_option("--records", eval_args.records, "Records JSONL")->required()->check(CLI::ExistingFile);
  eval->add_option("--dataset", eval_args.dataset, "Dataset JSONL")->required()->check(CLI::ExistingFile);
  eval->add_option("--relaxed-tol", eval_args.relaxed_tol, "Relative tolerance for numeric answers")
      ->capture_default_str();
  eval->add_option("--judge-endpoint", eval_args.judge_endpoint, "External answer judge URL");
  eval->add_option("--out", eval_args.out, "Report JSON ('-' for stdout)");

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Write a synthetic dump or a synthetic run fixture");
  synth->add_option("--seed", synth_args.seed)->capture_default_str();
  synth->add_option("--heads", synth_args.heads)->capture_default_str();
  synth->add_option("--seq-len", synth_args.seq_len)->capture_default_str();
  synth->add_option("--grid", synth_args.grid)->capture_default_str();
  synth->add_option("--sep", synth_args.sep, "Two separator positions")->expected(2);
  synth->add_option("--out", synth_args.out, "Dump output path");
  synth->add_option("--fixture", synth_args.fixture, "Write a full synthetic run directory here");
  synth->add_option("--samples", synth_args.samples)->capture_default_str();
  synth->add_option("--passages", synth_args.passages)->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  spdlog::set_default_logger(spdlog::stderr_color_mt("masvqa"));
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);

  try {
    if (*mask) return cmd_mask(mask_args);
    if (*phrases) return cmd_phrases(phrase_args);
    if (*run) return cmd_run(run_args);
    if (*select) return cmd_select(run_args);
    if (*eval) return cmd_eval(eval_args);
    if (*synth) return cmd_synth(synth_args);
  } catch (const Error& e) {
    std::cerr << "masvqa: " << error_code_name(e.code()) << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "masvqa: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

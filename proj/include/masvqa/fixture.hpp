#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "masvqa/dump.hpp"

namespace masvqa {

struct FixtureSpec {
  std::size_t samples = 3;
  std::size_t passages = 2;  // per sample
  std::uint64_t seed = 0;
  SynthDims dims{2, 24, 7, {14, 20}};
  std::size_t image_size = 28;
};

struct FixtureSample {
  std::string sample_id;
  std::string question;
  std::string gold_answer;
};

// Writes a self-consistent synthetic run directory:
//   dataset.jsonl, retrievals.jsonl, images/<id>.ppm, dumps/<id>.r<rank>.mvd
// Passages are the synthetic dumps' knowledge texts and each question is its
// rank-1 dump's question text, so every cross-reference lines up.
std::vector<FixtureSample> write_synthetic_fixture(const std::filesystem::path& dir, const FixtureSpec& spec);

}  // namespace masvqa

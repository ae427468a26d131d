#include "masvqa/fixture.hpp"

#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "masvqa/error.hpp"
#include "masvqa/pipeline.hpp"
#include "masvqa/raster.hpp"

namespace masvqa {

std::vector<FixtureSample> write_synthetic_fixture(const std::filesystem::path& dir, const FixtureSpec& spec) {
  using json = nlohmann::json;
  namespace fs = std::filesystem;
  if (spec.samples == 0 || spec.passages == 0) {
    throw Error(ErrorCode::kInvalidArgument, "fixture needs at least one sample and one passage");
  }
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "dumps");
  std::ofstream dataset(dir / "dataset.jsonl", std::ios::trunc);
  std::ofstream retrievals(dir / "retrievals.jsonl", std::ios::trunc);
  if (!dataset || !retrievals) throw Error(ErrorCode::kIo, fmt::format("cannot write fixture in {}", dir.string()));

  constexpr const char* kTypes[] = {"string", "numerical", "time"};
  std::vector<FixtureSample> out;
  for (std::size_t s = 0; s < spec.samples; ++s) {
    const std::string id = fmt::format("syn{:04d}", s);
    json passages = json::array();
    std::string question;
    for (std::size_t r = 1; r <= spec.passages; ++r) {
      const AttentionDump dump = synth_dump(spec.seed + 1000 * s + r, spec.dims);
      write_dump_file(dump, dump_path(dir / "dumps", id, r));
      if (r == 1) question = dump.meta.question_text;
      passages.push_back({{"text", dump.meta.knowledge_text},
                          {"score", 1.0 - 0.1 * static_cast<double>(r)},
                          {"source_id", fmt::format("wiki-{}-{}", s, r)}});
    }

    RgbImage image(spec.image_size, spec.image_size);
    for (std::size_t y = 0; y < image.height; ++y) {
      for (std::size_t x = 0; x < image.width; ++x) {
        auto* px = image.at(x, y);
        px[0] = static_cast<std::uint8_t>((x * 255) / image.width);
        px[1] = static_cast<std::uint8_t>((y * 255) / image.height);
        px[2] = static_cast<std::uint8_t>((s * 70) % 256);
      }
    }
    const std::string image_name = fmt::format("images/{}.ppm", id);
    write_image(image, dir / image_name);

    const char* type = kTypes[s % 3];
    std::string gold;
    if (s % 3 == 1) {
      gold = fmt::format("{}", 100 + 10 * s);
    } else if (s % 3 == 2) {
      gold = fmt::format("{}", 1850 + s);
    } else {
      gold = fmt::format("answer {}", s);
    }
    dataset << json{{"sample_id", id},
                    {"image", image_name},
                    {"question", question},
                    {"gold_answers", {gold}},
                    {"question_type", type},
                    {"split_tags", {s % 2 == 0 ? "unseen_question" : "unseen_entity"}}}
                   .dump()
            << '\n';
    retrievals << json{{"sample_id", id}, {"passages", passages}}.dump() << '\n';
    out.push_back({id, question, gold});
  }
  return out;
}

}  // namespace masvqa

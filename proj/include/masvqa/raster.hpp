#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace masvqa {

// 8-bit interleaved RGB.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(w * h * 3, fill) {}

  std::uint8_t* at(std::size_t x, std::size_t y) { return &pixels[(y * width + x) * 3]; }
  const std::uint8_t* at(std::size_t x, std::size_t y) const { return &pixels[(y * width + x) * 3]; }

  bool operator==(const RgbImage&) const = default;
};

enum class ImageFormat { kPpm, kPng };

// Format chosen by extension: ".ppm" or ".png" (case-insensitive).
ImageFormat format_for_path(const std::filesystem::path& path);

RgbImage decode_ppm(const std::string& bytes);
std::string encode_ppm(const RgbImage& image);

RgbImage decode_png(const std::string& bytes);
std::string encode_png(const RgbImage& image);

// Sniffs the magic bytes to pick a decoder.
RgbImage decode_image(const std::string& bytes);

RgbImage read_image(const std::filesystem::path& path);
void write_image(const RgbImage& image, const std::filesystem::path& path);

}  // namespace masvqa

#include "masvqa/raster.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>
#include <png.h>

#include "masvqa/error.hpp"

namespace masvqa {

namespace {

// Reads one whitespace-delimited PPM header field, skipping '#' comments.
std::size_t read_ppm_field(const std::string& bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    const auto c = static_cast<unsigned char>(bytes[pos]);
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(c)) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t begin = pos;
  std::size_t value = 0;
  while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
    value = value * 10 + static_cast<std::size_t>(bytes[pos] - '0');
    if (value > (1u << 24)) throw Error(ErrorCode::kParse, "PPM header value too large");
    ++pos;
  }
  if (pos == begin) throw Error(ErrorCode::kParse, "malformed PPM header");
  return value;
}

}  // namespace

ImageFormat format_for_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".ppm") return ImageFormat::kPpm;
  if (ext == ".png") return ImageFormat::kPng;
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unsupported image extension '{}'", ext));
}

RgbImage decode_ppm(const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
    throw Error(ErrorCode::kParse, "not a binary PPM (P6)");
  }
  std::size_t pos = 2;
  const std::size_t width = read_ppm_field(bytes, pos);
  const std::size_t height = read_ppm_field(bytes, pos);
  const std::size_t maxval = read_ppm_field(bytes, pos);
  if (maxval == 0 || maxval > 255) throw Error(ErrorCode::kParse, "PPM maxval must be in [1, 255]");
  ++pos;  // single whitespace byte before the raster
  const std::size_t need = width * height * 3;
  if (bytes.size() < pos + need) throw Error(ErrorCode::kParse, "PPM raster truncated");

  RgbImage image(width, height);
  for (std::size_t k = 0; k < need; ++k) {
    const auto v = static_cast<unsigned char>(bytes[pos + k]);
    image.pixels[k] = static_cast<std::uint8_t>(maxval == 255 ? v : (v * 255 + maxval / 2) / maxval);
  }
  return image;
}

std::string encode_ppm(const RgbImage& image) {
  std::string out = fmt::format("P6\n{} {}\n255\n", image.width, image.height);
  out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
  return out;
}

RgbImage decode_png(const std::string& bytes) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    throw Error(ErrorCode::kParse, fmt::format("PNG decode failed: {}", png.message));
  }
  png.format = PNG_FORMAT_RGB;
  RgbImage image(png.width, png.height);
  if (!png_image_finish_read(&png, nullptr, image.pixels.data(), 0, nullptr)) {
    png_image_free(&png);
    throw Error(ErrorCode::kParse, fmt::format("PNG decode failed: {}", png.message));
  }
  return image;
}

std::string encode_png(const RgbImage& image) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, image.pixels.data(), 0, nullptr)) {
    throw Error(ErrorCode::kIo, fmt::format("PNG encode failed: {}", png.message));
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, image.pixels.data(), 0, nullptr)) {
    throw Error(ErrorCode::kIo, fmt::format("PNG encode failed: {}", png.message));
  }
  out.resize(size);
  return out;
}

RgbImage decode_image(const std::string& bytes) {
  if (bytes.size() >= 8 && png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) == 0) {
    return decode_png(bytes);
  }
  return decode_ppm(bytes);
}

RgbImage read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot open image {}", path.string()));
  return decode_image(std::string{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});
}

void write_image(const RgbImage& image, const std::filesystem::path& path) {
  const std::string bytes =
      format_for_path(path) == ImageFormat::kPng ? encode_png(image) : encode_ppm(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write image {}", path.string()));
}

}  // namespace masvqa

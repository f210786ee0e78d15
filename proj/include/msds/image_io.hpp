#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace msds {

/// Interleaved 8-bit image; channels is 1 (grayscale) or 3 (RGB).
struct ImageU8 {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t& at(int y, int x, int c) {
    return pixels[(static_cast<size_t>(y) * width + x) * channels + static_cast<size_t>(c)];
  }
  std::uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<size_t>(y) * width + x) * channels + static_cast<size_t>(c)];
  }
};

/// Encodes to a PNG byte stream (color type 0 or 2, 8-bit, no interlace).
std::string encode_png(const ImageU8& img);

/// Decodes an 8-bit PNG; gray/RGB/alpha variants are normalized to the
/// stored channel count (alpha dropped). Palette, 16-bit, and interlaced
/// files are rejected.
ImageU8 decode_png(const std::string& bytes, const std::string& origin);

void write_png(const std::filesystem::path& path, const ImageU8& img);
ImageU8 read_png(const std::filesystem::path& path);

}  // namespace msds

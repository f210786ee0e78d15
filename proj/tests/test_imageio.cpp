#include <doctest.h>

#include <filesystem>
#include <random>

#include "msds/image_io.hpp"

using namespace msds;

TEST_CASE("png round-trips rgb and grayscale pixels exactly") {
  std::mt19937_64 rng(31);
  for (int channels : {1, 3}) {
    ImageU8 img;
    img.width = 37;
    img.height = 23;
    img.channels = channels;
    img.pixels.resize(static_cast<size_t>(37) * 23 * channels);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng() & 0xff);

    const std::string bytes = encode_png(img);
    const ImageU8 back = decode_png(bytes, "mem");
    CHECK(back.width == img.width);
    CHECK(back.height == img.height);
    CHECK(back.channels == channels);
    CHECK(back.pixels == img.pixels);
  }
}

TEST_CASE("png encoding is deterministic") {
  ImageU8 img;
  img.width = img.height = 16;
  img.channels = 3;
  img.pixels.resize(16 * 16 * 3);
  for (size_t i = 0; i < img.pixels.size(); ++i) {
    img.pixels[i] = static_cast<std::uint8_t>((i * 31) & 0xff);
  }
  CHECK(encode_png(img) == encode_png(img));
}

TEST_CASE("png decoder rejects garbage and truncation") {
  CHECK_THROWS(decode_png("not a png", "mem"));
  ImageU8 img;
  img.width = img.height = 4;
  img.channels = 1;
  img.pixels.assign(16, 128);
  const std::string bytes = encode_png(img);
  CHECK_THROWS(decode_png(bytes.substr(0, bytes.size() - 8), "mem"));
  std::string corrupt = bytes;
  corrupt[20] ^= 0x5a;
  CHECK_THROWS(decode_png(corrupt, "mem"));
}

TEST_CASE("png file io") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "msds_png_test";
  fs::create_directories(dir);
  ImageU8 img;
  img.width = 5;
  img.height = 3;
  img.channels = 3;
  img.pixels.assign(45, 0);
  img.at(1, 2, 0) = 255;
  write_png(dir / "a.png", img);
  const ImageU8 back = read_png(dir / "a.png");
  CHECK(back.at(1, 2, 0) == 255);
  CHECK(back.at(1, 2, 1) == 0);
  CHECK_THROWS(read_png(dir / "missing.png"));
  fs::remove_all(dir);
}

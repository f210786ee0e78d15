#include "msds/image_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace msds {

namespace {

void put_u32be(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

std::uint32_t get_u32be(const unsigned char* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) |
         (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void append_chunk(std::string& out, const char type[4], const std::string& payload) {
  put_u32be(out, static_cast<std::uint32_t>(payload.size()));
  const size_t start = out.size();
  out.append(type, 4);
  out.append(payload);
  const std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(0, reinterpret_cast<const Bytef*>(out.data() + start), static_cast<uInt>(out.size() - start)));
  put_u32be(out, crc);
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

std::string encode_png(const ImageU8& img) {
  if (img.width < 1 || img.height < 1 || (img.channels != 1 && img.channels != 3)) {
    throw std::invalid_argument("encode_png: expected 1- or 3-channel image");
  }
  if (img.pixels.size() !=
      static_cast<size_t>(img.width) * img.height * img.channels) {
    throw std::invalid_argument("encode_png: pixel buffer size mismatch");
  }
  const size_t stride = static_cast<size_t>(img.width) * img.channels;
  std::string raw;
  raw.reserve((stride + 1) * static_cast<size_t>(img.height));
  for (int y = 0; y < img.height; ++y) {
    raw.push_back('\0');  // filter type 0
    raw.append(reinterpret_cast<const char*>(img.pixels.data() + y * stride), stride);
  }

  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::string deflated(bound, '\0');
  if (compress2(reinterpret_cast<Bytef*>(deflated.data()), &bound,
                reinterpret_cast<const Bytef*>(raw.data()),
                static_cast<uLong>(raw.size()), 6) != Z_OK) {
    throw std::runtime_error("encode_png: deflate failed");
  }
  deflated.resize(bound);

  std::string ihdr;
  put_u32be(ihdr, static_cast<std::uint32_t>(img.width));
  put_u32be(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr.push_back(8);                                     // bit depth
  ihdr.push_back(img.channels == 1 ? '\0' : char(2));    // color type
  ihdr.push_back('\0');                                  // compression
  ihdr.push_back('\0');                                  // filter
  ihdr.push_back('\0');                                  // no interlace

  std::string out("\x89PNG\r\n\x1a\n", 8);
  append_chunk(out, "IHDR", ihdr);
  append_chunk(out, "IDAT", deflated);
  append_chunk(out, "IEND", "");
  return out;
}

ImageU8 decode_png(const std::string& bytes, const std::string& origin) {
  const auto fail = [&origin](const std::string& why) -> ImageU8 {
    throw std::runtime_error("decode_png: " + why + " (" + origin + ")");
  };
  if (bytes.size() < 8 || std::memcmp(bytes.data(), "\x89PNG\r\n\x1a\n", 8) != 0) {
    return fail("not a PNG file");
  }
  const unsigned char* data = reinterpret_cast<const unsigned char*>(bytes.data());
  size_t pos = 8;
  int width = 0, height = 0, bit_depth = 0, color_type = -1;
  std::string idat;
  bool saw_end = false;
  while (pos + 8 <= bytes.size() && !saw_end) {
    const std::uint32_t len = get_u32be(data + pos);
    if (pos + 12 + len > bytes.size()) return fail("truncated chunk");
    const char* type = bytes.data() + pos + 4;
    const unsigned char* payload = data + pos + 8;
    const std::uint32_t expect_crc = get_u32be(data + pos + 8 + len);
    const std::uint32_t got_crc = static_cast<std::uint32_t>(
        crc32(0, data + pos + 4, static_cast<uInt>(len + 4)));
    if (expect_crc != got_crc) return fail("chunk CRC mismatch");
    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) return fail("bad IHDR length");
      width = static_cast<int>(get_u32be(payload));
      height = static_cast<int>(get_u32be(payload + 4));
      bit_depth = payload[8];
      color_type = payload[9];
      if (payload[12] != 0) return fail("interlaced PNG not supported");
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.append(reinterpret_cast<const char*>(payload), len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      saw_end = true;
    }
    pos += 12 + len;
  }
  if (!saw_end) return fail("truncated PNG (no IEND)");
  if (width < 1 || height < 1) return fail("missing IHDR");
  if (bit_depth != 8) return fail("only 8-bit PNGs supported");
  int src_channels = 0;
  switch (color_type) {
    case 0: src_channels = 1; break;
    case 2: src_channels = 3; break;
    case 4: src_channels = 2; break;
    case 6: src_channels = 4; break;
    default: return fail("palette PNGs not supported");
  }

  const size_t stride = static_cast<size_t>(width) * src_channels;
  const size_t raw_size = (stride + 1) * static_cast<size_t>(height);
  std::vector<unsigned char> raw(raw_size);
  uLongf out_len = static_cast<uLongf>(raw_size);
  if (uncompress(raw.data(), &out_len, reinterpret_cast<const Bytef*>(idat.data()),
                 static_cast<uLong>(idat.size())) != Z_OK ||
      out_len != raw_size) {
    return fail("inflate failed");
  }

  // Undo per-scanline filters in place.
  const int bpp = src_channels;
  std::vector<unsigned char> prev(stride, 0);
  std::vector<unsigned char> scan(stride);
  ImageU8 img;
  const int dst_channels = (src_channels == 1 || src_channels == 2) ? 1 : 3;
  img.width = width;
  img.height = height;
  img.channels = dst_channels;
  img.pixels.resize(static_cast<size_t>(width) * height * dst_channels);
  for (int y = 0; y < height; ++y) {
    const unsigned char* row = raw.data() + static_cast<size_t>(y) * (stride + 1);
    const unsigned char filter = row[0];
    std::memcpy(scan.data(), row + 1, stride);
    for (size_t i = 0; i < stride; ++i) {
      const int left = i >= static_cast<size_t>(bpp) ? scan[i - static_cast<size_t>(bpp)] : 0;
      const int up = prev[i];
      const int upleft = i >= static_cast<size_t>(bpp) ? prev[i - static_cast<size_t>(bpp)] : 0;
      int v = scan[i];
      switch (filter) {
        case 0: break;
        case 1: v += left; break;
        case 2: v += up; break;
        case 3: v += (left + up) / 2; break;
        case 4: v += paeth(left, up, upleft); break;
        default: return fail("unknown scanline filter");
      }
      scan[i] = static_cast<unsigned char>(v & 0xff);
    }
    for (int x = 0; x < width; ++x) {
      const unsigned char* px = scan.data() + static_cast<size_t>(x) * src_channels;
      for (int c = 0; c < dst_channels; ++c) {
        img.at(y, x, c) = px[c];
      }
    }
    prev = scan;
  }
  return img;
}

void write_png(const std::filesystem::path& path, const ImageU8& img) {
  const std::string bytes = encode_png(img);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open image for writing: " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("failed writing image: " + path.string());
}

ImageU8 read_png(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open image: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_png(bytes, path.string());
}

}  // namespace msds

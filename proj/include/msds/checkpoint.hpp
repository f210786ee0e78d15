#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "msds/network.hpp"

namespace msds {

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof(bits));
  put_u32(out, bits);
}

class ByteReader {
 public:
  ByteReader(const std::string& data, std::string origin)
      : data_(data), origin_(std::move(origin)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + static_cast<size_t>(i)])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + static_cast<size_t>(i)])) << (8 * i);
    }
    pos_ += 8;
    return v;
  }

  float f32() {
    const std::uint32_t bits = u32();
    float f;
    std::memcpy(&f, &bits, sizeof(f));
    return f;
  }

  std::string bytes(std::uint64_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const { return pos_ == data_.size(); }

 private:
  void need(std::uint64_t n) {
    if (pos_ + n > data_.size()) {
      throw std::runtime_error("truncated checkpoint: " + origin_);
    }
  }
  const std::string& data_;
  std::string origin_;
  size_t pos_ = 0;
};

}  // namespace detail

inline constexpr const char* kCheckpointMagic = "MSDSCKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Serializes config plus every named tensor (parameters and batch-norm
/// running buffers) as shape-prefixed little-endian float32 payloads.
template <typename S>
std::string checkpoint_bytes(const Network<S>& net) {
  std::string out;
  out.append(kCheckpointMagic, 8);
  detail::put_u32(out, kCheckpointVersion);
  const std::string cfg_json = to_json(net.config()).dump();
  detail::put_u64(out, cfg_json.size());
  out.append(cfg_json);
  const auto& store = net.params();
  detail::put_u64(out, static_cast<std::uint64_t>(store.count()));
  for (int i = 0; i < store.count(); ++i) {
    const auto& e = store.entry(i);
    detail::put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.append(e.name);
    detail::put_u32(out, static_cast<std::uint32_t>(e.value.batch()));
    detail::put_u32(out, static_cast<std::uint32_t>(e.value.channels()));
    detail::put_u32(out, static_cast<std::uint32_t>(e.value.height()));
    detail::put_u32(out, static_cast<std::uint32_t>(e.value.width()));
    for (Eigen::Index k = 0; k < e.value.size(); ++k) {
      detail::put_f32(out, static_cast<float>(e.value.array()[k]));
    }
  }
  return out;
}

template <typename S>
void save_checkpoint(const Network<S>& net, const std::filesystem::path& path) {
  const std::string bytes = checkpoint_bytes(net);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open file: " + path.string());
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return data;
}

template <typename S>
Network<S> load_checkpoint_bytes(const std::string& data, const std::string& origin) {
  detail::ByteReader r(data, origin);
  if (r.bytes(8) != std::string(kCheckpointMagic, 8)) {
    throw std::runtime_error("not a checkpoint file: " + origin);
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " +
                             std::to_string(version) + ": " + origin);
  }
  const std::uint64_t cfg_len = r.u64();
  const NetworkConfig cfg =
      network_config_from_json(nlohmann::json::parse(r.bytes(cfg_len)));
  Network<S> net(cfg, 0);
  auto& store = net.params();
  const std::uint64_t count = r.u64();
  if (count != static_cast<std::uint64_t>(store.count())) {
    throw std::runtime_error("checkpoint tensor count " + std::to_string(count) +
                             " does not match architecture (" +
                             std::to_string(store.count()) + "): " + origin);
  }
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = r.u32();
    const std::string name = r.bytes(name_len);
    const int entry_idx = store.find(name);
    if (entry_idx < 0) {
      throw std::runtime_error("checkpoint tensor '" + name +
                               "' unknown to this architecture: " + origin);
    }
    auto& e = store.entry(entry_idx);
    const int n = static_cast<int>(r.u32()), c = static_cast<int>(r.u32());
    const int h = static_cast<int>(r.u32()), w = static_cast<int>(r.u32());
    if (n != e.value.batch() || c != e.value.channels() ||
        h != e.value.height() || w != e.value.width()) {
      throw std::runtime_error("checkpoint tensor '" + name + "' shape mismatch: " + origin);
    }
    for (Eigen::Index k = 0; k < e.value.size(); ++k) {
      e.value.array()[k] = static_cast<S>(r.f32());
    }
  }
  if (!r.at_end()) {
    throw std::runtime_error("trailing bytes in checkpoint: " + origin);
  }
  return net;
}

template <typename S>
Network<S> load_checkpoint(const std::filesystem::path& path) {
  return load_checkpoint_bytes<S>(read_file_bytes(path), path.string());
}

inline NetworkConfig checkpoint_config(const std::filesystem::path& path) {
  const std::string data = read_file_bytes(path);
  detail::ByteReader r(data, path.string());
  if (r.bytes(8) != std::string(kCheckpointMagic, 8)) {
    throw std::runtime_error("not a checkpoint file: " + path.string());
  }
  r.u32();
  const std::uint64_t cfg_len = r.u64();
  return network_config_from_json(nlohmann::json::parse(r.bytes(cfg_len)));
}

/// FNV-1a hash of a byte string; used for determinism checks and manifests.
inline std::uint64_t fnv1a_hash(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace msds

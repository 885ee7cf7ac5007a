#pragma once

#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <string_view>

namespace pathgan {

/// 64-bit FNV-1a. Used for content digests of tensors, feature payloads,
/// images and configs; stable across runs and platforms.
class Fnv1a {
public:
  void update(const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      state_ ^= bytes[i];
      state_ *= 0x100000001b3ULL;
    }
  }
  void update(std::string_view s) { update(s.data(), s.size()); }
  template <typename T>
  void update(std::span<const T> values) { update(values.data(), values.size_bytes()); }

  std::uint64_t value() const { return state_; }
  std::string hex() const { return to_hex(state_); }

  static std::string to_hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
  }

private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::string digest_hex(const void* data, std::size_t size) {
  Fnv1a h;
  h.update(data, size);
  return h.hex();
}

inline std::string digest_hex(std::string_view s) { return digest_hex(s.data(), s.size()); }

} // namespace pathgan

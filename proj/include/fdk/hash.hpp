#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

namespace fdk {

inline constexpr std::uint64_t kFnvOffset = 0xCBF29CE484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x00000100000001B3ULL;

inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = kFnvOffset) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

// 32-byte fingerprint: four FNV-1a lanes with documented distinct seeds,
// little-endian concatenated. Used to bind embedding caches to the backbone
// that produced them; a staleness check, not a cryptographic digest.
using Fingerprint = std::array<std::uint8_t, 32>;

Fingerprint fingerprint_bytes(const std::string& a, const std::string& b);

std::string to_hex(const std::uint8_t* data, std::size_t len);
std::string hash_to_hex16(std::uint64_t h);
bool parse_hex16(const std::string& s, std::uint64_t& out);
bool parse_fingerprint_hex(const std::string& s, Fingerprint& out);

std::uint64_t hash_file(const std::string& path);

}  // namespace fdk

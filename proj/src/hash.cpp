#include "fdk/hash.hpp"

#include <cstring>

#include "fdk/io_util.hpp"

namespace fdk {

namespace {

// Lane seeds for the 32-byte fingerprint, fixed by the cache format.
constexpr std::uint64_t kLaneSeeds[4] = {
    0xCBF29CE484222325ULL,  // FNV offset basis
    0x9E3779B97F4A7C15ULL,
    0xC2B2AE3D27D4EB4FULL,
    0x165667B19E3779F9ULL,
};

}  // namespace

Fingerprint fingerprint_bytes(const std::string& a, const std::string& b) {
  std::string framed;
  framed.reserve(a.size() + b.size() + 16);
  append_u64(framed, a.size());
  framed += a;
  append_u64(framed, b.size());
  framed += b;
  Fingerprint fp{};
  for (int lane = 0; lane < 4; ++lane) {
    std::uint64_t h = fnv1a64(framed.data(), framed.size(), kLaneSeeds[lane]);
    std::memcpy(fp.data() + lane * 8, &h, 8);
  }
  return fp;
}

std::string to_hex(const std::uint8_t* data, std::size_t len) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (std::size_t i = 0; i < len; ++i) {
    out.push_back(digits[data[i] >> 4]);
    out.push_back(digits[data[i] & 0xF]);
  }
  return out;
}

std::string hash_to_hex16(std::uint64_t h) {
  std::uint8_t bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<std::uint8_t>(h >> (56 - 8 * i));
  return to_hex(bytes, 8);
}

namespace {

int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

bool parse_hex16(const std::string& s, std::uint64_t& out) {
  if (s.size() != 16) return false;
  out = 0;
  for (char c : s) {
    int d = hex_digit(c);
    if (d < 0) return false;
    out = (out << 4) | static_cast<std::uint64_t>(d);
  }
  return true;
}

bool parse_fingerprint_hex(const std::string& s, Fingerprint& out) {
  if (s.size() != 64) return false;
  for (std::size_t i = 0; i < 32; ++i) {
    int hi = hex_digit(s[2 * i]);
    int lo = hex_digit(s[2 * i + 1]);
    if (hi < 0 || lo < 0) return false;
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return true;
}

std::uint64_t hash_file(const std::string& path) {
  std::string bytes = read_file(path);
  return fnv1a64(bytes.data(), bytes.size());
}

}  // namespace fdk

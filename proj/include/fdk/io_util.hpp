#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "fdk/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; big-endian hosts are unsupported");

namespace fdk {

std::string read_file(const std::string& path);
bool file_exists(const std::string& path);

// Write via a temp file in the same directory, then rename. Failed runs
// never leave torn output behind.
void atomic_write_file(const std::string& path, const std::string& content);

// Shortest round-trip decimal form (std::to_chars).
std::string format_float(double v);
std::string format_float(float v);

void append_u16(std::string& out, std::uint16_t v);
void append_u32(std::string& out, std::uint32_t v);
void append_u64(std::string& out, std::uint64_t v);
void append_f32(std::string& out, float v);

// Sequential little-endian reader over an in-memory buffer.
class Cursor {
 public:
  Cursor(const std::string& buf, std::string what) : buf_(buf), what_(std::move(what)) {}

  std::uint16_t u16() { return static_cast<std::uint16_t>(raw(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(raw(4)); }
  std::uint64_t u64() { return raw(8); }
  std::string bytes(std::size_t n);
  float f32();
  std::size_t remaining() const { return buf_.size() - off_; }
  std::size_t offset() const { return off_; }

 private:
  std::uint64_t raw(int n);
  const std::string& buf_;
  std::string what_;
  std::size_t off_ = 0;
};

std::vector<std::string> split_ws(const std::string& line);
std::vector<std::string> split_csv(const std::string& s);
double parse_double(const std::string& tok, const std::string& ctx);
std::int64_t parse_int(const std::string& tok, const std::string& ctx);

}  // namespace fdk

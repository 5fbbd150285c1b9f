#include "fdk/io_util.hpp"

#include <charconv>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace fdk {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), Err::IoError, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  require(!in.bad(), Err::IoError, "read failed for " + path);
  return buf.str();
}

bool file_exists(const std::string& path) {
  std::error_code ec;
  return fs::exists(path, ec);
}

void atomic_write_file(const std::string& path, const std::string& content) {
  fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), Err::IoError, "cannot create " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    require(out.good(), Err::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(Err::IoError, "rename to " + path + " failed");
  }
}

std::string format_float(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_float(float v) { return format_float(static_cast<double>(v)); }

void append_u16(std::string& out, std::uint16_t v) {
  out.append(reinterpret_cast<const char*>(&v), 2);
}
void append_u32(std::string& out, std::uint32_t v) {
  out.append(reinterpret_cast<const char*>(&v), 4);
}
void append_u64(std::string& out, std::uint64_t v) {
  out.append(reinterpret_cast<const char*>(&v), 8);
}
void append_f32(std::string& out, float v) {
  out.append(reinterpret_cast<const char*>(&v), 4);
}

std::uint64_t Cursor::raw(int n) {
  require(off_ + static_cast<std::size_t>(n) <= buf_.size(), Err::TruncatedPayload,
          what_ + " truncated at offset " + std::to_string(off_));
  std::uint64_t v = 0;
  std::memcpy(&v, buf_.data() + off_, static_cast<std::size_t>(n));
  off_ += static_cast<std::size_t>(n);
  return v;
}

std::string Cursor::bytes(std::size_t n) {
  require(off_ + n <= buf_.size(), Err::TruncatedPayload,
          what_ + " truncated at offset " + std::to_string(off_));
  std::string s = buf_.substr(off_, n);
  off_ += n;
  return s;
}

float Cursor::f32() {
  std::uint32_t v = u32();
  float f;
  std::memcpy(&f, &v, 4);
  return f;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> toks;
  std::istringstream is(line);
  std::string t;
  while (is >> t) toks.push_back(t);
  return toks;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = s.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

double parse_double(const std::string& tok, const std::string& ctx) {
  double v = 0.0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  require(res.ec == std::errc() && res.ptr == tok.data() + tok.size(), Err::ParseError,
          ctx + ": bad number '" + tok + "'");
  return v;
}

std::int64_t parse_int(const std::string& tok, const std::string& ctx) {
  std::int64_t v = 0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  require(res.ec == std::errc() && res.ptr == tok.data() + tok.size(), Err::ParseError,
          ctx + ": bad integer '" + tok + "'");
  return v;
}

}  // namespace fdk

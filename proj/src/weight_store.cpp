#include "fdk/weight_store.hpp"

#include <cstring>

#include "fdk/error.hpp"
#include "fdk/io_util.hpp"

namespace fdk {

namespace {
constexpr char kMagic[4] = {'F', 'D', 'K', 'W'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void WeightStore::add(const std::string& name, const float* data, std::size_t count) {
  require(!name.empty(), Err::InvalidArgument, "weight name must not be empty");
  require(!entries_.count(name), Err::InvalidArgument, "duplicate weight name " + name);
  Entry e;
  e.offset_bytes = payload_.size() * 4;
  e.byte_len = count * 4;
  payload_.insert(payload_.end(), data, data + count);
  entries_[name] = e;
}

std::span<const float> WeightStore::lookup(const std::string& name) const {
  auto it = entries_.find(name);
  require(it != entries_.end(), Err::MissingWeight, "no weight entry named " + name);
  const Entry& e = it->second;
  return {payload_.data() + e.offset_bytes / 4, static_cast<std::size_t>(e.byte_len / 4)};
}

std::string WeightStore::serialize() const {
  std::string out;
  out.append(kMagic, 4);
  append_u32(out, kVersion);
  append_u64(out, payload_.size() * 4);
  append_u32(out, static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [name, e] : entries_) {
    append_u16(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    append_u64(out, e.offset_bytes);
    append_u64(out, e.byte_len);
  }
  out.append(reinterpret_cast<const char*>(payload_.data()), payload_.size() * 4);
  return out;
}

WeightStore WeightStore::deserialize(const std::string& bytes) {
  Cursor cur(bytes, "weight blob");
  require(cur.bytes(4) == std::string(kMagic, 4), Err::ParseError,
          "weight blob magic is not FDKW");
  std::uint32_t version = cur.u32();
  require(version == kVersion, Err::ParseError,
          "unsupported weight blob version " + std::to_string(version));
  std::uint64_t payload_bytes = cur.u64();
  require(payload_bytes % 4 == 0, Err::ParseError, "payload length not a multiple of 4");
  std::uint32_t count = cur.u32();

  WeightStore ws;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint16_t name_len = cur.u16();
    std::string name = cur.bytes(name_len);
    Entry e;
    e.offset_bytes = cur.u64();
    e.byte_len = cur.u64();
    require(e.offset_bytes % 4 == 0 && e.byte_len % 4 == 0, Err::ParseError,
            "entry " + name + " not 4-byte aligned");
    require(e.offset_bytes + e.byte_len <= payload_bytes, Err::ParseError,
            "entry " + name + " extends past payload");
    require(ws.entries_.emplace(name, e).second, Err::ParseError,
            "duplicate weight entry " + name);
  }
  require(cur.remaining() == payload_bytes, Err::TruncatedPayload,
          "payload length disagrees with header");
  ws.payload_.resize(payload_bytes / 4);
  std::string raw = cur.bytes(payload_bytes);
  std::memcpy(ws.payload_.data(), raw.data(), payload_bytes);
  return ws;
}

void WeightStore::save(const std::string& path) const { atomic_write_file(path, serialize()); }

WeightStore WeightStore::load(const std::string& path) {
  return deserialize(read_file(path));
}

}  // namespace fdk

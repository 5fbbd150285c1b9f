#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace fdk {

// Named float32 parameter blob, the "FDKW" container. Layout (little-endian):
//   magic "FDKW" | version u32 | payload byte length u64 | entry count u32 |
//   entries (u16 name length, name, u64 byte offset, u64 byte length) |
//   payload floats. Entries are sorted by name; offsets are relative to the
//   payload start; byte lengths are multiples of 4.
class WeightStore {
 public:
  struct Entry {
    std::uint64_t offset_bytes = 0;
    std::uint64_t byte_len = 0;
  };

  void add(const std::string& name, const float* data, std::size_t count);
  void add(const std::string& name, const std::vector<float>& data) {
    add(name, data.data(), data.size());
  }

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  std::span<const float> lookup(const std::string& name) const;
  std::size_t size() const { return entries_.size(); }

  std::string serialize() const;
  static WeightStore deserialize(const std::string& bytes);

  void save(const std::string& path) const;
  static WeightStore load(const std::string& path);

 private:
  std::map<std::string, Entry> entries_;
  std::vector<float> payload_;
};

}  // namespace fdk

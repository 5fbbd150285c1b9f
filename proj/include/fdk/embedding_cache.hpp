#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>

#include "fdk/hash.hpp"

namespace fdk {

// Persisted map from image content hash to bottleneck feature vector,
// stamped with the fingerprint of the backbone that produced it. The "FDKE"
// container (little-endian):
//   magic "FDKE" | version u32 | fingerprint (32 bytes) | D u32 | count u64 |
//   records (hash u64, D float32), sorted by hash.
class EmbeddingCache {
 public:
  EmbeddingCache() = default;
  EmbeddingCache(int dim, const Fingerprint& fp) : dim_(dim), fingerprint_(fp) {}

  int dim() const { return dim_; }
  const Fingerprint& fingerprint() const { return fingerprint_; }
  std::size_t size() const { return entries_.size(); }
  bool contains(std::uint64_t hash) const { return entries_.count(hash) != 0; }

  // Throws MissingEmbedding when absent.
  const Eigen::VectorXf& at(std::uint64_t hash) const;
  void insert(std::uint64_t hash, Eigen::VectorXf embedding);

  std::string serialize() const;
  static EmbeddingCache deserialize(const std::string& bytes);
  void save(const std::string& path) const;
  static EmbeddingCache load(const std::string& path);

 private:
  int dim_ = 0;
  Fingerprint fingerprint_{};
  std::map<std::uint64_t, Eigen::VectorXf> entries_;
};

}  // namespace fdk

#include "fdk/embedding_cache.hpp"

#include "fdk/error.hpp"
#include "fdk/io_util.hpp"

namespace fdk {

namespace {
constexpr char kMagic[4] = {'F', 'D', 'K', 'E'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

const Eigen::VectorXf& EmbeddingCache::at(std::uint64_t hash) const {
  auto it = entries_.find(hash);
  require(it != entries_.end(), Err::MissingEmbedding,
          "no embedding cached for content hash " + hash_to_hex16(hash));
  return it->second;
}

void EmbeddingCache::insert(std::uint64_t hash, Eigen::VectorXf embedding) {
  require(embedding.size() == dim_, Err::DimensionMismatch,
          "embedding length " + std::to_string(embedding.size()) + " != cache dim " +
              std::to_string(dim_));
  entries_.insert_or_assign(hash, std::move(embedding));
}

std::string EmbeddingCache::serialize() const {
  std::string out;
  out.append(kMagic, 4);
  append_u32(out, kVersion);
  out.append(reinterpret_cast<const char*>(fingerprint_.data()), fingerprint_.size());
  append_u32(out, static_cast<std::uint32_t>(dim_));
  append_u64(out, entries_.size());
  for (const auto& [hash, vec] : entries_) {  // std::map: ascending hash order
    append_u64(out, hash);
    out.append(reinterpret_cast<const char*>(vec.data()),
               static_cast<std::size_t>(vec.size()) * 4);
  }
  return out;
}

EmbeddingCache EmbeddingCache::deserialize(const std::string& bytes) {
  Cursor cur(bytes, "embedding cache");
  require(cur.bytes(4) == std::string(kMagic, 4), Err::ParseError,
          "embedding cache magic is not FDKE");
  std::uint32_t version = cur.u32();
  require(version == kVersion, Err::ParseError,
          "unsupported embedding cache version " + std::to_string(version));
  EmbeddingCache cache;
  std::string fp = cur.bytes(32);
  std::copy(fp.begin(), fp.end(), reinterpret_cast<char*>(cache.fingerprint_.data()));
  cache.dim_ = static_cast<int>(cur.u32());
  require(cache.dim_ >= 1, Err::ParseError, "embedding cache dim must be >= 1");
  std::uint64_t count = cur.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint64_t hash = cur.u64();
    Eigen::VectorXf v(cache.dim_);
    for (int j = 0; j < cache.dim_; ++j) v[j] = cur.f32();
    cache.entries_.emplace(hash, std::move(v));
  }
  require(cur.remaining() == 0, Err::ParseError, "trailing bytes after embedding cache records");
  return cache;
}

void EmbeddingCache::save(const std::string& path) const {
  atomic_write_file(path, serialize());
}

EmbeddingCache EmbeddingCache::load(const std::string& path) {
  return deserialize(read_file(path));
}

}  // namespace fdk

#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cascadeqa {

// Fixed pretrained word vectors plus a bank of random vectors for
// out-of-vocabulary tokens. Immutable after construction; safe for
// concurrent reads.
//
// In-vocabulary vectors are L2-normalized at load. Each OOV bank vector is
// drawn N(0, 1) per coordinate from the table seed and used as drawn. Keys and
// queries are ASCII-lowercased. An OOV token maps to bucket
// oov_hash(token, seed) % oov_buckets, where oov_hash is 64-bit FNV-1a over
// the seed's eight little-endian bytes followed by the lowercased token bytes.
class EmbeddingTable {
 public:
  static constexpr std::size_t kDefaultOovBuckets = 1000;
  static constexpr std::uint64_t kDefaultSeed = 0x5EED;

  EmbeddingTable(std::size_t dimension, std::uint64_t seed = kDefaultSeed,
                 std::size_t oov_buckets = kDefaultOovBuckets);

  // Adds a vector, normalizing it. Returns false (and keeps the existing
  // vector) when the token is already present. Throws DataError on a zero or
  // non-finite vector and DimensionError on a length mismatch.
  bool add(std::string_view token, std::span<const double> vector);

  std::size_t dimension() const { return dimension_; }
  std::size_t vocab_size() const { return index_.size(); }
  std::size_t oov_buckets() const { return oov_buckets_; }
  std::uint64_t seed() const { return seed_; }

  bool contains(std::string_view token) const;
  std::span<const double> lookup(std::string_view token) const;
  std::size_t oov_bucket(std::string_view token) const;
  std::span<const double> oov_vector(std::size_t bucket) const;

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
  std::size_t oov_buckets_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> vectors_;
  std::vector<double> oov_bank_;
};

std::string ascii_lower(std::string_view s);
std::uint64_t oov_hash(std::string_view lowered_token, std::uint64_t seed);

// Reads `token v1 ... v_dimension` lines. Blank lines are skipped, as is a
// leading word2vec-style "<count> <dimension>" header. Duplicate tokens keep
// their first vector.
EmbeddingTable load_embeddings(std::istream& in, std::size_t dimension,
                               std::uint64_t seed = EmbeddingTable::kDefaultSeed);
EmbeddingTable load_embeddings_file(const std::string& path, std::size_t dimension,
                                    std::uint64_t seed = EmbeddingTable::kDefaultSeed);
// Dimension taken from the first vector line.
std::size_t sniff_embedding_dimension(const std::string& path);

}  // namespace cascadeqa

#include "cascadeqa/embeddings/embedding_table.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cascadeqa/util/error.hpp"
#include "cascadeqa/util/random.hpp"

namespace cascadeqa {
namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

bool is_count_header(const std::vector<std::string_view>& fields) {
  if (fields.size() != 2) return false;
  for (auto f : fields) {
    if (f.empty()) return false;
    for (char c : f)
      if (c < '0' || c > '9') return false;
  }
  return true;
}

}  // namespace

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::uint64_t oov_hash(std::string_view lowered_token, std::uint64_t seed) {
  std::uint64_t h = kFnvOffset;
  for (int b = 0; b < 8; ++b) {
    h ^= (seed >> (8 * b)) & 0xFF;
    h *= kFnvPrime;
  }
  for (unsigned char c : lowered_token) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

EmbeddingTable::EmbeddingTable(std::size_t dimension, std::uint64_t seed, std::size_t oov_buckets)
    : dimension_(dimension), seed_(seed), oov_buckets_(oov_buckets) {
  if (dimension_ == 0) throw ContractError("embedding dimension must be positive");
  if (oov_buckets_ == 0) throw ContractError("OOV bucket count must be positive");
  Rng rng(seed_);
  oov_bank_.resize(oov_buckets_ * dimension_);
  for (double& v : oov_bank_) v = rng.normal();
}

bool EmbeddingTable::add(std::string_view token, std::span<const double> vector) {
  if (vector.size() != dimension_) {
    throw DimensionError("embedding for '" + std::string(token) + "' has " +
                         std::to_string(vector.size()) + " components, expected " +
                         std::to_string(dimension_));
  }
  std::string key = ascii_lower(token);
  if (index_.contains(key)) return false;
  double sq = 0.0;
  for (double v : vector) sq += v * v;
  const double norm = std::sqrt(sq);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw DataError("embedding for '" + std::string(token) + "' has zero or non-finite norm");
  }
  index_.emplace(std::move(key), vectors_.size() / dimension_);
  for (double v : vector) vectors_.push_back(v / norm);
  return true;
}

bool EmbeddingTable::contains(std::string_view token) const { return index_.contains(ascii_lower(token)); }

std::size_t EmbeddingTable::oov_bucket(std::string_view token) const {
  return static_cast<std::size_t>(oov_hash(ascii_lower(token), seed_) % oov_buckets_);
}

std::span<const double> EmbeddingTable::oov_vector(std::size_t bucket) const {
  return {oov_bank_.data() + bucket * dimension_, dimension_};
}

std::span<const double> EmbeddingTable::lookup(std::string_view token) const {
  const std::string key = ascii_lower(token);
  if (auto it = index_.find(key); it != index_.end()) {
    return {vectors_.data() + it->second * dimension_, dimension_};
  }
  return oov_vector(static_cast<std::size_t>(oov_hash(key, seed_) % oov_buckets_));
}

EmbeddingTable load_embeddings(std::istream& in, std::size_t dimension, std::uint64_t seed) {
  EmbeddingTable table(dimension, seed);
  std::string line;
  std::size_t line_no = 0;
  bool first_content = true;
  std::vector<double> values(dimension);
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (first_content && dimension != 1 && is_count_header(fields)) {
      first_content = false;
      continue;
    }
    first_content = false;
    if (fields.size() != dimension + 1) {
      throw ParseError("embedding line " + std::to_string(line_no) + ": expected " +
                       std::to_string(dimension) + " components, found " +
                       std::to_string(fields.size() - 1));
    }
    for (std::size_t i = 0; i < dimension; ++i) {
      if (!parse_double(fields[i + 1], values[i])) {
        throw ParseError("embedding line " + std::to_string(line_no) + ": bad number '" +
                         std::string(fields[i + 1]) + "'");
      }
    }
    try {
      table.add(fields[0], values);
    } catch (const DataError& e) {
      throw DataError("embedding line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return table;
}

EmbeddingTable load_embeddings_file(const std::string& path, std::size_t dimension,
                                    std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embeddings file: " + path);
  return load_embeddings(in, dimension, seed);
}

std::size_t sniff_embedding_dimension(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embeddings file: " + path);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    const auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (first && is_count_header(fields)) {
      first = false;
      continue;
    }
    if (fields.size() < 2) throw ParseError("embeddings file " + path + ": vector line has no components");
    return fields.size() - 1;
  }
  throw ParseError("embeddings file " + path + " contains no vectors");
}

}  // namespace cascadeqa

#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "cascadeqa/corpus/example.hpp"
#include "cascadeqa/embeddings/embedding_table.hpp"
#include "cascadeqa/model/cascade.hpp"

namespace cascadeqa::fixtures {

// Lowercased token vocabulary of every question and document, sorted.
std::vector<std::string> vocabulary(const std::vector<QAExample>& examples);

// Random unit vectors for every word (OOV bank from the default seed).
EmbeddingTable random_table(const std::vector<std::string>& words, std::size_t dim, std::uint64_t seed);
void write_embeddings(std::ostream& out, const EmbeddingTable& table, const std::vector<std::string>& words);

// 3 sentences, 12 tokens, answer "Pollock" mentioned twice.
QAExample toy_example();

// Each document lists four "<key> zorp <cand> ." sentences twice, in two
// shuffled orders. The question names one key; the answer is that key's
// candidate. Candidates come from a small pool shared by every split, so a
// name is the answer in some documents and a distractor in others.
std::vector<QAExample> keyed_corpus(std::size_t n, std::uint64_t seed, bool held_out);

// Six "then <trigger> <cand> ." sentences in random order: the answer follows
// "alpha" once and "beta" once, one distractor follows "alpha" twice and
// another follows "beta" twice. No single mention separates the answer from a
// distractor. Candidates share the keyed corpus's pool.
std::vector<QAExample> multi_mention_corpus(std::size_t n, std::uint64_t seed, bool held_out);

ModelConfig small_config(std::size_t dim, std::size_t hidden, std::uint64_t seed = 7);

struct Prepared {
  PreparedExample example;
  EncodedExample encoded;
};
Prepared prepare_one(const QAExample& ex, const EmbeddingTable& table, std::size_t max_span_length = 5);

}  // namespace cascadeqa::fixtures

#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cascadeqa/training/gradcheck.hpp"
#include "cascadeqa/util/random.hpp"

namespace cascadeqa::fixtures {

std::vector<std::string> vocabulary(const std::vector<QAExample>& examples) {
  std::set<std::string> words;
  auto add = [&](const std::string& text) {
    for (const auto& t : tokenize(text).tokens) words.insert(ascii_lower(t.text));
  };
  for (const auto& ex : examples) {
    add(ex.question);
    for (const auto& d : ex.documents) add(d);
  }
  return {words.begin(), words.end()};
}

EmbeddingTable random_table(const std::vector<std::string>& words, std::size_t dim, std::uint64_t seed) {
  EmbeddingTable table(dim);
  Rng rng(seed);
  std::vector<double> v(dim);
  for (const auto& w : words) {
    for (double& x : v) x = rng.normal();
    table.add(w, v);
  }
  return table;
}

void write_embeddings(std::ostream& out, const EmbeddingTable& table, const std::vector<std::string>& words) {
  out.precision(17);
  for (const auto& w : words) {
    out << w;
    for (double x : table.lookup(w)) out << ' ' << x;
    out << '\n';
  }
}

QAExample toy_example() { return toy_gradcheck_example(); }

namespace {

std::vector<std::size_t> shuffled_pool(Rng& rng, std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  rng.shuffle(v);
  return v;
}

constexpr std::size_t kCandidatePool = 12;

}  // namespace

std::vector<QAExample> keyed_corpus(std::size_t n, std::uint64_t seed, bool held_out) {
  Rng rng(seed);
  std::vector<QAExample> out;
  for (std::size_t e = 0; e < n; ++e) {
    const auto cands = shuffled_pool(rng, kCandidatePool);
    const auto keys = shuffled_pool(rng, 24);
    const std::size_t target = rng.below(4);
    std::vector<std::size_t> order{0, 1, 2, 3};
    std::string doc;
    for (int round = 0; round < 2; ++round) {
      rng.shuffle(order);
      for (std::size_t s : order)
        doc += "key" + std::to_string(keys[s]) + " zorp cand" + std::to_string(cands[s]) + " . ";
    }
    out.push_back({(held_out ? "heldout-" : "train-") + std::to_string(e),
                   "Which zorp for key" + std::to_string(keys[target]) + " ?",
                   {doc},
                   {"cand" + std::to_string(cands[target])}});
  }
  return out;
}

std::vector<QAExample> multi_mention_corpus(std::size_t n, std::uint64_t seed, bool held_out) {
  Rng rng(seed);
  std::vector<QAExample> out;
  for (std::size_t e = 0; e < n; ++e) {
    const auto cands = shuffled_pool(rng, kCandidatePool);
    const std::string ans = "cand" + std::to_string(cands[0]);
    const std::string x = "cand" + std::to_string(cands[1]);
    const std::string y = "cand" + std::to_string(cands[2]);
    std::vector<std::pair<std::string, std::string>> mentions{
        {"alpha", ans}, {"beta", ans}, {"alpha", x}, {"alpha", x}, {"beta", y}, {"beta", y}};
    rng.shuffle(mentions);
    std::string doc;
    for (const auto& [trigger, cand] : mentions) doc += "then " + trigger + " " + cand + " . ";
    out.push_back({(held_out ? "mm-heldout-" : "mm-train-") + std::to_string(e), "Which one is it ?", {doc}, {ans}});
  }
  return out;
}

ModelConfig small_config(std::size_t dim, std::size_t hidden, std::uint64_t seed) {
  ModelConfig c;
  c.embedding_dim = dim;
  c.hidden = hidden;
  c.seed = seed;
  return c;
}

Prepared prepare_one(const QAExample& ex, const EmbeddingTable& table, std::size_t max_span_length) {
  PreprocessConfig cfg;
  cfg.max_span_length = max_span_length;
  auto p = prepare_example(ex, cfg);
  Prepared out{std::move(p.at(0)), {}};
  out.encoded = encode(out.example, table);
  return out;
}

}  // namespace cascadeqa::fixtures

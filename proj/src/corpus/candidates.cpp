#include "cascadeqa/corpus/candidates.hpp"

#include <algorithm>
#include <array>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

#include "cascadeqa/embeddings/embedding_table.hpp"
#include "cascadeqa/eval/metrics.hpp"
#include "cascadeqa/util/error.hpp"

namespace cascadeqa {
namespace {

// Articles, prepositions, wh-words and forms of "be".
constexpr std::array<std::string_view, 54> kStopwords = {
    "a",      "an",     "the",     "about",  "above", "across", "after", "against", "along",
    "among",  "around", "at",      "before", "behind", "below", "between", "by",    "during",
    "for",    "from",   "in",      "inside", "into",  "near",   "of",    "off",     "on",
    "onto",   "over",   "through", "to",     "toward", "under", "upon",  "with",    "within",
    "without", "what",  "which",   "who",    "whom",  "whose",  "when",  "where",   "why",
    "how",    "be",     "am",      "is",     "are",   "was",    "were",  "been",    "being",
};

bool all_punct(std::string_view t) {
  return !t.empty() && std::all_of(t.begin(), t.end(), [](char c) {
    const auto u = static_cast<unsigned char>(c);
    return (u >= 33 && u <= 47) || (u >= 58 && u <= 64) || (u >= 91 && u <= 96) || (u >= 123 && u <= 126);
  });
}

}  // namespace

bool is_stopword(std::string_view lowered) {
  return std::find(kStopwords.begin(), kStopwords.end(), lowered) != kStopwords.end();
}

std::vector<SpanCandidate> generate_spans(const Document& doc, std::size_t max_length,
                                          std::size_t document_index) {
  if (max_length < 1) throw ContractError("maximum span length must be >= 1");
  std::vector<SpanCandidate> spans;
  for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
    const SentenceRange& r = doc.sentences[s];
    for (std::size_t start = r.begin; start < r.end; ++start) {
      const std::size_t longest = std::min(max_length, r.end - start);
      for (std::size_t len = 1; len <= longest; ++len) {
        spans.push_back({.document = document_index, .sentence = s, .begin = start, .end = start + len});
      }
    }
  }
  return spans;
}

std::vector<UniqueCandidate> build_unique_map(std::vector<SpanCandidate>& spans,
                                              std::span<const Document> docs) {
  std::vector<UniqueCandidate> uniques;
  std::unordered_map<std::string, std::size_t> by_key;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    SpanCandidate& sp = spans[i];
    const Document& doc = docs[sp.document];
    std::vector<std::string> tokens;
    std::string key;
    for (std::size_t t = sp.begin; t < sp.end; ++t) {
      tokens.push_back(ascii_lower(doc.tokens[t].text));
      key += tokens.back();
      key += '\x1f';
    }
    auto [it, inserted] = by_key.try_emplace(std::move(key), uniques.size());
    if (inserted) uniques.push_back({.tokens = std::move(tokens)});
    sp.unique_id = it->second;
    uniques[it->second].mentions.push_back(i);
  }
  return uniques;
}

std::size_t mark_gold(std::vector<SpanCandidate>& spans, std::vector<UniqueCandidate>& uniques,
                      std::span<const Document> docs, std::span<const std::string> aliases) {
  std::unordered_set<std::string> targets;
  for (const auto& a : aliases) {
    std::string n = normalize_answer(a);
    if (!n.empty()) targets.insert(std::move(n));
  }
  std::size_t gold = 0;
  for (auto& u : uniques) u.is_gold = false;
  for (auto& sp : spans) {
    sp.is_gold = targets.contains(normalize_answer(join_tokens(docs[sp.document], sp.begin, sp.end)));
    if (sp.is_gold) {
      ++gold;
      uniques[sp.unique_id].is_gold = true;
    }
  }
  return gold;
}

bool question_in_span(std::span<const std::string> question, std::span<const Token> span_tokens) {
  for (const auto& q : question) {
    const std::string lq = ascii_lower(q);
    if (all_punct(lq) || is_stopword(lq)) continue;
    for (const auto& t : span_tokens) {
      if (ascii_lower(t.text) == lq) return true;
    }
  }
  return false;
}

}  // namespace cascadeqa

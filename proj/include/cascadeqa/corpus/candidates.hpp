#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cascadeqa/corpus/document.hpp"

namespace cascadeqa {

// A within-sentence window [begin, end) of one document's tokens.
struct SpanCandidate {
  std::size_t document = 0;
  // Sentence index within `document`.
  std::size_t sentence = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t unique_id = 0;
  bool is_gold = false;

  std::size_t length() const { return end - begin; }
  friend bool operator==(const SpanCandidate&, const SpanCandidate&) = default;
};

// Equivalence class of spans with the same lowercased token sequence.
// Mentions are span indices in increasing order.
struct UniqueCandidate {
  std::vector<std::string> tokens;
  std::vector<std::size_t> mentions;
  bool is_gold = false;
};

// Every window of length 1..max_length inside each sentence, ordered by
// (sentence, start, length).
std::vector<SpanCandidate> generate_spans(const Document& doc, std::size_t max_length,
                                          std::size_t document_index = 0);

// Assigns unique_id on every span; unique ids follow first occurrence.
// `docs` is indexed by SpanCandidate::document.
std::vector<UniqueCandidate> build_unique_map(std::vector<SpanCandidate>& spans,
                                              std::span<const Document> docs);

// A span is gold iff normalize_answer(span text) equals the normalization of
// any alias (aliases normalizing to "" are ignored). A unique candidate is gold
// iff any of its mentions is. Returns the number of gold spans.
std::size_t mark_gold(std::vector<SpanCandidate>& spans, std::vector<UniqueCandidate>& uniques,
                      std::span<const Document> docs, std::span<const std::string> aliases);

// 1 iff a lowercased question token that is neither a stopword nor pure
// punctuation occurs among the lowercased span tokens.
bool question_in_span(std::span<const std::string> question, std::span<const Token> span_tokens);

bool is_stopword(std::string_view lowered);

}  // namespace cascadeqa

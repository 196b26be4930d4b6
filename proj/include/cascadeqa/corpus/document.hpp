#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace cascadeqa {

struct Token {
  std::string text;
  // Index in the untruncated token stream.
  std::size_t position = 0;

  friend bool operator==(const Token&, const Token&) = default;
};

// [begin, end) into Document::tokens.
struct SentenceRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  friend bool operator==(const SentenceRange&, const SentenceRange&) = default;
};

// Tokenized evidence text. Sentence ranges partition tokens in order.
struct Document {
  std::vector<Token> tokens;
  std::vector<SentenceRange> sentences;
  std::size_t original_length = 0;

  bool empty() const { return tokens.empty(); }
  bool truncated() const { return tokens.size() < original_length; }
  friend bool operator==(const Document&, const Document&) = default;
};

struct TruncationLimits {
  std::size_t max_tokens = 6000;
  std::size_t max_sentences = 1000;
  std::size_t max_sentence_length = 50;
};

// Whitespace split, leading/trailing ASCII punctuation peeled into one token
// per character, sentence break after a '.', '?' or '!' token that ends its
// whitespace-delimited chunk.
Document tokenize(std::string_view text);

// Applies the caps in order: per-sentence length, sentence count, then total
// tokens (whole sentences kept, the last one possibly cut). Idempotent.
Document truncate(const Document& doc, const TruncationLimits& limits = {});

// Builds a document directly from pre-split sentences (tests, synthetic data).
Document make_document(const std::vector<std::vector<std::string>>& sentences);

std::string join_tokens(const Document& doc, std::size_t begin, std::size_t end);

}  // namespace cascadeqa

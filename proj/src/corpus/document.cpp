#include "cascadeqa/corpus/document.hpp"

#include <algorithm>

#include "cascadeqa/util/error.hpp"

namespace cascadeqa {
namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (u >= 33 && u <= 47) || (u >= 58 && u <= 64) || (u >= 91 && u <= 96) || (u >= 123 && u <= 126);
}

bool is_terminator(std::string_view t) { return t == "." || t == "?" || t == "!"; }

}  // namespace

Document tokenize(std::string_view text) {
  Document doc;
  std::size_t sentence_begin = 0;
  auto emit = [&](std::string_view t) {
    doc.tokens.push_back({std::string(t), doc.tokens.size()});
  };
  auto close_sentence = [&] {
    if (doc.tokens.size() > sentence_begin) {
      doc.sentences.push_back({sentence_begin, doc.tokens.size()});
      sentence_begin = doc.tokens.size();
    }
  };

  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i == start) break;
    std::string_view chunk = text.substr(start, i - start);

    std::size_t lead = 0;
    while (lead < chunk.size() && is_punct(chunk[lead])) ++lead;
    if (lead == chunk.size()) {
      // all punctuation: one token per character
      for (std::size_t k = 0; k < chunk.size(); ++k) emit(chunk.substr(k, 1));
    } else {
      std::size_t trail = chunk.size();
      while (trail > lead && is_punct(chunk[trail - 1])) --trail;
      for (std::size_t k = 0; k < lead; ++k) emit(chunk.substr(k, 1));
      emit(chunk.substr(lead, trail - lead));
      for (std::size_t k = trail; k < chunk.size(); ++k) emit(chunk.substr(k, 1));
    }
    if (is_terminator(doc.tokens.back().text)) close_sentence();
  }
  close_sentence();
  doc.original_length = doc.tokens.size();
  return doc;
}

Document truncate(const Document& doc, const TruncationLimits& limits) {
  if (limits.max_tokens == 0 || limits.max_sentences == 0 || limits.max_sentence_length == 0) {
    throw ContractError("truncation limits must be positive");
  }
  Document out;
  out.original_length = doc.original_length;
  const std::size_t n_sent = std::min(doc.sentences.size(), limits.max_sentences);
  for (std::size_t s = 0; s < n_sent && out.tokens.size() < limits.max_tokens; ++s) {
    const SentenceRange& r = doc.sentences[s];
    std::size_t len = std::min(r.size(), limits.max_sentence_length);
    len = std::min(len, limits.max_tokens - out.tokens.size());
    const std::size_t begin = out.tokens.size();
    for (std::size_t k = 0; k < len; ++k) out.tokens.push_back(doc.tokens[r.begin + k]);
    out.sentences.push_back({begin, out.tokens.size()});
  }
  return out;
}

Document make_document(const std::vector<std::vector<std::string>>& sentences) {
  Document doc;
  for (const auto& sentence : sentences) {
    if (sentence.empty()) continue;
    const std::size_t begin = doc.tokens.size();
    for (const auto& t : sentence) doc.tokens.push_back({t, doc.tokens.size()});
    doc.sentences.push_back({begin, doc.tokens.size()});
  }
  doc.original_length = doc.tokens.size();
  return doc;
}

std::string join_tokens(const Document& doc, std::size_t begin, std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) out += ' ';
    out += doc.tokens[i].text;
  }
  return out;
}

}  // namespace cascadeqa

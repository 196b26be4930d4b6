#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "cascadeqa/corpus/candidates.hpp"
#include "cascadeqa/corpus/document.hpp"

namespace cascadeqa {

// One JSON-lines record: {"id", "question", "documents": [...], "answers": [...]}.
struct QAExample {
  std::string id;
  std::string question;
  std::vector<std::string> documents;
  std::vector<std::string> answers;
};

// per_question: one instance holding every document (candidate sets are
// concatenated). per_document: one instance per (question, document) pair.
enum class InstanceMode { PerQuestion, PerDocument };

struct PreprocessConfig {
  TruncationLimits limits;
  std::size_t max_span_length = 5;
  InstanceMode mode = InstanceMode::PerQuestion;
};

// Sentence of one document inside an instance.
struct SentenceRef {
  std::size_t document = 0;
  std::size_t sentence = 0;
  SentenceRange range;
};

// A model-ready instance: tokenized question, truncated documents, span and
// unique candidates with gold flags and the question-in-span bit per span.
struct PreparedExample {
  std::string id;
  std::vector<std::string> question;
  std::vector<Document> documents;
  std::vector<SentenceRef> sentences;
  // For document d, sentence s is sentences[sentence_offset[d] + s].
  std::vector<std::size_t> sentence_offset;
  std::vector<SpanCandidate> spans;
  std::vector<UniqueCandidate> uniques;
  std::vector<std::uint8_t> gamma;
  std::vector<std::string> answers;
  std::size_t gold_span_count = 0;

  bool has_candidates() const { return !spans.empty(); }
  bool has_gold() const { return gold_span_count > 0; }
  std::size_t global_sentence(const SpanCandidate& s) const { return sentence_offset[s.document] + s.sentence; }
  std::string span_text(std::size_t span) const;
  // Surface text of the unique candidate's first mention.
  std::string unique_text(std::size_t unique) const;
  std::vector<std::size_t> gold_spans() const;
  std::vector<std::size_t> gold_uniques() const;
};

std::vector<std::string> tokenize_question(const std::string& question);

// Builds an instance from pre-tokenized documents (already truncated).
PreparedExample prepare_instance(std::string id, std::vector<std::string> question,
                                 std::vector<Document> documents, std::vector<std::string> answers,
                                 std::size_t max_span_length);

// Tokenize, truncate, enumerate, map and mark. Throws ContractError for an
// empty question, no documents or no answers.
std::vector<PreparedExample> prepare_example(const QAExample& example, const PreprocessConfig& config);
std::vector<PreparedExample> prepare_corpus(const std::vector<QAExample>& examples,
                                            const PreprocessConfig& config);

// JSON lines. ParseError carries the 1-based line number.
std::vector<QAExample> read_jsonl(std::istream& in);
std::vector<QAExample> read_jsonl_file(const std::string& path);
void write_jsonl(std::ostream& out, const std::vector<QAExample>& examples);

}  // namespace cascadeqa

#include "cascadeqa/corpus/example.hpp"

#include <fstream>
#include "json.hpp"

#include "cascadeqa/util/error.hpp"

namespace cascadeqa {

std::string PreparedExample::span_text(std::size_t span) const {
  const SpanCandidate& s = spans.at(span);
  return join_tokens(documents[s.document], s.begin, s.end);
}

std::string PreparedExample::unique_text(std::size_t unique) const {
  return span_text(uniques.at(unique).mentions.front());
}

std::vector<std::size_t> PreparedExample::gold_spans() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < spans.size(); ++i)
    if (spans[i].is_gold) out.push_back(i);
  return out;
}

std::vector<std::size_t> PreparedExample::gold_uniques() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < uniques.size(); ++i)
    if (uniques[i].is_gold) out.push_back(i);
  return out;
}

std::vector<std::string> tokenize_question(const std::string& question) {
  std::vector<std::string> out;
  for (auto& t : tokenize(question).tokens) out.push_back(std::move(t.text));
  return out;
}

PreparedExample prepare_instance(std::string id, std::vector<std::string> question,
                                 std::vector<Document> documents, std::vector<std::string> answers,
                                 std::size_t max_span_length) {
  if (question.empty()) throw ContractError("example '" + id + "' has an empty question");
  PreparedExample ex;
  ex.id = std::move(id);
  ex.question = std::move(question);
  ex.documents = std::move(documents);
  ex.answers = std::move(answers);
  for (std::size_t d = 0; d < ex.documents.size(); ++d) {
    ex.sentence_offset.push_back(ex.sentences.size());
    const Document& doc = ex.documents[d];
    for (std::size_t s = 0; s < doc.sentences.size(); ++s) ex.sentences.push_back({d, s, doc.sentences[s]});
    auto spans = generate_spans(doc, max_span_length, d);
    ex.spans.insert(ex.spans.end(), spans.begin(), spans.end());
  }
  ex.uniques = build_unique_map(ex.spans, ex.documents);
  ex.gold_span_count = mark_gold(ex.spans, ex.uniques, ex.documents, ex.answers);
  ex.gamma.reserve(ex.spans.size());
  for (const auto& sp : ex.spans) {
    const auto& toks = ex.documents[sp.document].tokens;
    ex.gamma.push_back(question_in_span(ex.question, std::span(toks).subspan(sp.begin, sp.length())) ? 1 : 0);
  }
  return ex;
}

std::vector<PreparedExample> prepare_example(const QAExample& example, const PreprocessConfig& config) {
  if (example.documents.empty()) throw ContractError("example '" + example.id + "' has no documents");
  if (example.answers.empty()) throw ContractError("example '" + example.id + "' has no answers");
  auto question = tokenize_question(example.question);
  if (question.empty()) throw ContractError("example '" + example.id + "' has an empty question");

  std::vector<Document> docs;
  docs.reserve(example.documents.size());
  for (const auto& text : example.documents) docs.push_back(truncate(tokenize(text), config.limits));

  std::vector<PreparedExample> out;
  if (config.mode == InstanceMode::PerQuestion) {
    out.push_back(prepare_instance(example.id, std::move(question), std::move(docs), example.answers,
                                   config.max_span_length));
  } else {
    for (std::size_t d = 0; d < docs.size(); ++d) {
      std::string id = docs.size() == 1 ? example.id : example.id + "#" + std::to_string(d);
      out.push_back(prepare_instance(std::move(id), question, {std::move(docs[d])}, example.answers,
                                     config.max_span_length));
    }
  }
  return out;
}

std::vector<PreparedExample> prepare_corpus(const std::vector<QAExample>& examples,
                                            const PreprocessConfig& config) {
  std::vector<PreparedExample> out;
  for (const auto& ex : examples) {
    auto instances = prepare_example(ex, config);
    for (auto& inst : instances) out.push_back(std::move(inst));
  }
  return out;
}

std::vector<QAExample> read_jsonl(std::istream& in) {
  std::vector<QAExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "corpus line " + std::to_string(line_no) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(where + e.what());
    }
    try {
      QAExample ex;
      ex.id = j.at("id").get<std::string>();
      ex.question = j.at("question").get<std::string>();
      ex.documents = j.at("documents").get<std::vector<std::string>>();
      ex.answers = j.at("answers").get<std::vector<std::string>>();
      if (ex.documents.empty()) throw ParseError(where + "'documents' is empty");
      if (ex.answers.empty()) throw ParseError(where + "'answers' is empty");
      out.push_back(std::move(ex));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + e.what());
    }
  }
  return out;
}

std::vector<QAExample> read_jsonl_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file: " + path);
  return read_jsonl(in);
}

void write_jsonl(std::ostream& out, const std::vector<QAExample>& examples) {
  for (const auto& ex : examples) {
    nlohmann::json j = {{"id", ex.id}, {"question", ex.question}, {"documents", ex.documents}, {"answers", ex.answers}};
    out << j.dump() << '\n';
  }
}

}  // namespace cascadeqa

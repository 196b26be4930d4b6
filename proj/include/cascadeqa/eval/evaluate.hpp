#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cascadeqa/corpus/example.hpp"
#include "cascadeqa/embeddings/embedding_table.hpp"
#include "cascadeqa/model/cascade.hpp"

namespace cascadeqa {

class WorkerPool;

// Occurrence-count buckets: 1, 2-5, 6-15, 16+, and "none" (no prediction, or
// no gold mention in the document).
inline constexpr std::size_t kFrequencyBuckets = 5;
std::size_t frequency_bucket(std::size_t count);
const std::array<std::string, kFrequencyBuckets>& frequency_labels();

struct ExampleRecord {
  std::string id;
  bool answerable = false;
  std::string prediction;
  double score = 0.0;
  std::size_t mentions = 0;  // occurrences of the predicted candidate
  std::optional<std::string> matched_alias;
  int em = 0;
  double f1 = 0.0;
  // 1-based rank of the best-ranked correct candidate, if any.
  std::optional<std::size_t> gold_rank;
  std::size_t gold_mentions = 0;
};

struct EvalReport {
  double em = 0.0;
  double f1 = 0.0;
  std::vector<ExampleRecord> records;
  // topk[k-1] = fraction of examples with a correct candidate among the top k.
  std::vector<double> topk;
  std::array<std::size_t, kFrequencyBuckets> predicted_frequency{};
  std::array<std::size_t, kFrequencyBuckets> gold_frequency{};
};

// Scores every example and aggregates. UsageError on an empty corpus or
// k_max = 0; VersionError when the table dimension differs from the model's.
EvalReport evaluate(const CascadeModel& model, const std::vector<PreparedExample>& corpus,
                    const EmbeddingTable& table, std::size_t k_max, WorkerPool* pool = nullptr);

void write_report_json(std::ostream& out, const EvalReport& report);
void write_topk_csv(std::ostream& out, const EvalReport& report);
void write_frequency_csv(std::ostream& out, const EvalReport& report);
// report.json, topk.csv and frequency.csv under dir (created if missing).
void write_report_files(const std::string& dir, const EvalReport& report);

struct SweepRow {
  std::size_t limit = 0;
  double em = 0.0;
  // Fraction of instances where some gold mention survives truncation.
  double oracle_em = 0.0;
};

// Re-preprocesses the corpus with max_tokens set to each limit and evaluates.
std::vector<SweepRow> truncation_sweep(const CascadeModel& model, const std::vector<QAExample>& corpus,
                                       const EmbeddingTable& table, const PreprocessConfig& base,
                                       const std::vector<std::size_t>& limits, WorkerPool* pool = nullptr);
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace cascadeqa

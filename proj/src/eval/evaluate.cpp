#include "cascadeqa/eval/evaluate.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>

#include "cascadeqa/eval/metrics.hpp"
#include "cascadeqa/util/error.hpp"
#include "json.hpp"

namespace cascadeqa {

std::size_t frequency_bucket(std::size_t count) {
  if (count == 0) return 4;
  if (count == 1) return 0;
  if (count <= 5) return 1;
  if (count <= 15) return 2;
  return 3;
}

const std::array<std::string, kFrequencyBuckets>& frequency_labels() {
  static const std::array<std::string, kFrequencyBuckets> labels{"1", "2-5", "6-15", "16+", "none"};
  return labels;
}

namespace {

std::optional<std::string> matching_alias(const std::string& prediction, const std::vector<std::string>& aliases) {
  const std::string p = normalize_answer(prediction);
  for (const auto& a : aliases)
    if (normalize_answer(a) == p) return a;
  return std::nullopt;
}

}  // namespace

EvalReport evaluate(const CascadeModel& model, const std::vector<PreparedExample>& corpus,
                    const EmbeddingTable& table, std::size_t k_max, WorkerPool* pool) {
  if (corpus.empty()) throw UsageError("evaluation corpus is empty");
  if (k_max == 0) throw UsageError("top-k size must be >= 1");
  if (table.dimension() != model.config().embedding_dim) {
    throw VersionError("embedding dimension " + std::to_string(table.dimension()) + " does not match model dimension " +
                       std::to_string(model.config().embedding_dim));
  }
  const CascadeLayout& layout = model.config().layout;
  EvalReport report;
  report.topk.assign(k_max, 0.0);
  std::vector<std::size_t> hits(k_max, 0);

  for (const PreparedExample& ex : corpus) {
    ExampleRecord rec;
    rec.id = ex.id;
    rec.gold_mentions = ex.gold_span_count;
    if (ex.has_candidates()) {
      const CascadeScores scores = model.score(encode(ex, table), ex, pool);
      const Prediction p = predict(scores, ex, layout);
      rec.answerable = p.answerable;
      rec.prediction = p.text;
      rec.score = p.score;
      rec.mentions = p.mentions;
      rec.matched_alias = matching_alias(p.text, ex.answers);
      rec.em = rec.matched_alias ? 1 : 0;
      rec.f1 = token_f1(p.text, ex.answers);

      const std::vector<double> ranked = candidate_scores(scores, ex, layout);
      const auto order = top_k(ranked, ranked.size());
      for (std::size_t r = 0; r < order.size(); ++r) {
        if (exact_match(ex.unique_text(order[r]), ex.answers)) {
          rec.gold_rank = r + 1;
          break;
        }
      }
      if (rec.gold_rank)
        for (std::size_t k = *rec.gold_rank; k <= k_max; ++k) ++hits[k - 1];
    }
    report.em += rec.em;
    report.f1 += rec.f1;
    ++report.predicted_frequency[frequency_bucket(rec.answerable ? rec.mentions : 0)];
    ++report.gold_frequency[frequency_bucket(rec.gold_mentions)];
    report.records.push_back(std::move(rec));
  }
  const double n = static_cast<double>(corpus.size());
  report.em /= n;
  report.f1 /= n;
  for (std::size_t k = 0; k < k_max; ++k) report.topk[k] = static_cast<double>(hits[k]) / n;
  return report;
}

void write_report_json(std::ostream& out, const EvalReport& report) {
  nlohmann::json j;
  j["em"] = report.em;
  j["f1"] = report.f1;
  j["examples"] = report.records.size();
  j["topk"] = nlohmann::json::array();
  for (std::size_t k = 0; k < report.topk.size(); ++k) j["topk"].push_back({{"k", k + 1}, {"accuracy", report.topk[k]}});
  j["frequency"] = nlohmann::json::array();
  for (std::size_t b = 0; b < kFrequencyBuckets; ++b) {
    j["frequency"].push_back({{"bucket", frequency_labels()[b]},
                              {"predicted", report.predicted_frequency[b]},
                              {"gold", report.gold_frequency[b]}});
  }
  j["records"] = nlohmann::json::array();
  for (const auto& r : report.records) {
    nlohmann::json e = {{"id", r.id},           {"answerable", r.answerable}, {"prediction", r.prediction},
                        {"score", r.score},     {"mentions", r.mentions},     {"em", r.em},
                        {"f1", r.f1},           {"gold_mentions", r.gold_mentions}};
    e["matched_alias"] = r.matched_alias ? nlohmann::json(*r.matched_alias) : nlohmann::json(nullptr);
    e["gold_rank"] = r.gold_rank ? nlohmann::json(*r.gold_rank) : nlohmann::json(nullptr);
    j["records"].push_back(std::move(e));
  }
  out << j.dump(2) << '\n';
}

void write_topk_csv(std::ostream& out, const EvalReport& report) {
  out << "k,accuracy\n";
  for (std::size_t k = 0; k < report.topk.size(); ++k) out << k + 1 << ',' << report.topk[k] << '\n';
}

void write_frequency_csv(std::ostream& out, const EvalReport& report) {
  out << "bucket,predicted,gold\n";
  for (std::size_t b = 0; b < kFrequencyBuckets; ++b) {
    out << frequency_labels()[b] << ',' << report.predicted_frequency[b] << ',' << report.gold_frequency[b] << '\n';
  }
}

namespace {

template <typename Fn>
void write_file(const std::filesystem::path& path, Fn&& fn) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  fn(out);
  if (!out) throw IoError("error writing " + path.string());
}

}  // namespace

void write_report_files(const std::string& dir, const EvalReport& report) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
  const std::filesystem::path d(dir);
  write_file(d / "report.json", [&](std::ostream& o) { write_report_json(o, report); });
  write_file(d / "topk.csv", [&](std::ostream& o) { write_topk_csv(o, report); });
  write_file(d / "frequency.csv", [&](std::ostream& o) { write_frequency_csv(o, report); });
}

std::vector<SweepRow> truncation_sweep(const CascadeModel& model, const std::vector<QAExample>& corpus,
                                       const EmbeddingTable& table, const PreprocessConfig& base,
                                       const std::vector<std::size_t>& limits, WorkerPool* pool) {
  std::vector<SweepRow> rows;
  for (std::size_t limit : limits) {
    if (limit == 0) throw UsageError("truncation limit must be >= 1");
    PreprocessConfig cfg = base;
    cfg.limits.max_tokens = limit;
    const auto prepared = prepare_corpus(corpus, cfg);
    const EvalReport r = evaluate(model, prepared, table, 1, pool);
    std::size_t reachable = 0;
    for (const auto& ex : prepared) reachable += ex.has_gold() ? 1 : 0;
    rows.push_back({limit, r.em, static_cast<double>(reachable) / static_cast<double>(prepared.size())});
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "limit,em,oracle_em\n";
  for (const auto& r : rows) out << r.limit << ',' << r.em << ',' << r.oracle_em << '\n';
}

}  // namespace cascadeqa

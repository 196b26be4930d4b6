#include "cascadeqa/bench/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <ostream>
#include <string>

#include "cascadeqa/bench/bilstm.hpp"
#include "cascadeqa/corpus/example.hpp"
#include "cascadeqa/embeddings/embedding_table.hpp"
#include "cascadeqa/kernels/kernels.hpp"
#include "cascadeqa/model/cascade.hpp"
#include "cascadeqa/util/error.hpp"
#include "cascadeqa/util/random.hpp"
#include "cascadeqa/util/thread_pool.hpp"

namespace cascadeqa {
namespace {

constexpr std::size_t kVocabulary = 5000;

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <typename Fn>
double time_ms(Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void BenchConfig::validate() const {
  if (workers < 1) throw UsageError("bench needs workers >= 1");
  if (reps < 1) throw UsageError("bench needs reps >= 1");
  if (lengths.empty()) throw UsageError("bench needs at least one length");
  if (!std::is_sorted(lengths.begin(), lengths.end())) throw UsageError("bench lengths must be ascending");
  if (lengths.front() == 0) throw UsageError("bench lengths must be positive");
  if (dim == 0 || hidden == 0 || state == 0 || question_length == 0) throw UsageError("bench sizes must be positive");
}

Document synthetic_document(std::size_t n, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x444f43, n));
  std::vector<std::vector<std::string>> sentences;
  std::size_t left = n;
  while (left > 0) {
    const std::size_t len = std::min<std::size_t>(left, 8 + rng.below(23));
    std::vector<std::string> s;
    for (std::size_t i = 0; i + 1 < len; ++i) s.push_back("w" + std::to_string(rng.below(kVocabulary)));
    s.push_back(".");
    sentences.push_back(std::move(s));
    left -= len;
  }
  return make_document(sentences);
}

BenchResult run_benchmark(const BenchConfig& config) {
  config.validate();
  ModelConfig mc;
  mc.embedding_dim = config.dim;
  mc.hidden = config.hidden;
  mc.seed = config.seed;
  const CascadeModel model(mc);
  const BiLstmParams lstm = BiLstmParams::random(config.dim, config.state, mix_seed(config.seed, 0x4c53544d));
  const EmbeddingTable table(config.dim, config.seed);
  WorkerPool pool(config.workers);

  std::vector<std::string> question;
  Rng qrng(mix_seed(config.seed, 0x51));
  for (std::size_t i = 0; i < config.question_length; ++i)
    question.push_back("w" + std::to_string(qrng.below(kVocabulary)));

  BenchResult result{config.workers, config.reps, {}};
  for (std::size_t n : config.lengths) {
    const PreparedExample ex = prepare_instance("bench" + std::to_string(n), question,
                                                {synthetic_document(n, config.seed)}, {"w0"}, mc.max_span_length);
    const EncodedExample enc = encode(ex, table);

    BenchRow row;
    row.n = n;
    row.workers = config.workers;
    row.spans = ex.spans.size();
    row.sentences = ex.sentences.size();
    std::uint64_t before = kernels::mac_count();
    model.score(enc, ex, &pool);
    row.cascade_macs = kernels::mac_count() - before;
    before = kernels::mac_count();
    baseline_forward(enc.documents[0], lstm);
    row.baseline_macs = kernels::mac_count() - before;

    std::vector<double> cascade, baseline;
    for (std::size_t r = 0; r < config.reps; ++r) {
      cascade.push_back(time_ms([&] { model.score(enc, ex, &pool); }));
      baseline.push_back(time_ms([&] { baseline_forward(enc.documents[0], lstm); }));
    }
    row.cascade_ms = median(cascade);
    row.baseline_ms = median(baseline);
    row.speedup = row.baseline_ms / row.cascade_ms;
    result.rows.push_back(row);
  }
  return result;
}

void write_bench_csv(std::ostream& out, const BenchResult& result) {
  out << "n,workers,cascade_ms,baseline_ms,speedup\n";
  for (const auto& r : result.rows)
    out << r.n << ',' << r.workers << ',' << r.cascade_ms << ',' << r.baseline_ms << ',' << r.speedup << '\n';
}

}  // namespace cascadeqa

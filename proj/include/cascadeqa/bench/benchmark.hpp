#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "cascadeqa/corpus/document.hpp"

namespace cascadeqa {

struct BenchConfig {
  std::vector<std::size_t> lengths{200, 1000, 2000, 5000, 10000};
  std::size_t workers = 4;
  std::size_t reps = 5;
  std::size_t dim = 300;
  std::size_t hidden = 300;
  std::size_t state = 50;
  std::size_t question_length = 10;
  std::uint64_t seed = 1;

  // UsageError: workers < 1, reps < 1, empty or unsorted lengths, zero sizes.
  void validate() const;
};

struct BenchRow {
  std::size_t n = 0;
  std::size_t workers = 0;
  double cascade_ms = 0.0;   // median
  double baseline_ms = 0.0;  // median
  double speedup = 0.0;      // baseline / cascade
  std::uint64_t cascade_macs = 0;
  std::uint64_t baseline_macs = 0;
  std::size_t spans = 0;
  std::size_t sentences = 0;
};

struct BenchResult {
  std::size_t workers = 0;
  std::size_t reps = 0;
  std::vector<BenchRow> rows;
};

// Exactly n tokens of random words in sentences of 8 to 30 tokens, each ending
// with ".". Deterministic in (n, seed).
Document synthetic_document(std::size_t n, std::uint64_t seed);

// Per length: one discarded warmup, then `reps` timed runs of each side.
// Preprocessing and embedding lookup are outside the timed region. The
// cascade scores every span and candidate on a pool of `workers` threads; the
// baseline runs its recurrence on the calling thread.
BenchResult run_benchmark(const BenchConfig& config);

// n,workers,cascade_ms,baseline_ms,speedup
void write_bench_csv(std::ostream& out, const BenchResult& result);

}  // namespace cascadeqa

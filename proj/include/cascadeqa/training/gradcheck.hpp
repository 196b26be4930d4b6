#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "cascadeqa/autodiff/ops.hpp"
#include "cascadeqa/corpus/example.hpp"

namespace cascadeqa {

// Three sentences, twelve tokens, two gold mentions of the answer.
QAExample toy_gradcheck_example();

struct GradcheckOptions {
  std::string ablation = "full";
  std::size_t dim = 8;
  std::size_t hidden = 8;
  std::uint64_t seed = 1;
  double epsilon = 1e-5;
};

struct GradcheckReport {
  GradCheckResult result;
  std::size_t sentences = 0;
  std::size_t tokens = 0;
  std::size_t gold_spans = 0;
  std::size_t parameters = 0;
  double seconds = 0.0;
};

// Finite-difference check of the multi-loss (dropout off) on the toy example
// with freshly seeded parameters and random unit word vectors.
GradcheckReport run_gradcheck(const GradcheckOptions& options);

}  // namespace cascadeqa

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cascadeqa/autodiff/tensor.hpp"
#include "cascadeqa/model/cascade.hpp"

namespace cascadeqa {

// Gate rows are stacked in the order input, forget, output, cell candidate.
struct LstmDirection {
  Tensor w;  // 4S x E
  Tensor u;  // 4S x S
  Tensor b;  // 4S
};

struct BiLstmParams {
  std::size_t input_dim = 0;
  std::size_t state = 50;
  LstmDirection forward;
  LstmDirection backward;
  // Start and end position heads over the 2S concatenated states.
  Tensor start_w, end_w;
  double start_b = 0.0, end_b = 0.0;

  static BiLstmParams zeros(std::size_t input_dim, std::size_t state = 50);
  // Uniform in +-1/sqrt(S), the usual recurrent init.
  static BiLstmParams random(std::size_t input_dim, std::size_t state, std::uint64_t seed);
};

// n x 2S: row t is [forward h_t; backward h_t]. Throws ContractError on an
// empty sequence, DimensionError on an input width mismatch.
Tensor bilstm_forward(const EmbeddedSequence& x, const BiLstmParams& p);

struct PositionScores {
  std::vector<double> start, end;
};

// Recurrent pass plus the two linear position heads.
PositionScores baseline_forward(const EmbeddedSequence& x, const BiLstmParams& p);

}  // namespace cascadeqa

#include "cascadeqa/bench/bilstm.hpp"

#include <cmath>

#include "cascadeqa/kernels/kernels.hpp"
#include "cascadeqa/util/error.hpp"
#include "cascadeqa/util/random.hpp"

namespace cascadeqa {
namespace {

LstmDirection zero_direction(std::size_t e, std::size_t s) {
  return {Tensor({4 * s, e}), Tensor({4 * s, s}), Tensor({4 * s})};
}

void fill_uniform(Tensor& t, double r, Rng& rng) {
  for (double& v : t.values()) v = rng.uniform(-r, r);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// One direction over rows order[0], order[1], ...; writes h into out columns
// [offset, offset + S).
void run_direction(const EmbeddedSequence& x, const LstmDirection& d, std::size_t s, bool reverse, Tensor& out,
                   std::size_t offset) {
  std::vector<double> h(s, 0.0), c(s, 0.0), gates(4 * s), rec(4 * s);
  for (std::size_t k = 0; k < x.length; ++k) {
    const std::size_t t = reverse ? x.length - 1 - k : k;
    kernels::gemv(d.w.data(), 4 * s, x.dim, x.row(t).data(), gates.data());
    kernels::gemv(d.u.data(), 4 * s, s, h.data(), rec.data());
    for (std::size_t j = 0; j < s; ++j) {
      const double i = sigmoid(gates[j] + rec[j] + d.b[j]);
      const double f = sigmoid(gates[s + j] + rec[s + j] + d.b[s + j]);
      const double o = sigmoid(gates[2 * s + j] + rec[2 * s + j] + d.b[2 * s + j]);
      const double g = std::tanh(gates[3 * s + j] + rec[3 * s + j] + d.b[3 * s + j]);
      c[j] = f * c[j] + i * g;
      h[j] = o * std::tanh(c[j]);
    }
    for (std::size_t j = 0; j < s; ++j) out.at(t, offset + j) = h[j];
  }
}

}  // namespace

BiLstmParams BiLstmParams::zeros(std::size_t input_dim, std::size_t state) {
  BiLstmParams p;
  p.input_dim = input_dim;
  p.state = state;
  p.forward = zero_direction(input_dim, state);
  p.backward = zero_direction(input_dim, state);
  p.start_w = Tensor({2 * state});
  p.end_w = Tensor({2 * state});
  return p;
}

BiLstmParams BiLstmParams::random(std::size_t input_dim, std::size_t state, std::uint64_t seed) {
  BiLstmParams p = zeros(input_dim, state);
  Rng rng(seed);
  const double r = 1.0 / std::sqrt(static_cast<double>(state));
  for (LstmDirection* d : {&p.forward, &p.backward}) {
    fill_uniform(d->w, r, rng);
    fill_uniform(d->u, r, rng);
    fill_uniform(d->b, r, rng);
  }
  fill_uniform(p.start_w, r, rng);
  fill_uniform(p.end_w, r, rng);
  return p;
}

Tensor bilstm_forward(const EmbeddedSequence& x, const BiLstmParams& p) {
  if (x.length == 0) throw ContractError("bilstm input is empty");
  if (x.dim != p.input_dim) {
    throw DimensionError("bilstm input width " + std::to_string(x.dim) + ", expected " + std::to_string(p.input_dim));
  }
  Tensor out({x.length, 2 * p.state});
  run_direction(x, p.forward, p.state, false, out, 0);
  run_direction(x, p.backward, p.state, true, out, p.state);
  return out;
}

PositionScores baseline_forward(const EmbeddedSequence& x, const BiLstmParams& p) {
  const Tensor h = bilstm_forward(x, p);
  PositionScores s;
  s.start.resize(x.length);
  s.end.resize(x.length);
  for (std::size_t t = 0; t < x.length; ++t) {
    s.start[t] = kernels::dot(p.start_w.data(), h.row(t).data(), 2 * p.state) + p.start_b;
    s.end[t] = kernels::dot(p.end_w.data(), h.row(t).data(), 2 * p.state) + p.end_b;
  }
  return s;
}

}  // namespace cascadeqa

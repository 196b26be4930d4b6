#pragma once

#include <functional>
#include <span>
#include <string>

#include "cascadeqa/autodiff/parameters.hpp"
#include "cascadeqa/autodiff/tape.hpp"

namespace cascadeqa {

// Dropout is applied to every ReLU output in training mode only.
struct DropoutState {
  double rate = 0.0;
  bool training = false;
  Rng* rng = nullptr;

  bool active() const { return training && rate > 0.0 && rng != nullptr; }
  static DropoutState off() { return {}; }
};

NodeId ffnn(Tape& tape, const FfnnParams& p, NodeId x, const DropoutState& dropout);
// Scalar node w^T h + z.
NodeId linear(Tape& tape, const LinearParams& p, NodeId h);

// Throws EmptyCandidateError on an empty score vector.
NodeId softmax_normalize(Tape& tape, NodeId scores);

NodeId concat(Tape& tape, std::span<const NodeId> xs);
NodeId sum(Tape& tape, std::span<const NodeId> xs);
NodeId mean(Tape& tape, std::span<const NodeId> xs);
// softmax(logits)-weighted combination of xs; logits is a vector node with
// one entry per x.
NodeId weighted_mean(Tape& tape, std::span<const NodeId> xs, NodeId logits);

inline Gradients backward(Tape& tape, NodeId root) {
  tape.backward(root);
  return tape.parameter_gradients();
}

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

// Loss evaluation callback: returns the loss and, when grads is non-null,
// fills it with the analytic gradient. Must be deterministic.
using LossFunction = std::function<double(const ParameterStore& params, Gradients* grads)>;

// Central differences (L(t+e) - L(t-e)) / 2e against the analytic gradient for
// every scalar parameter. Relative error is |a - n| / max(1e-6, |a| + |n|).
// Parameters are restored bit-exactly afterwards.
GradCheckResult finite_difference_check(const LossFunction& loss_fn, ParameterStore& params,
                                        double epsilon);

}  // namespace cascadeqa

#include "cascadeqa/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "cascadeqa/util/error.hpp"

namespace cascadeqa {

NodeId ffnn(Tape& tape, const FfnnParams& p, NodeId x, const DropoutState& dropout) {
  const Tensor& xv = tape.value(x);
  if (!xv.is_vector() || xv.size() != p.input_dim) {
    throw DimensionError("ffnn: input " + xv.shape_string() + " does not match weight input dim (" +
                         std::to_string(p.input_dim) + ")");
  }
  NodeId h = x;
  for (const DenseLayer& layer : p.layers) {
    h = tape.relu(tape.add(tape.matvec(tape.param(layer.weight), h), tape.param(layer.bias)));
    if (dropout.active()) h = tape.dropout(h, dropout.rate, *dropout.rng);
  }
  return h;
}

NodeId linear(Tape& tape, const LinearParams& p, NodeId h) {
  const Tensor& hv = tape.value(h);
  const Tensor& wv = tape.parameters().value(p.w);
  if (!hv.same_shape(wv)) {
    throw DimensionError("linear: input " + hv.shape_string() + " does not match weight " +
                         wv.shape_string());
  }
  return tape.add(tape.dot(tape.param(p.w), h), tape.param(p.z));
}

NodeId softmax_normalize(Tape& tape, NodeId scores) {
  const Tensor& s = tape.value(scores);
  if (s.empty()) throw EmptyCandidateError("softmax over an empty candidate set");
  return tape.softmax(scores);
}

NodeId concat(Tape& tape, std::span<const NodeId> xs) { return tape.concat(xs); }

NodeId sum(Tape& tape, std::span<const NodeId> xs) {
  if (xs.empty()) throw EmptyAggregateError("sum of an empty list");
  return xs.size() == 1 ? xs[0] : tape.sum(xs);
}

NodeId mean(Tape& tape, std::span<const NodeId> xs) {
  if (xs.empty()) throw EmptyAggregateError("mean of an empty list");
  const NodeId total = sum(tape, xs);
  return xs.size() == 1 ? total : tape.scale(total, 1.0 / static_cast<double>(xs.size()));
}

NodeId weighted_mean(Tape& tape, std::span<const NodeId> xs, NodeId logits) {
  if (xs.empty()) throw EmptyAggregateError("weighted_mean of an empty list");
  const Tensor& lv = tape.value(logits);
  if (!lv.is_vector() || lv.size() != xs.size()) {
    throw DimensionError("weighted_mean: " + std::to_string(xs.size()) + " inputs but logits " +
                         lv.shape_string());
  }
  const NodeId weights = tape.softmax(logits);
  // (n x d)^T * w
  return tape.matvec(tape.transpose(tape.stack(xs)), weights);
}

GradCheckResult finite_difference_check(const LossFunction& loss_fn, ParameterStore& params,
                                        double epsilon) {
  if (!(epsilon > 0.0)) throw ContractError("finite difference epsilon must be positive");
  Gradients analytic(params);
  loss_fn(params, &analytic);

  GradCheckResult result;
  for (ParamId p = 0; p < params.size(); ++p) {
    Tensor& value = params.value(p);
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double original = value[i];
      value[i] = original + epsilon;
      const double plus = loss_fn(params, nullptr);
      value[i] = original - epsilon;
      const double minus = loss_fn(params, nullptr);
      value[i] = original;

      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double a = analytic[p][i];
      const double rel = std::abs(a - numeric) / std::max(1e-6, std::abs(a) + std::abs(numeric));
      ++result.checked;
      if (rel > result.max_relative_error || result.worst_parameter.empty()) {
        result.max_relative_error = rel;
        result.worst_parameter = params.name(p);
        result.worst_index = i;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace cascadeqa

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cascadeqa/autodiff/parameters.hpp"
#include "cascadeqa/autodiff/tensor.hpp"

namespace cascadeqa {

class Rng;

using NodeId = std::uint32_t;

enum class Op : std::uint8_t {
  Constant,
  Param,
  MatVec,
  Add,
  Relu,
  Dropout,
  Concat,
  Sum,
  Scale,
  Dot,
  Softmax,
  LogSumExp,
  Gather,
  Stack,
  Transpose,
  MatMul,
  MatMulNT,
  SoftmaxRows,
  Row,
};

// Reverse-mode tape. Nodes are appended in evaluation order, so node ids are
// a topological order and backward() is a single reverse sweep. Parameters
// are read through the store without copying and must not change while the
// tape is alive. A tape is a single-threaded unit of work.
class Tape {
 public:
  explicit Tape(const ParameterStore& params);

  // Leaves. param() returns one cached node per parameter.
  NodeId param(ParamId id);
  NodeId constant(Tensor value);

  NodeId matvec(NodeId w, NodeId x);
  NodeId add(NodeId a, NodeId b);
  NodeId relu(NodeId x);
  // Inverted dropout: kept units scaled by 1/(1-rate).
  NodeId dropout(NodeId x, double rate, Rng& rng);
  NodeId concat(std::span<const NodeId> xs);
  NodeId sum(std::span<const NodeId> xs);
  NodeId scale(NodeId x, double c);
  NodeId dot(NodeId a, NodeId b);
  // Max-subtracted softmax over a vector.
  NodeId softmax(NodeId x);
  NodeId log_sum_exp(NodeId x);
  NodeId gather(NodeId x, std::vector<std::size_t> indices);
  // Rows must share a length; result is rows.size() x len.
  NodeId stack(std::span<const NodeId> rows);
  NodeId transpose(NodeId m);
  NodeId matmul(NodeId a, NodeId b);
  // a * b^T
  NodeId matmul_nt(NodeId a, NodeId b);
  NodeId softmax_rows(NodeId m);
  NodeId row(NodeId m, std::size_t i);

  const Tensor& value(NodeId id) const;
  // Valid after backward(); zero for nodes the root does not depend on.
  const Tensor& grad(NodeId id) const;
  Op op(NodeId id) const { return nodes_.at(id).op; }
  std::span<const NodeId> inputs(NodeId id) const { return nodes_.at(id).inputs; }
  std::size_t node_count() const { return nodes_.size(); }
  const ParameterStore& parameters() const { return *params_; }

  // Requires a scalar root. Gradients are reset on every call.
  void backward(NodeId root);
  // Gradient of the last backward root w.r.t. every parameter in the store;
  // exactly zero for parameters the root does not reach.
  Gradients parameter_gradients() const;
  void add_parameter_gradients(Gradients& into) const;

 private:
  struct Node {
    Op op;
    bool requires_grad = false;
    std::vector<NodeId> inputs;
    Tensor value;
    Tensor grad;
    ParamId param = 0;
    double scalar = 0.0;
    std::vector<std::size_t> index;
    Tensor aux;
  };

  NodeId push(Node node);
  const Node& node(NodeId id) const;
  bool any_requires_grad(std::span<const NodeId> ids) const;
  void backward_node(std::size_t idx);

  const ParameterStore* params_;
  std::vector<Node> nodes_;
  std::vector<std::int64_t> param_nodes_;  // ParamId -> node id or -1
  bool has_grads_ = false;
};

}  // namespace cascadeqa

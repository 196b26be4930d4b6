#include "cascadeqa/autodiff/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cascadeqa/kernels/kernels.hpp"
#include "cascadeqa/util/error.hpp"
#include "cascadeqa/util/random.hpp"

namespace cascadeqa {
namespace {

namespace k = kernels;

[[noreturn]] void dim_error(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                       b.shape_string());
}

void require_vector(const char* op, const Tensor& t) {
  if (!t.is_vector()) throw DimensionError(std::string(op) + ": expected a vector, got " + t.shape_string());
}

void require_matrix(const char* op, const Tensor& t) {
  if (!t.is_matrix()) throw DimensionError(std::string(op) + ": expected a matrix, got " + t.shape_string());
}

void check_finite(const char* op, const Tensor& t) {
  if (!t.all_finite()) throw NumericError(std::string(op) + ": non-finite value in forward pass");
}

void softmax_inplace(std::span<double> v) {
  const double mx = *std::max_element(v.begin(), v.end());
  double total = 0.0;
  for (double& x : v) {
    x = std::exp(x - mx);
    total += x;
  }
  for (double& x : v) x /= total;
}

// dx += y * (dy - <dy, y>) for y = softmax(x)
void softmax_backward(std::span<const double> y, std::span<const double> dy, std::span<double> dx) {
  double inner = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) inner += dy[i] * y[i];
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] += y[i] * (dy[i] - inner);
}

}  // namespace

Tape::Tape(const ParameterStore& params)
    : params_(&params), param_nodes_(params.size(), -1) {}

NodeId Tape::push(Node node) {
  if (nodes_.size() >= std::numeric_limits<NodeId>::max()) throw ContractError("tape node limit reached");
  has_grads_ = false;
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size() - 1);
}

const Tape::Node& Tape::node(NodeId id) const {
  if (id >= nodes_.size()) throw ContractError("unknown tape node " + std::to_string(id));
  return nodes_[id];
}

const Tensor& Tape::value(NodeId id) const {
  const Node& n = node(id);
  return n.op == Op::Param ? params_->value(n.param) : n.value;
}

const Tensor& Tape::grad(NodeId id) const {
  if (!has_grads_) throw ContractError("grad() requested before backward()");
  return node(id).grad;
}

bool Tape::any_requires_grad(std::span<const NodeId> ids) const {
  return std::any_of(ids.begin(), ids.end(), [&](NodeId i) { return node(i).requires_grad; });
}

NodeId Tape::param(ParamId id) {
  if (id >= param_nodes_.size()) throw ContractError("unknown parameter id " + std::to_string(id));
  if (param_nodes_[id] >= 0) return static_cast<NodeId>(param_nodes_[id]);
  Node n{.op = Op::Param, .requires_grad = true};
  n.param = id;
  const NodeId nid = push(std::move(n));
  param_nodes_[id] = nid;
  return nid;
}

NodeId Tape::constant(Tensor value) {
  check_finite("constant", value);
  return push(Node{.op = Op::Constant, .value = std::move(value)});
}

NodeId Tape::matvec(NodeId w, NodeId x) {
  const Tensor& wv = value(w);
  const Tensor& xv = value(x);
  require_matrix("matvec", wv);
  require_vector("matvec", xv);
  if (wv.cols() != xv.size()) dim_error("matvec", wv, xv);
  Tensor y = Tensor::zeros(wv.rows());
  k::gemv(wv.data(), wv.rows(), wv.cols(), xv.data(), y.data());
  check_finite("matvec", y);
  const std::vector<NodeId> in{w, x};
  return push(Node{.op = Op::MatVec, .requires_grad = any_requires_grad(in), .inputs = in, .value = std::move(y)});
}

NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (!av.same_shape(bv)) dim_error("add", av, bv);
  Tensor y = av;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  check_finite("add", y);
  const std::vector<NodeId> in{a, b};
  return push(Node{.op = Op::Add, .requires_grad = any_requires_grad(in), .inputs = in, .value = std::move(y)});
}

NodeId Tape::relu(NodeId x) {
  Tensor y = value(x);
  for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
  const std::vector<NodeId> in{x};
  return push(Node{.op = Op::Relu, .requires_grad = any_requires_grad(in), .inputs = in, .value = std::move(y)});
}

NodeId Tape::dropout(NodeId x, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ContractError("dropout rate must be in [0, 1)");
  const Tensor& xv = value(x);
  Tensor mask(xv.shape());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : mask.values()) m = rng.uniform() < rate ? 0.0 : keep_scale;
  Tensor y = xv;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
  const std::vector<NodeId> in{x};
  return push(Node{.op = Op::Dropout,
                   .requires_grad = any_requires_grad(in),
                   .inputs = in,
                   .value = std::move(y),
                   .aux = std::move(mask)});
}

NodeId Tape::concat(std::span<const NodeId> xs) {
  if (xs.empty()) throw EmptyAggregateError("concat of an empty list");
  std::vector<double> data;
  for (NodeId id : xs) {
    const Tensor& v = value(id);
    require_vector("concat", v);
    data.insert(data.end(), v.storage().begin(), v.storage().end());
  }
  std::vector<NodeId> in(xs.begin(), xs.end());
  const bool rg = any_requires_grad(in);
  return push(Node{.op = Op::Concat, .requires_grad = rg, .inputs = std::move(in), .value = Tensor::vector(std::move(data))});
}

NodeId Tape::sum(std::span<const NodeId> xs) {
  if (xs.empty()) throw EmptyAggregateError("sum of an empty list");
  Tensor y = value(xs[0]);
  for (std::size_t k = 1; k < xs.size(); ++k) {
    const Tensor& v = value(xs[k]);
    if (!v.same_shape(y)) dim_error("sum", y, v);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += v[i];
  }
  check_finite("sum", y);
  std::vector<NodeId> in(xs.begin(), xs.end());
  const bool rg = any_requires_grad(in);
  return push(Node{.op = Op::Sum, .requires_grad = rg, .inputs = std::move(in), .value = std::move(y)});
}

NodeId Tape::scale(NodeId x, double c) {
  Tensor y = value(x);
  for (double& v : y.values()) v *= c;
  check_finite("scale", y);
  const std::vector<NodeId> in{x};
  return push(Node{.op = Op::Scale, .requires_grad = any_requires_grad(in), .inputs = in, .value = std::move(y), .scalar = c});
}

NodeId Tape::dot(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_vector("dot", av);
  if (!av.same_shape(bv)) dim_error("dot", av, bv);
  Tensor y = Tensor::scalar(k::dot(av.data(), bv.data(), av.size()));
  check_finite("dot", y);
  const std::vector<NodeId> in{a, b};
  return push(Node{.op = Op::Dot, .requires_grad = any_requires_grad(in), .inputs = in, .value = std::move(y)});
}

NodeId Tape::softmax(NodeId x) {
  Tensor y = value(x);
  require_vector("softmax", y);
  softmax_inplace(y.values());
  const std::vector<NodeId> in{x};
  return push(Node{.op = Op::Softmax, .requires_grad = any_requires_grad(in), .inputs = in, .value = std::move(y)});
}

NodeId Tape::log_sum_exp(NodeId x) {
  const Tensor& xv = value(x);
  require_vector("log_sum_exp", xv);
  const double mx = *std::max_element(xv.storage().begin(), xv.storage().end());
  Tensor p = xv;
  double total = 0.0;
  for (double& v : p.values()) {
    v = std::exp(v - mx);
    total += v;
  }
  for (double& v : p.values()) v /= total;
  Tensor y = Tensor::scalar(mx + std::log(total));
  check_finite("log_sum_exp", y);
  const std::vector<NodeId> in{x};
  return push(Node{.op = Op::LogSumExp, .requires_grad = any_requires_grad(in), .inputs = in, .value = std::move(y), .aux = std::move(p)});
}

NodeId Tape::gather(NodeId x, std::vector<std::size_t> indices) {
  const Tensor& xv = value(x);
  require_vector("gather", xv);
  if (indices.empty()) throw EmptyAggregateError("gather with no indices");
  std::vector<double> data;
  data.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= xv.size()) throw DimensionError("gather index " + std::to_string(i) + " out of range for " + xv.shape_string());
    data.push_back(xv[i]);
  }
  const std::vector<NodeId> in{x};
  return push(Node{.op = Op::Gather,
                   .requires_grad = any_requires_grad(in),
                   .inputs = in,
                   .value = Tensor::vector(std::move(data)),
                   .index = std::move(indices)});
}

NodeId Tape::stack(std::span<const NodeId> rows) {
  if (rows.empty()) throw EmptyAggregateError("stack of an empty list");
  const Tensor& first = value(rows[0]);
  require_vector("stack", first);
  const std::size_t cols = first.size();
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (NodeId id : rows) {
    const Tensor& v = value(id);
    if (!v.same_shape(first)) dim_error("stack", first, v);
    data.insert(data.end(), v.storage().begin(), v.storage().end());
  }
  std::vector<NodeId> in(rows.begin(), rows.end());
  const bool rg = any_requires_grad(in);
  return push(Node{.op = Op::Stack,
                   .requires_grad = rg,
                   .inputs = std::move(in),
                   .value = Tensor::matrix(rows.size(), cols, std::move(data))});
}

NodeId Tape::transpose(NodeId m) {
  const Tensor& mv = value(m);
  require_matrix("transpose", mv);
  Tensor y({mv.cols(), mv.rows()});
  for (std::size_t r = 0; r < mv.rows(); ++r)
    for (std::size_t c = 0; c < mv.cols(); ++c) y.at(c, r) = mv.at(r, c);
  const std::vector<NodeId> in{m};
  return push(Node{.op = Op::Transpose, .requires_grad = any_requires_grad(in), .inputs = in, .value = std::move(y)});
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_matrix("matmul", av);
  require_matrix("matmul", bv);
  if (av.cols() != bv.rows()) dim_error("matmul", av, bv);
  Tensor y({av.rows(), bv.cols()});
  // row i of A*B is B^T a_i
  for (std::size_t i = 0; i < av.rows(); ++i) {
    k::gemv_t_acc(bv.data(), bv.rows(), bv.cols(), av.row(i).data(), y.row(i).data());
  }
  check_finite("matmul", y);
  const std::vector<NodeId> in{a, b};
  return push(Node{.op = Op::MatMul, .requires_grad = any_requires_grad(in), .inputs = in, .value = std::move(y)});
}

NodeId Tape::matmul_nt(NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_matrix("matmul_nt", av);
  require_matrix("matmul_nt", bv);
  if (av.cols() != bv.cols()) dim_error("matmul_nt", av, bv);
  Tensor y({av.rows(), bv.rows()});
  for (std::size_t i = 0; i < av.rows(); ++i) {
    k::gemv(bv.data(), bv.rows(), bv.cols(), av.row(i).data(), y.row(i).data());
  }
  check_finite("matmul_nt", y);
  const std::vector<NodeId> in{a, b};
  return push(Node{.op = Op::MatMulNT, .requires_grad = any_requires_grad(in), .inputs = in, .value = std::move(y)});
}

NodeId Tape::softmax_rows(NodeId m) {
  Tensor y = value(m);
  require_matrix("softmax_rows", y);
  for (std::size_t r = 0; r < y.rows(); ++r) softmax_inplace(y.row(r));
  const std::vector<NodeId> in{m};
  return push(Node{.op = Op::SoftmaxRows, .requires_grad = any_requires_grad(in), .inputs = in, .value = std::move(y)});
}

NodeId Tape::row(NodeId m, std::size_t i) {
  const Tensor& mv = value(m);
  require_matrix("row", mv);
  if (i >= mv.rows()) throw DimensionError("row index " + std::to_string(i) + " out of range for " + mv.shape_string());
  auto r = mv.row(i);
  const std::vector<NodeId> in{m};
  return push(Node{.op = Op::Row,
                   .requires_grad = any_requires_grad(in),
                   .inputs = in,
                   .value = Tensor::vector(std::vector<double>(r.begin(), r.end())),
                   .index = {i}});
}

void Tape::backward(NodeId root) {
  if (root >= nodes_.size()) throw ContractError("backward root is not on this tape");
  if (!value(root).is_scalar()) {
    throw ContractError("backward root must be a scalar, got " + value(root).shape_string());
  }
  for (NodeId id = 0; id < nodes_.size(); ++id) nodes_[id].grad = Tensor(value(id).shape());
  has_grads_ = true;
  nodes_[root].grad[0] = 1.0;
  for (std::size_t idx = root + 1; idx-- > 0;) {
    if (nodes_[idx].requires_grad) backward_node(idx);
  }
}

void Tape::backward_node(std::size_t idx) {
  Node& n = nodes_[idx];
  const Tensor& dy = n.grad;
  auto needs = [&](std::size_t k) -> bool { return nodes_[n.inputs[k]].requires_grad; };
  auto gin = [&](std::size_t k) -> Tensor& { return nodes_[n.inputs[k]].grad; };
  auto vin = [&](std::size_t k) -> const Tensor& { return value(n.inputs[k]); };

  switch (n.op) {
    case Op::Constant:
    case Op::Param:
      return;
    case Op::MatVec: {
      const Tensor& w = vin(0);
      const Tensor& x = vin(1);
      if (needs(0)) k::ger_acc(dy.data(), w.rows(), x.data(), w.cols(), gin(0).data());
      if (needs(1)) k::gemv_t_acc(w.data(), w.rows(), w.cols(), dy.data(), gin(1).data());
      return;
    }
    case Op::Add:
      for (std::size_t k = 0; k < 2; ++k) {
        if (!needs(k)) continue;
        Tensor& g = gin(k);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += dy[i];
      }
      return;
    case Op::Relu: {
      Tensor& g = gin(0);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (n.value[i] > 0.0) g[i] += dy[i];
      return;
    }
    case Op::Dropout: {
      Tensor& g = gin(0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += dy[i] * n.aux[i];
      return;
    }
    case Op::Concat: {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const std::size_t len = vin(k).size();
        if (needs(k)) {
          Tensor& g = gin(k);
          for (std::size_t i = 0; i < len; ++i) g[i] += dy[offset + i];
        }
        offset += len;
      }
      return;
    }
    case Op::Sum:
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        if (!needs(k)) continue;
        Tensor& g = gin(k);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += dy[i];
      }
      return;
    case Op::Scale: {
      Tensor& g = gin(0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.scalar * dy[i];
      return;
    }
    case Op::Dot: {
      const double d = dy[0];
      if (needs(0)) k::axpy(d, vin(1).data(), gin(0).data(), vin(1).size());
      if (needs(1)) k::axpy(d, vin(0).data(), gin(1).data(), vin(0).size());
      return;
    }
    case Op::Softmax:
      softmax_backward(n.value.values(), dy.values(), gin(0).values());
      return;
    case Op::LogSumExp: {
      Tensor& g = gin(0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += dy[0] * n.aux[i];
      return;
    }
    case Op::Gather: {
      Tensor& g = gin(0);
      for (std::size_t kk = 0; kk < n.index.size(); ++kk) g[n.index[kk]] += dy[kk];
      return;
    }
    case Op::Stack:
      for (std::size_t r = 0; r < n.inputs.size(); ++r) {
        if (!needs(r)) continue;
        Tensor& g = gin(r);
        auto src = dy.row(r);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += src[i];
      }
      return;
    case Op::Transpose: {
      Tensor& g = gin(0);
      for (std::size_t r = 0; r < dy.rows(); ++r)
        for (std::size_t c = 0; c < dy.cols(); ++c) g.at(c, r) += dy.at(r, c);
      return;
    }
    case Op::MatMul: {
      // C = A B; dA = dC B^T, dB = A^T dC
      const Tensor& a = vin(0);
      const Tensor& b = vin(1);
      if (needs(0)) {
        Tensor& ga = gin(0);
        std::vector<double> tmp(b.rows());
        for (std::size_t i = 0; i < a.rows(); ++i) {
          k::gemv(b.data(), b.rows(), b.cols(), dy.row(i).data(), tmp.data());
          k::axpy(1.0, tmp.data(), ga.row(i).data(), tmp.size());
        }
      }
      if (needs(1)) {
        Tensor& gb = gin(1);
        for (std::size_t i = 0; i < a.rows(); ++i) {
          k::ger_acc(a.row(i).data(), a.cols(), dy.row(i).data(), dy.cols(), gb.data());
        }
      }
      return;
    }
    case Op::MatMulNT: {
      // C = A B^T; dA = dC B, dB = dC^T A
      const Tensor& a = vin(0);
      const Tensor& b = vin(1);
      if (needs(0)) {
        Tensor& ga = gin(0);
        for (std::size_t i = 0; i < a.rows(); ++i) {
          k::gemv_t_acc(b.data(), b.rows(), b.cols(), dy.row(i).data(), ga.row(i).data());
        }
      }
      if (needs(1)) {
        Tensor& gb = gin(1);
        for (std::size_t i = 0; i < a.rows(); ++i) {
          k::ger_acc(dy.row(i).data(), b.rows(), a.row(i).data(), a.cols(), gb.data());
        }
      }
      return;
    }
    case Op::SoftmaxRows: {
      Tensor& g = gin(0);
      for (std::size_t r = 0; r < dy.rows(); ++r) softmax_backward(n.value.row(r), dy.row(r), g.row(r));
      return;
    }
    case Op::Row: {
      auto dst = gin(0).row(n.index[0]);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += dy[i];
      return;
    }
  }
}

Gradients Tape::parameter_gradients() const {
  Gradients out(*params_);
  add_parameter_gradients(out);
  return out;
}

void Tape::add_parameter_gradients(Gradients& into) const {
  if (!has_grads_) throw ContractError("parameter gradients requested before backward()");
  for (ParamId p = 0; p < param_nodes_.size(); ++p) {
    if (param_nodes_[p] < 0) continue;
    const Tensor& g = nodes_[static_cast<std::size_t>(param_nodes_[p])].grad;
    Tensor& dst = into[p];
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  }
}

}  // namespace cascadeqa

#include "cascadeqa/autodiff/parameters.hpp"

#include <cmath>

#include "cascadeqa/util/error.hpp"
#include "cascadeqa/util/random.hpp"

namespace cascadeqa {
namespace {

Tensor glorot_uniform(std::size_t fan_out, std::size_t fan_in, Rng& rng, bool as_vector) {
  const double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> data(fan_in * fan_out);
  for (double& v : data) v = rng.uniform(-r, r);
  if (as_vector) return Tensor::vector(std::move(data));
  return Tensor::matrix(fan_out, fan_in, std::move(data));
}

Tensor fan_in_uniform(std::size_t n, std::size_t fan_in, Rng& rng) {
  const double r = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> data(n);
  for (double& v : data) v = rng.uniform(-r, r);
  return Tensor::vector(std::move(data));
}

}  // namespace

ParamId ParameterStore::add(std::string name, Tensor init) {
  if (find(name)) throw ContractError("duplicate parameter name '" + name + "'");
  names_.push_back(std::move(name));
  values_.push_back(std::move(init));
  return static_cast<ParamId>(values_.size() - 1);
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

std::optional<ParamId> ParameterStore::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<ParamId>(i);
  }
  return std::nullopt;
}

Gradients::Gradients(const ParameterStore& params) {
  grads_.reserve(params.size());
  for (ParamId id = 0; id < params.size(); ++id) grads_.emplace_back(params.value(id).shape());
}

void Gradients::accumulate(const Gradients& other) {
  if (other.grads_.size() != grads_.size()) {
    throw DimensionError("gradient sets cover different parameter counts");
  }
  for (std::size_t p = 0; p < grads_.size(); ++p) {
    auto dst = grads_[p].values();
    auto src = other.grads_[p].values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

void Gradients::zero() {
  for (auto& g : grads_) g.fill(0.0);
}

FfnnParams make_ffnn(ParameterStore& store, const std::string& prefix, std::size_t input_dim,
                     std::size_t width, std::size_t depth, Rng& rng) {
  if (depth < 1 || width < 1 || input_dim < 1) {
    throw ContractError("ffnn '" + prefix + "' needs positive input dim, width and depth");
  }
  FfnnParams p;
  p.input_dim = input_dim;
  p.width = width;
  std::size_t in = input_dim;
  for (std::size_t l = 0; l < depth; ++l) {
    const std::string base = prefix + ".l" + std::to_string(l);
    DenseLayer layer;
    layer.weight = store.add(base + ".W", glorot_uniform(width, in, rng, false));
    layer.bias = store.add(base + ".b", fan_in_uniform(width, in, rng));
    p.layers.push_back(layer);
    in = width;
  }
  return p;
}

LinearParams make_linear(ParameterStore& store, const std::string& prefix, std::size_t input_dim,
                         Rng& rng) {
  LinearParams p;
  p.input_dim = input_dim;
  p.w = store.add(prefix + ".w", glorot_uniform(1, input_dim, rng, true));
  p.z = store.add(prefix + ".z", Tensor::scalar(0.0));
  return p;
}

}  // namespace cascadeqa

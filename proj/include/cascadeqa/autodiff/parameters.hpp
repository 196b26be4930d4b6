#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cascadeqa/autodiff/tensor.hpp"

namespace cascadeqa {

class Rng;

using ParamId = std::uint32_t;

// Named trainable tensors. Ids are dense and stable in insertion order, which
// is also the serialization order of checkpoints.
class ParameterStore {
 public:
  ParamId add(std::string name, Tensor init);

  std::size_t size() const { return values_.size(); }
  std::size_t scalar_count() const;
  const Tensor& value(ParamId id) const { return values_.at(id); }
  Tensor& value(ParamId id) { return values_.at(id); }
  const std::string& name(ParamId id) const { return names_.at(id); }
  std::optional<ParamId> find(std::string_view name) const;

  friend bool operator==(const ParameterStore&, const ParameterStore&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
};

// One gradient tensor per parameter, shaped like the parameter.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const ParameterStore& params);

  std::size_t size() const { return grads_.size(); }
  const Tensor& operator[](ParamId id) const { return grads_.at(id); }
  Tensor& operator[](ParamId id) { return grads_.at(id); }

  // this += other, element-wise over every parameter.
  void accumulate(const Gradients& other);
  void zero();

 private:
  std::vector<Tensor> grads_;
};

// One affine layer: y = W x + b.
struct DenseLayer {
  ParamId weight = 0;
  ParamId bias = 0;
};

// ffnn: stacked ReLU(W x + b) layers. The two-layer default is
// h = ReLU(U ReLU(V x + a) + b).
struct FfnnParams {
  std::vector<DenseLayer> layers;
  std::size_t input_dim = 0;
  std::size_t width = 0;
};

// linear: w^T h + z.
struct LinearParams {
  ParamId w = 0;
  ParamId z = 0;
  std::size_t input_dim = 0;
};

// Weights uniform in [-r, r], r = sqrt(6 / (fan_in + fan_out)). Layer biases
// uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]; the linear bias z starts at 0.
FfnnParams make_ffnn(ParameterStore& store, const std::string& prefix, std::size_t input_dim,
                     std::size_t width, std::size_t depth, Rng& rng);
LinearParams make_linear(ParameterStore& store, const std::string& prefix, std::size_t input_dim,
                         Rng& rng);

}  // namespace cascadeqa

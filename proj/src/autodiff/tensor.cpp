#include "cascadeqa/autodiff/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "cascadeqa/util/error.hpp"

namespace cascadeqa {
namespace {

std::size_t element_count(const std::vector<std::size_t>& shape) {
  if (shape.empty() || shape.size() > 2) {
    throw DimensionError("tensor rank must be 1 or 2, got shape " + cascadeqa::shape_string(shape));
  }
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + cascadeqa::shape_string(shape));
  }
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
  data_.assign(element_count(shape_), 0.0);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (element_count(shape_) != data_.size()) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + cascadeqa::shape_string(shape_));
  }
}

Tensor Tensor::vector(std::vector<double> data) {
  const std::size_t n = data.size();
  return Tensor({n}, std::move(data));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
  return Tensor({rows, cols}, std::move(data));
}

double Tensor::item() const {
  if (data_.size() != 1) throw DimensionError("item() on non-scalar tensor " + shape_string());
  return data_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::string Tensor::shape_string() const { return cascadeqa::shape_string(shape_); }

}  // namespace cascadeqa

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace cascadeqa {

// Dense row-major fp64 tensor of rank 1 or 2. A scalar is the rank-1 tensor
// of shape {1}.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor vector(std::vector<double> data);
  static Tensor vector(std::initializer_list<double> data) { return vector(std::vector<double>(data)); }
  static Tensor zeros(std::size_t n) { return Tensor({n}); }
  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool is_vector() const { return shape_.size() == 1; }
  bool is_matrix() const { return shape_.size() == 2; }
  bool is_scalar() const { return shape_.size() == 1 && shape_[0] == 1; }
  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const { return shape_.size() == 2 ? shape_[1] : 1; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }

  double item() const;
  bool all_finite() const;
  void fill(double v);
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  std::string shape_string() const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

}  // namespace cascadeqa

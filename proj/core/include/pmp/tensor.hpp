#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace pmp {

// Dense row-major tensor of doubles. Rank is arbitrary but the code base
// only ever builds rank-1 vectors, rank-2 matrices and single-element
// scalars (shape {1}).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);  // zero-filled
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  static Tensor scalar(double v);
  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double v);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return data_.size(); }

  // rank-2 accessors; throw on other ranks
  std::size_t rows() const;
  std::size_t cols() const;
  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  std::string shape_str() const;  // "[3, 4]", for error messages

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Plain (graph-free) kernels shared by forward evaluation and backward rules.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transposed(const Tensor& a);
Tensor relu(const Tensor& a);

}  // namespace pmp

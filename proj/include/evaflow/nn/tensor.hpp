#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "evaflow/error.hpp"

namespace evaflow::nn {

/// Dense row-major tensor. Activations are N x C x H x W; convolution weights
/// are Cout x Cin x K x K; biases are rank 1.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, T fill = T(0)) : shape_(std::move(shape)) {
    values_.assign(count(shape_), fill);
  }
  Tensor(std::vector<int> shape, std::vector<T> values) : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != count(shape_)) throw shape_error("tensor value count does not match its shape");
  }

  static std::size_t count(const std::vector<int>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
  }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(i); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }
  std::vector<T>& values() { return values_; }
  const std::vector<T>& values() const { return values_; }
  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  /// Element (n, c, y, x) of a rank-4 tensor.
  T& at(int n, int c, int y, int x) { return values_[offset(n, c, y, x)]; }
  const T& at(int n, int c, int y, int x) const { return values_[offset(n, c, y, x)]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  void fill(T value) { std::fill(values_.begin(), values_.end(), value); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (std::size_t i = 0; i < values_.size(); ++i) out[i] = static_cast<U>(values_[i]);
    return out;
  }

 private:
  std::size_t offset(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x;
  }

  std::vector<int> shape_;
  std::vector<T> values_;
};

std::string shape_string(const std::vector<int>& shape);

}  // namespace evaflow::nn

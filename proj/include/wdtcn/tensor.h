#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wdtcn {

using Shape = std::vector<std::size_t>;

// Error raised when operand extents do not line up.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Error raised for an invalid layer or signal configuration (even kernel,
// odd frame size, bad stride).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string shape_string(const Shape& shape);

// Dense row-major real array of rank 1..3. The last axis is contiguous.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value) { return Tensor({1}, {value}); }
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  const double& operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  const double& at(std::size_t i, std::size_t j) const {
    return data_[i * shape_[1] + j];
  }
  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  const double& at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  // Row view of a rank-2 tensor.
  std::span<double> row(std::size_t i);
  std::span<const double> row(std::size_t i) const;

  // Value of a single-element tensor.
  double item() const;

  Tensor reshaped(Shape shape) const;

  void fill(double value);
  Tensor& operator+=(const Tensor& other);
  Tensor& operator*=(double scale);

  bool all_finite() const;
  double sum() const;
  double max_abs() const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace wdtcn

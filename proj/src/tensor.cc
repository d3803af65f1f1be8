#include "wdtcn/tensor.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace wdtcn {

namespace {

std::size_t element_count(const Shape& shape) {
  if (shape.empty() || shape.size() > 3) {
    throw DimensionError("tensor rank must be 1..3, got " +
                         std::to_string(shape.size()));
  }
  std::size_t n = 1;
  for (std::size_t extent : shape) {
    if (extent == 0) {
      throw DimensionError("tensor extents must be positive: " +
                           shape_string(shape));
    }
    n *= extent;
  }
  return n;
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << " x ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape)
    : shape_(std::move(shape)), data_(element_count(shape_), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (element_count(shape_) != data_.size()) {
    throw DimensionError("shape " + shape_string(shape_) + " needs " +
                         std::to_string(element_count(shape_)) +
                         " values, got " + std::to_string(data_.size()));
  }
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t(std::move(shape));
  t.fill(value);
  return t;
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError("axis " + std::to_string(axis) +
                         " out of range for shape " + shape_string(shape_));
  }
  return shape_[axis];
}

std::span<double> Tensor::row(std::size_t i) {
  return std::span<double>(data_).subspan(i * shape_[1], shape_[1]);
}

std::span<const double> Tensor::row(std::size_t i) const {
  return std::span<const double>(data_).subspan(i * shape_[1], shape_[1]);
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw DimensionError("item() on tensor of shape " + shape_string(shape_));
  }
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Tensor& Tensor::operator+=(const Tensor& other) {
  if (other.shape_ != shape_) {
    throw DimensionError("cannot add " + shape_string(other.shape_) + " to " +
                         shape_string(shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double scale) {
  for (double& v : data_) v *= scale;
  return *this;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

double Tensor::sum() const {
  return std::accumulate(data_.begin(), data_.end(), 0.0);
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  // Four independent partial sums; the order is fixed so results are
  // reproducible across runs.
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  const std::size_t n = a.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (std::size_t k = 0; k < 4; ++k) acc[k] += a[i + k] * b[i + k];
  }
  for (; i < n; ++i) acc[0] += a[i] * b[i];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("max_abs_diff shape mismatch " +
                         shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  return m;
}

}  // namespace wdtcn

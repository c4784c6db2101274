#include "fld/numerics/dense_array.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "fld/common/error.hpp"

namespace fld::numerics {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

DenseArray::DenseArray(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

DenseArray::DenseArray(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw ShapeError("DenseArray: shape " + shape_string(shape_) + " does not match " +
                     std::to_string(data_.size()) + " values");
  }
}

std::size_t DenseArray::dim(std::size_t axis) const {
  if (axis >= shape_.size()) throw ShapeError("DenseArray::dim: axis out of range");
  return shape_[axis];
}

std::span<double> DenseArray::row(std::size_t i) {
  const std::size_t stride = shape_.empty() ? 0 : data_.size() / shape_[0];
  return {data_.data() + i * stride, stride};
}

std::span<const double> DenseArray::row(std::size_t i) const {
  const std::size_t stride = shape_.empty() ? 0 : data_.size() / shape_[0];
  return {data_.data() + i * stride, stride};
}

DenseArray DenseArray::reshaped(Shape shape) const& {
  DenseArray copy = *this;
  return std::move(copy).reshaped(std::move(shape));
}

DenseArray DenseArray::reshaped(Shape shape) && {
  if (shape_size(shape) != data_.size()) {
    throw ShapeError("reshape " + shape_string(shape_) + " -> " + shape_string(shape));
  }
  shape_ = std::move(shape);
  return std::move(*this);
}

void DenseArray::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

void DenseArray::check_finite(std::string_view where) const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw NumericError(std::string(where) + ": non-finite value at flat index " + std::to_string(i));
    }
  }
}

DenseArray& DenseArray::operator+=(const DenseArray& other) {
  if (!same_shape(other)) throw ShapeError("DenseArray += shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

DenseArray& DenseArray::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

double max_abs_diff(const DenseArray& a, const DenseArray& b) {
  if (!a.same_shape(b)) throw ShapeError("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double mean_squared_difference(const DenseArray& a, const DenseArray& b) {
  if (!a.same_shape(b)) throw ShapeError("mean_squared_difference: shape mismatch");
  if (a.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double e = a[i] - b[i];
    s += e * e;
  }
  return s / static_cast<double>(a.size());
}

void require_shape(const DenseArray& a, const Shape& expected, std::string_view what) {
  if (a.shape() != expected) {
    throw ShapeError(std::string(what) + ": expected shape " + shape_string(expected) + ", got " +
                     shape_string(a.shape()));
  }
}

}  // namespace fld::numerics

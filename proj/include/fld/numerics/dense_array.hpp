#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fld::numerics {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Row-major array of 64-bit floats with an explicit shape.
class DenseArray {
 public:
  DenseArray() = default;
  explicit DenseArray(Shape shape, double fill = 0.0);
  DenseArray(Shape shape, std::vector<double> data);

  static DenseArray zeros_like(const DenseArray& other) { return DenseArray(other.shape_); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  double* ptr() noexcept { return data_.data(); }
  const double* ptr() const noexcept { return data_.data(); }
  std::vector<double>& storage() noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  double& at(std::size_t i, std::size_t j) noexcept { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const noexcept { return data_[i * shape_[1] + j]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) noexcept {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  /// Contiguous slice along the leading axis.
  std::span<double> row(std::size_t i);
  std::span<const double> row(std::size_t i) const;

  DenseArray reshaped(Shape shape) const&;
  DenseArray reshaped(Shape shape) &&;

  void fill(double value);
  bool same_shape(const DenseArray& other) const noexcept { return shape_ == other.shape_; }

  /// Throws NumericError naming `where` if any entry is NaN or infinite.
  void check_finite(std::string_view where) const;

  DenseArray& operator+=(const DenseArray& other);
  DenseArray& operator*=(double s);

 private:
  Shape shape_;
  std::vector<double> data_;
};

double max_abs_diff(const DenseArray& a, const DenseArray& b);
double mean_squared_difference(const DenseArray& a, const DenseArray& b);

/// Throws ShapeError unless `a` has exactly `expected` shape.
void require_shape(const DenseArray& a, const Shape& expected, std::string_view what);

/// A trainable tensor and its accumulated gradient.
struct Parameter {
  std::string name;
  DenseArray value;
  DenseArray grad;

  Parameter() = default;
  Parameter(std::string n, DenseArray v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad.fill(0.0); }
};

}  // namespace fld::numerics

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace vclr {

/// Dense row-major array of doubles. Every operation in the library treats a
/// rank-1 array of extent n as a 1 x n row; higher ranks are storage only.
/// Zero extents are allowed (an empty negative set is a 0 x d matrix).
class Array {
 public:
  Array() = default;
  explicit Array(std::vector<std::size_t> shape, double fill = 0.0);
  Array(std::vector<std::size_t> shape, std::vector<double> data);

  static Array matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  static Array row(std::vector<double> values);
  static Array scalar(double value);

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept { return shape_.empty() ? 0 : shape_.back(); }
  bool same_shape(const Array& other) const noexcept { return shape_ == other.shape_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> row_span(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const double> row_span(std::size_t r) const {
    return {data_.data() + r * cols(), cols()};
  }

  /// Reinterprets the storage under a new shape with the same element count.
  Array reshaped(std::vector<std::size_t> shape) const;

  bool all_finite() const noexcept;

  friend bool operator==(const Array&, const Array&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::string shape_string(const Array& a);
std::string shape_string(const std::vector<std::size_t>& shape);

/// Stacks equal-width rows into a matrix.
Array stack_rows(std::span<const Array> rows);

}  // namespace vclr

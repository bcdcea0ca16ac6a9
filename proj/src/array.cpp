#include "vclr/array.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "vclr/error.hpp"

namespace vclr {

namespace {

std::size_t element_count(const std::vector<std::size_t>& shape) {
  if (shape.empty()) throw ShapeError("Array", "empty shape");
  std::size_t n = 1;
  for (std::size_t extent : shape) {
    n *= extent;
  }
  return n;
}

}  // namespace

Array::Array(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Array::Array(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (element_count(shape_) != data_.size()) {
    throw ShapeError("Array", "shape " + shape_string(shape_) + " does not match " +
                                  std::to_string(data_.size()) + " values");
  }
}

Array Array::matrix(std::size_t rows, std::size_t cols, double fill) {
  return Array({rows, cols}, fill);
}

Array Array::row(std::vector<double> values) {
  const std::size_t n = values.size();
  return Array({1, n}, std::move(values));
}

Array Array::scalar(double value) { return Array({1, 1}, std::vector<double>{value}); }

std::size_t Array::rows() const noexcept {
  std::size_t n = 1;
  for (std::size_t i = 0; i + 1 < shape_.size(); ++i) n *= shape_[i];
  return n;
}

Array Array::reshaped(std::vector<std::size_t> shape) const { return Array(std::move(shape), data_); }

bool Array::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

std::string shape_string(const Array& a) { return shape_string(a.shape()); }

Array stack_rows(std::span<const Array> rows) {
  if (rows.empty()) throw ShapeError("stack_rows", "no rows");
  const std::size_t width = rows.front().size();
  std::vector<double> data;
  data.reserve(width * rows.size());
  for (const Array& r : rows) {
    if (r.size() != width) {
      throw ShapeError("stack_rows", "row " + shape_string(r) + " vs width " + std::to_string(width));
    }
    data.insert(data.end(), r.data().begin(), r.data().end());
  }
  return Array({rows.size(), width}, std::move(data));
}

}  // namespace vclr

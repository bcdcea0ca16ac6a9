#include "vclr/memory_bank.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vclr/error.hpp"

namespace vclr {

namespace {
constexpr double kUnitTolerance = 1e-10;
}

MemoryBank::MemoryBank(std::size_t capacity, std::size_t width)
    : capacity_(capacity), width_(width), storage_(capacity * width, 0.0) {
  if (capacity == 0 || width == 0) throw DomainError("MemoryBank: capacity and width must be positive");
}

void MemoryBank::enqueue(const Array& rows) {
  if (rows.size() == 0) return;
  if (rows.cols() != width_) {
    throw ShapeError("MemoryBank::enqueue", shape_string(rows) + " into width " + std::to_string(width_));
  }
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    double ss = 0.0;
    for (double v : rows.row_span(i)) ss += v * v;
    if (!(std::abs(std::sqrt(ss) - 1.0) <= kUnitTolerance)) {
      throw DomainError("MemoryBank::enqueue: row " + std::to_string(i) + " has norm " +
                        std::to_string(std::sqrt(ss)) + ", expected 1");
    }
  }
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    const auto src = rows.row_span(i);
    std::copy(src.begin(), src.end(), storage_.begin() + static_cast<std::ptrdiff_t>(cursor_ * width_));
    cursor_ = (cursor_ + 1) % capacity_;
  }
  fill_ = std::min(capacity_, fill_ + rows.rows());
}

Array MemoryBank::negatives() const {
  return Array({fill_, width_}, std::vector<double>(storage_.begin(),
                                                    storage_.begin() + static_cast<std::ptrdiff_t>(fill_ * width_)));
}

Array MemoryBank::chronological() const {
  std::vector<double> out;
  out.reserve(fill_ * width_);
  // Oldest entry sits at the cursor once the ring has wrapped, else at 0.
  const std::size_t start = fill_ == capacity_ ? cursor_ : 0;
  for (std::size_t i = 0; i < fill_; ++i) {
    const auto first = storage_.begin() + static_cast<std::ptrdiff_t>(((start + i) % capacity_) * width_);
    out.insert(out.end(), first, first + static_cast<std::ptrdiff_t>(width_));
  }
  return Array({fill_, width_}, std::move(out));
}

MemoryBank MemoryBank::restore(std::size_t capacity, std::size_t width, std::vector<double> storage,
                               std::size_t cursor, std::size_t fill) {
  MemoryBank b(capacity, width);
  if (storage.size() != capacity * width || cursor >= capacity || fill > capacity) {
    throw IoError("MemoryBank::restore: inconsistent bank state");
  }
  b.storage_ = std::move(storage);
  b.cursor_ = cursor;
  b.fill_ = fill;
  return b;
}

}  // namespace vclr

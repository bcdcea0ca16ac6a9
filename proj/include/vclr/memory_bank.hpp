#pragma once

#include <cstddef>
#include <vector>

#include "vclr/array.hpp"

namespace vclr {

/// Fixed-capacity FIFO ring of unit-norm embeddings used as negatives.
class MemoryBank {
 public:
  MemoryBank() = default;
  MemoryBank(std::size_t capacity, std::size_t width);

  /// Writes rows at the cursor, overwriting the oldest entries once full.
  /// Every row must have unit norm within 1e-10.
  void enqueue(const Array& rows);

  /// The filled rows in storage order (fill x width).
  Array negatives() const;
  /// The filled rows oldest first.
  Array chronological() const;

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t fill() const noexcept { return fill_; }
  std::size_t cursor() const noexcept { return cursor_; }
  const std::vector<double>& storage() const noexcept { return storage_; }

  /// Rebuilds a bank from serialized state; validates sizes and the cursor.
  static MemoryBank restore(std::size_t capacity, std::size_t width, std::vector<double> storage,
                            std::size_t cursor, std::size_t fill);

  friend bool operator==(const MemoryBank&, const MemoryBank&) = default;

 private:
  std::size_t capacity_ = 0;
  std::size_t width_ = 0;
  std::size_t cursor_ = 0;
  std::size_t fill_ = 0;
  std::vector<double> storage_;
};

}  // namespace vclr

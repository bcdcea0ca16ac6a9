#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "vclr/array.hpp"
#include "vclr/tape.hpp"

namespace vclr {

/// A scalar-valued function recorded on a tape from the given input handles.
using ScalarFn = std::function<Var(Tape&, std::span<const Var>)>;

struct Gradients {
  double value = 0.0;
  /// One array per input, same shape as the input; zeros where unreached.
  std::vector<Array> grads;
  /// False for inputs with no path to the output.
  std::vector<bool> reached;
};

Gradients forward_backward(const ScalarFn& f, std::span<const Array> inputs);

/// Value only; inputs are recorded as constants so no backward state is kept.
double evaluate(const ScalarFn& f, std::span<const Array> inputs);

/// Rows scaled to unit Euclidean norm. Rows with norm < 1e-12 raise DomainError.
Array l2_normalize(const Array& rows);

struct GradCheckOptions {
  double step = 1e-5;
  double tol = 1e-4;
  /// 0 checks every coordinate; otherwise a seeded sample of this many per input.
  std::size_t coords_per_input = 0;
  std::uint64_t seed = 0;
  /// Attempts to move off a ReLU kink before a coordinate is skipped.
  int kink_resamples = 3;
};

struct InputCheck {
  double max_rel_error = 0.0;
  std::size_t worst_coordinate = 0;
  std::size_t checked = 0;
  std::size_t kinks_skipped = 0;
};

struct GradCheckReport {
  std::vector<InputCheck> inputs;
  double max_rel_error = 0.0;
  bool passed = true;
};

/// Compares analytic gradients against central differences. The relative
/// error of a coordinate is |analytic - fd| / max(1, |analytic|, |fd|).
/// A coordinate whose ±step evaluations see different ReLU activation
/// patterns sits on a kink; the base point for that coordinate is nudged
/// and re-checked, and after `kink_resamples` tries it is skipped.
GradCheckReport grad_check(const ScalarFn& f, std::vector<Array> inputs,
                           const GradCheckOptions& options = {});

}  // namespace vclr

#include "vclr/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "vclr/error.hpp"
#include "vclr/rng.hpp"

namespace vclr {

Gradients forward_backward(const ScalarFn& f, std::span<const Array> inputs) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const Array& a : inputs) vars.push_back(tape.input(a));
  const Var out = f(tape, vars);
  Gradients result;
  result.value = tape.scalar(out);
  tape.backward(out);
  for (Var v : vars) {
    result.grads.push_back(tape.grad(v));
    result.reached.push_back(tape.reached(v));
  }
  return result;
}

double evaluate(const ScalarFn& f, std::span<const Array> inputs) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const Array& a : inputs) vars.push_back(tape.constant(a));
  return tape.scalar(f(tape, vars));
}

Array l2_normalize(const Array& rows) {
  Tape tape;
  return tape.value(tape.l2_normalize(tape.constant(rows)));
}

namespace {

struct Probe {
  double value;
  std::vector<std::uint8_t> pattern;
};

Probe probe(const ScalarFn& f, std::span<const Array> inputs) {
  Tape tape;
  std::vector<Var> vars;
  for (const Array& a : inputs) vars.push_back(tape.constant(a));
  const double v = tape.scalar(f(tape, vars));
  const auto p = tape.relu_pattern();
  return {v, std::vector<std::uint8_t>(p.begin(), p.end())};
}

std::vector<std::size_t> pick_coordinates(std::size_t size, std::size_t wanted, Rng& rng) {
  std::vector<std::size_t> idx(size);
  std::iota(idx.begin(), idx.end(), 0);
  if (wanted == 0 || wanted >= size) return idx;
  for (std::size_t i = 0; i < wanted; ++i) std::swap(idx[i], idx[i + rng.below(size - i)]);
  idx.resize(wanted);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

GradCheckReport grad_check(const ScalarFn& f, std::vector<Array> inputs,
                           const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw DomainError("grad_check: step must be positive");
  if (!(options.tol > 0.0)) throw DomainError("grad_check: tol must be positive");

  const Gradients base = forward_backward(f, inputs);
  if (!std::isfinite(base.value)) throw DomainError("grad_check: non-finite value at base point");

  Rng rng(options.seed);
  GradCheckReport report;
  report.inputs.resize(inputs.size());
  const double h = options.step;

  for (std::size_t k = 0; k < inputs.size(); ++k) {
    InputCheck& check = report.inputs[k];
    for (std::size_t i : pick_coordinates(inputs[k].size(), options.coords_per_input, rng)) {
      const double original = inputs[k][i];
      double analytic = base.grads[k][i];
      bool resolved = false;
      for (int attempt = 0; attempt <= options.kink_resamples; ++attempt) {
        if (attempt > 0) {
          // Move the base point off the kink and refresh the analytic gradient there.
          const double sign = attempt % 2 ? 1.0 : -1.0;
          inputs[k][i] = original + sign * 50.0 * attempt * h;
          analytic = forward_backward(f, inputs).grads[k][i];
        }
        const double centre = inputs[k][i];
        inputs[k][i] = centre + h;
        const Probe plus = probe(f, inputs);
        inputs[k][i] = centre - h;
        const Probe minus = probe(f, inputs);
        inputs[k][i] = centre;
        if (!std::isfinite(plus.value) || !std::isfinite(minus.value)) {
          inputs[k][i] = original;
          throw DomainError("grad_check: non-finite value perturbing input " + std::to_string(k) +
                            " coordinate " + std::to_string(i));
        }
        if (plus.pattern != minus.pattern) continue;
        const double fd = (plus.value - minus.value) / (2.0 * h);
        const double err =
            std::abs(analytic - fd) / std::max({1.0, std::abs(analytic), std::abs(fd)});
        if (err >= check.max_rel_error) {
          check.max_rel_error = err;
          check.worst_coordinate = i;
        }
        ++check.checked;
        resolved = true;
        break;
      }
      inputs[k][i] = original;
      if (!resolved) ++check.kinks_skipped;
    }
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
  }
  report.passed = report.max_rel_error < options.tol;
  return report;
}

}  // namespace vclr

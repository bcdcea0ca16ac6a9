#include "vclr/losses.hpp"

#include <optional>
#include <string>
#include <vector>

#include "vclr/error.hpp"

namespace vclr {

namespace {

void check_tau(double tau) {
  if (!(tau > 0.0)) throw DomainError("info_nce: temperature must be positive, got " + std::to_string(tau));
}

Var nce_from_logits(Tape& tape, Var logits, double tau) {
  const Var scaled = tape.scale(logits, 1.0 / tau);
  const std::vector<int> labels(tape.value(scaled).rows(), 0);
  return tape.softmax_cross_entropy(scaled, labels);
}

Var nce_with_negative_logits(Tape& tape, Var q, Var p, std::optional<Var> negative_logits, double tau) {
  const Var pos = tape.row_dot(q, p);
  if (!negative_logits) return nce_from_logits(tape, pos, tau);
  const std::vector<Var> parts = {pos, *negative_logits};
  return nce_from_logits(tape, tape.concat_cols(parts), tau);
}

std::optional<Var> negative_logits(Tape& tape, Var q, const Array& negatives) {
  if (negatives.size() == 0) return std::nullopt;
  if (negatives.cols() != tape.value(q).cols()) {
    throw ShapeError("info_nce", "negatives " + shape_string(negatives) + " vs query " +
                                     shape_string(tape.value(q)));
  }
  return tape.matmul_transposed(q, tape.constant(negatives));
}

}  // namespace

Var info_nce(Tape& tape, Var q, Var p, const Array& negatives, double tau) {
  check_tau(tau);
  return nce_with_negative_logits(tape, q, p, negative_logits(tape, q, negatives), tau);
}

Var info_nce_rowwise(Tape& tape, Var q, Var p, std::span<const Var> negatives, double tau) {
  check_tau(tau);
  std::vector<Var> parts = {tape.row_dot(q, p)};
  for (Var n : negatives) parts.push_back(tape.row_dot(q, n));
  return nce_from_logits(tape, tape.concat_cols(parts), tau);
}

Var loss_inter(Tape& tape, Var q1a, Var p1, Var p2, Var p3, const Array& bank, double tau) {
  check_tau(tau);
  // The three terms share one query and one bank.
  const std::optional<Var> neg = negative_logits(tape, q1a, bank);
  const Var a = nce_with_negative_logits(tape, q1a, p1, neg, tau);
  const Var b = nce_with_negative_logits(tape, q1a, p2, neg, tau);
  const Var c = nce_with_negative_logits(tape, q1a, p3, neg, tau);
  return tape.scale(tape.add(tape.add(a, b), c), 1.0 / 3.0);
}

Var loss_intra(Tape& tape, Var q1a, Var p1, Var p2, Var p3, double tau) {
  const std::vector<Var> negatives = {p2, p3};
  return info_nce_rowwise(tape, q1a, p1, negatives, tau);
}

Var loss_segment(Tape& tape, Var q_tuple, Var p_tuple, const Array& bank, double tau) {
  return info_nce(tape, q_tuple, p_tuple, bank, tau);
}

Var loss_order(Tape& tape, Var logits, std::span<const int> labels) {
  if (tape.value(logits).cols() != 4) {
    throw ShapeError("loss_order", "expected 4 logits, got " + shape_string(tape.value(logits)));
  }
  for (int l : labels) {
    if (l < 0 || l > 3) throw DomainError("loss_order: label " + std::to_string(l) + " outside [0,4)");
  }
  return tape.softmax_cross_entropy(logits, labels);
}

Var total_loss(Tape& tape, std::span<const Var> terms) {
  if (terms.empty()) throw DomainError("total_loss: no terms");
  Var acc = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) acc = tape.add(acc, terms[i]);
  return acc;
}

double info_nce(const Array& q, const Array& p, const Array& negatives, double tau) {
  Tape tape;
  const Var qv = tape.constant(q.reshaped({1, q.size()}));
  const Var pv = tape.constant(p.reshaped({1, p.size()}));
  return tape.scalar(info_nce(tape, qv, pv, negatives, tau));
}

}  // namespace vclr

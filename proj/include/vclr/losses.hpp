#pragma once

#include <span>

#include "vclr/array.hpp"
#include "vclr/tape.hpp"

namespace vclr {

// All embeddings are n x d matrices of unit rows; row i is one sample, and
// each loss is the mean over rows.

/// -log( e^{q.p/tau} / (e^{q.p/tau} + sum_j e^{q.n_j/tau}) ), i.e. (M+1)-way
/// softmax cross-entropy with the positive in slot 0. `negatives` is M x d,
/// shared by all rows; M = 0 gives exactly 0.
Var info_nce(Tape& tape, Var q, Var p, const Array& negatives, double tau);

/// Same objective with per-row negatives: row i of each entry of `negatives`
/// is a negative for row i of `q` only.
Var info_nce_rowwise(Tape& tape, Var q, Var p, std::span<const Var> negatives, double tau);

/// Mean of info_nce(q, p_i, bank) over the three positives.
Var loss_inter(Tape& tape, Var q1a, Var p1, Var p2, Var p3, const Array& bank, double tau);

/// info_nce(q, p1) with {p2, p3} of the same video as the only negatives.
Var loss_intra(Tape& tape, Var q1a, Var p1, Var p2, Var p3, double tau);

Var loss_segment(Tape& tape, Var q_tuple, Var p_tuple, const Array& bank, double tau);

/// Cross-entropy of 4-way order logits against labels in [0, 4).
Var loss_order(Tape& tape, Var logits, std::span<const int> labels);

/// Unweighted sum of scalar losses.
Var total_loss(Tape& tape, std::span<const Var> terms);

/// Single-sample convenience over arrays.
double info_nce(const Array& q, const Array& p, const Array& negatives, double tau);

}  // namespace vclr

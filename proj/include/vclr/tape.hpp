#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "vclr/array.hpp"

namespace vclr {

/// Handle to a value recorded on a Tape. Only meaningful for the tape that issued it.
struct Var {
  std::size_t id = 0;
};

/// Reverse-mode recorder for the small op set the objectives need. Values are
/// computed eagerly; `backward` walks the nodes in reverse creation order,
/// which is a valid topological order because every op only references
/// earlier nodes. Gradients flow only into nodes that depend on an `input`.
class Tape {
 public:
  Var input(Array value);
  Var constant(Array value);

  const Array& value(Var v) const;
  double scalar(Var v) const;

  /// Seeds d(root)/d(root) = 1 and propagates. Allowed once per tape.
  void backward(Var root);

  /// Gradient of the backward root w.r.t. `v`; zeros when `v` was not reached.
  Array grad(Var v) const;
  bool reached(Var v) const;

  Var matmul(Var a, Var b);
  /// a · bᵀ; rows of `b` are the right-hand vectors.
  Var matmul_transposed(Var a, Var b);
  Var add(Var a, Var b);
  /// Adds a 1 x c row to every row of an n x c matrix.
  Var add_row(Var a, Var row);
  Var mul(Var a, Var b);
  Var scale(Var a, double factor);
  Var sum(Var a);
  Var exp(Var a);
  Var relu(Var a);
  /// Mean over consecutive blocks of `group` rows: (n*group) x c -> n x c.
  /// Each column of a block is summed in ascending value order, so the result
  /// is bit-identical under any permutation of the rows inside a block.
  Var group_mean(Var a, std::size_t group);
  Var concat_cols(std::span<const Var> parts);
  Var concat_rows(std::span<const Var> parts);
  Var reshape(Var a, std::size_t rows, std::size_t cols);
  /// Rows [begin, end) of a matrix.
  Var slice_rows(Var a, std::size_t begin, std::size_t end);
  /// Same value with no gradient path back to `a`.
  Var detach(Var a);
  /// Divides each row by its Euclidean norm; a row norm below 1e-12 is a DomainError.
  Var l2_normalize(Var a);
  /// Row-wise inner products of two n x c matrices -> n x 1.
  Var row_dot(Var a, Var b);
  /// Row-wise log-sum-exp -> n x 1.
  Var logsumexp(Var a);
  /// Mean over rows of -log softmax(logits_i)[labels_i].
  Var softmax_cross_entropy(Var logits, std::span<const int> labels);

  /// One byte per ReLU element evaluated so far (1 when the pre-activation is positive).
  std::span<const std::uint8_t> relu_pattern() const noexcept { return relu_pattern_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }

 private:
  using Backward = std::function<void(Tape&, const Array& out_grad)>;

  struct Node {
    Array value;
    Array grad;
    bool needs_grad = false;
    bool has_grad = false;
    Backward back;
  };

  Var push(Array value, bool needs_grad, Backward back);
  const Node& node(Var v) const;
  bool needs(Var v) const { return nodes_[v.id].needs_grad; }
  /// Accumulation target for `v`, zero-initialised on first use.
  Array& grad_ref(Var v);

  std::vector<Node> nodes_;
  std::vector<std::uint8_t> relu_pattern_;
  bool backward_done_ = false;
};

}  // namespace vclr

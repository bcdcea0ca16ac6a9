#include "vclr/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vclr/error.hpp"

namespace vclr {

namespace {

constexpr double kMinRowNorm = 1e-12;

void require_matrix(const char* op, const Array& a) {
  if (a.rank() > 2) throw ShapeError(op, "expected rank <= 2, got " + shape_string(a));
}

void require_same(const char* op, const Array& a, const Array& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(op, shape_string(a) + " vs " + shape_string(b));
  }
}

// out(n x m) += a(n x k) * b(k x m)
void gemm_nn(const Array& a, const Array& b, Array& out) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double* o = out.data().data() + i * m;
    const double* ar = a.data().data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = ar[p];
      if (s == 0.0) continue;
      const double* br = b.data().data() + p * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += s * br[j];
    }
  }
}

// out(n x m) += a(n x k) * b(m x k)ᵀ
void gemm_nt(const Array& a, const Array& b, Array& out) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const double* ar = a.data().data() + i * k;
    double* o = out.data().data() + i * m;
    for (std::size_t j = 0; j < m; ++j) {
      const double* br = b.data().data() + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ar[p] * br[p];
      o[j] += acc;
    }
  }
}

// out(k x m) += a(n x k)ᵀ * b(n x m)
void gemm_tn(const Array& a, const Array& b, Array& out) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    const double* ar = a.data().data() + i * k;
    const double* br = b.data().data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = ar[p];
      if (s == 0.0) continue;
      double* o = out.data().data() + p * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += s * br[j];
    }
  }
}

Array matrix_like(const Array& a) { return Array::matrix(a.rows(), a.cols()); }

}  // namespace

Var Tape::push(Array value, bool needs_grad, Backward back) {
  if (backward_done_) throw Error("tape: cannot record after backward");
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  if (needs_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) throw Error("tape: unknown variable " + std::to_string(v.id));
  return nodes_[v.id];
}

Array& Tape::grad_ref(Var v) {
  Node& n = nodes_[v.id];
  if (!n.has_grad) {
    n.grad = Array(n.value.shape(), 0.0);
    n.has_grad = true;
  }
  return n.grad;
}

Var Tape::input(Array value) {
  require_matrix("input", value);
  return push(std::move(value), true, nullptr);
}

Var Tape::constant(Array value) {
  require_matrix("constant", value);
  return push(std::move(value), false, nullptr);
}

const Array& Tape::value(Var v) const { return node(v).value; }

double Tape::scalar(Var v) const {
  const Array& a = value(v);
  if (a.size() != 1) throw ShapeError("scalar", "expected one element, got " + shape_string(a));
  return a[0];
}

void Tape::backward(Var root) {
  if (backward_done_) throw Error("tape: backward called twice on the same recording");
  if (value(root).size() != 1) {
    throw ShapeError("backward", "root must be scalar, got " + shape_string(value(root)));
  }
  backward_done_ = true;
  if (!nodes_[root.id].needs_grad) return;
  grad_ref(root)[0] = 1.0;
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || !n.has_grad || !n.back) continue;
    n.back(*this, n.grad);
  }
}

Array Tape::grad(Var v) const {
  const Node& n = node(v);
  if (!n.has_grad) return Array(n.value.shape(), 0.0);
  return n.grad;
}

bool Tape::reached(Var v) const { return node(v).has_grad; }

Var Tape::matmul(Var a, Var b) {
  const Array& av = value(a);
  const Array& bv = value(b);
  require_matrix("matmul", av);
  require_matrix("matmul", bv);
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul", shape_string(av) + " x " + shape_string(bv));
  }
  Array out = Array::matrix(av.rows(), bv.cols());
  gemm_nn(av, bv, out);
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, const Array& g) {
    if (t.needs(a)) gemm_nt(g, t.value(b), t.grad_ref(a));
    if (t.needs(b)) gemm_tn(t.value(a), g, t.grad_ref(b));
  });
}

Var Tape::matmul_transposed(Var a, Var b) {
  const Array& av = value(a);
  const Array& bv = value(b);
  require_matrix("matmul_transposed", av);
  require_matrix("matmul_transposed", bv);
  if (av.cols() != bv.cols()) {
    throw ShapeError("matmul_transposed", shape_string(av) + " x " + shape_string(bv) + "^T");
  }
  Array out = Array::matrix(av.rows(), bv.rows());
  gemm_nt(av, bv, out);
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, const Array& g) {
    if (t.needs(a)) gemm_nn(g, t.value(b), t.grad_ref(a));
    if (t.needs(b)) gemm_tn(g, t.value(a), t.grad_ref(b));
  });
}

Var Tape::add(Var a, Var b) {
  const Array& av = value(a);
  const Array& bv = value(b);
  require_same("add", av, bv);
  Array out = matrix_like(av);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, const Array& g) {
    for (Var v : {a, b}) {
      if (!t.needs(v)) continue;
      Array& dst = t.grad_ref(v);
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    }
  });
}

Var Tape::add_row(Var a, Var row) {
  const Array& av = value(a);
  const Array& rv = value(row);
  require_matrix("add_row", av);
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw ShapeError("add_row", shape_string(av) + " + " + shape_string(rv));
  }
  Array out = matrix_like(av);
  for (std::size_t i = 0; i < av.rows(); ++i) {
    for (std::size_t j = 0; j < av.cols(); ++j) out(i, j) = av(i, j) + rv[j];
  }
  return push(std::move(out), needs(a) || needs(row), [a, row](Tape& t, const Array& g) {
    if (t.needs(a)) {
      Array& dst = t.grad_ref(a);
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    }
    if (t.needs(row)) {
      Array& dst = t.grad_ref(row);
      for (std::size_t i = 0; i < g.rows(); ++i) {
        for (std::size_t j = 0; j < g.cols(); ++j) dst[j] += g(i, j);
      }
    }
  });
}

Var Tape::mul(Var a, Var b) {
  const Array& av = value(a);
  const Array& bv = value(b);
  require_same("mul", av, bv);
  Array out = matrix_like(av);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, const Array& g) {
    if (t.needs(a)) {
      Array& dst = t.grad_ref(a);
      const Array& other = t.value(b);
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * other[i];
    }
    if (t.needs(b)) {
      Array& dst = t.grad_ref(b);
      const Array& other = t.value(a);
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * other[i];
    }
  });
}

Var Tape::scale(Var a, double factor) {
  const Array& av = value(a);
  Array out = matrix_like(av);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  return push(std::move(out), needs(a), [a, factor](Tape& t, const Array& g) {
    Array& dst = t.grad_ref(a);
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * factor;
  });
}

Var Tape::sum(Var a) {
  const Array& av = value(a);
  double total = 0.0;
  for (double v : av.data()) total += v;
  return push(Array::scalar(total), needs(a), [a](Tape& t, const Array& g) {
    Array& dst = t.grad_ref(a);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[0];
  });
}

Var Tape::exp(Var a) {
  const Array& av = value(a);
  Array out = matrix_like(av);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(av[i]);
  Var result = push(std::move(out), needs(a), nullptr);
  if (needs(a)) {
    nodes_[result.id].back = [a, result](Tape& t, const Array& g) {
      Array& dst = t.grad_ref(a);
      const Array& y = t.value(result);
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * y[i];
    };
  }
  return result;
}

Var Tape::relu(Var a) {
  const Array& av = value(a);
  Array out = matrix_like(av);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const bool on = av[i] > 0.0;
    out[i] = on ? av[i] : 0.0;
    relu_pattern_.push_back(on ? 1 : 0);
  }
  return push(std::move(out), needs(a), [a](Tape& t, const Array& g) {
    Array& dst = t.grad_ref(a);
    const Array& x = t.value(a);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] > 0.0) dst[i] += g[i];
    }
  });
}

Var Tape::group_mean(Var a, std::size_t group) {
  const Array& av = value(a);
  require_matrix("group_mean", av);
  if (group == 0 || av.rows() % group != 0) {
    throw ShapeError("group_mean", shape_string(av) + " not divisible into groups of " +
                                       std::to_string(group));
  }
  const std::size_t n = av.rows() / group, c = av.cols();
  Array out = Array::matrix(n, c);
  std::vector<double> column(group);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      for (std::size_t r = 0; r < group; ++r) column[r] = av(i * group + r, j);
      std::sort(column.begin(), column.end());
      double acc = 0.0;
      for (double v : column) acc += v;
      out(i, j) = acc / static_cast<double>(group);
    }
  }
  return push(std::move(out), needs(a), [a, group](Tape& t, const Array& g) {
    Array& dst = t.grad_ref(a);
    const double w = 1.0 / static_cast<double>(group);
    for (std::size_t r = 0; r < dst.rows(); ++r) {
      for (std::size_t j = 0; j < dst.cols(); ++j) dst(r, j) += g(r / group, j) * w;
    }
  });
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols", "no operands");
  const std::size_t n = value(parts[0]).rows();
  std::size_t width = 0;
  bool any = false;
  for (Var p : parts) {
    const Array& pv = value(p);
    require_matrix("concat_cols", pv);
    if (pv.rows() != n) {
      throw ShapeError("concat_cols", shape_string(value(parts[0])) + " vs " + shape_string(pv));
    }
    width += pv.cols();
    any = any || needs(p);
  }
  Array out = Array::matrix(n, width);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Array& pv = value(p);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < pv.cols(); ++j) out(i, offset + j) = pv(i, j);
    }
    offset += pv.cols();
  }
  std::vector<Var> ids(parts.begin(), parts.end());
  return push(std::move(out), any, [ids](Tape& t, const Array& g) {
    std::size_t off = 0;
    for (Var p : ids) {
      const std::size_t w = t.value(p).cols();
      if (t.needs(p)) {
        Array& dst = t.grad_ref(p);
        for (std::size_t i = 0; i < g.rows(); ++i) {
          for (std::size_t j = 0; j < w; ++j) dst(i, j) += g(i, off + j);
        }
      }
      off += w;
    }
  });
}

Var Tape::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows", "no operands");
  const std::size_t c = value(parts[0]).cols();
  std::size_t rows = 0;
  bool any = false;
  for (Var p : parts) {
    const Array& pv = value(p);
    require_matrix("concat_rows", pv);
    if (pv.cols() != c) {
      throw ShapeError("concat_rows", shape_string(value(parts[0])) + " vs " + shape_string(pv));
    }
    rows += pv.rows();
    any = any || needs(p);
  }
  std::vector<double> data;
  data.reserve(rows * c);
  for (Var p : parts) {
    const auto d = value(p).data();
    data.insert(data.end(), d.begin(), d.end());
  }
  std::vector<Var> ids(parts.begin(), parts.end());
  return push(Array({rows, c}, std::move(data)), any, [ids](Tape& t, const Array& g) {
    std::size_t off = 0;
    for (Var p : ids) {
      const std::size_t count = t.value(p).size();
      if (t.needs(p)) {
        Array& dst = t.grad_ref(p);
        for (std::size_t i = 0; i < count; ++i) dst[i] += g[off + i];
      }
      off += count;
    }
  });
}

Var Tape::reshape(Var a, std::size_t rows, std::size_t cols) {
  const Array& av = value(a);
  if (rows * cols != av.size()) {
    throw ShapeError("reshape", shape_string(av) + " -> " + shape_string({rows, cols}));
  }
  return push(av.reshaped({rows, cols}), needs(a), [a](Tape& t, const Array& g) {
    Array& dst = t.grad_ref(a);
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  });
}

Var Tape::slice_rows(Var a, std::size_t begin, std::size_t end) {
  const Array& av = value(a);
  require_matrix("slice_rows", av);
  if (begin > end || end > av.rows()) {
    throw ShapeError("slice_rows", "rows [" + std::to_string(begin) + "," + std::to_string(end) +
                                       ") of " + shape_string(av));
  }
  const std::size_t c = av.cols();
  std::vector<double> data(av.data().begin() + static_cast<std::ptrdiff_t>(begin * c),
                           av.data().begin() + static_cast<std::ptrdiff_t>(end * c));
  return push(Array({end - begin, c}, std::move(data)), needs(a),
              [a, begin](Tape& t, const Array& g) {
                Array& dst = t.grad_ref(a);
                const std::size_t off = begin * g.cols();
                for (std::size_t i = 0; i < g.size(); ++i) dst[off + i] += g[i];
              });
}

Var Tape::detach(Var a) { return push(value(a), false, nullptr); }

Var Tape::l2_normalize(Var a) {
  const Array& av = value(a);
  require_matrix("l2_normalize", av);
  const std::size_t n = av.rows(), c = av.cols();
  Array out = matrix_like(av);
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double ss = 0.0;
    for (std::size_t j = 0; j < c; ++j) ss += av(i, j) * av(i, j);
    const double norm = std::sqrt(ss);
    if (!(norm >= kMinRowNorm)) {
      throw DomainError("l2_normalize: row " + std::to_string(i) + " has norm " +
                        std::to_string(norm) + " below 1e-12 (degenerate embedding)");
    }
    norms[i] = norm;
    for (std::size_t j = 0; j < c; ++j) out(i, j) = av(i, j) / norm;
  }
  Var result = push(std::move(out), needs(a), nullptr);
  if (needs(a)) {
    nodes_[result.id].back = [a, result, norms = std::move(norms)](Tape& t, const Array& g) {
      Array& dst = t.grad_ref(a);
      const Array& y = t.value(result);
      for (std::size_t i = 0; i < y.rows(); ++i) {
        double yg = 0.0;
        for (std::size_t j = 0; j < y.cols(); ++j) yg += y(i, j) * g(i, j);
        for (std::size_t j = 0; j < y.cols(); ++j) {
          dst(i, j) += (g(i, j) - y(i, j) * yg) / norms[i];
        }
      }
    };
  }
  return result;
}

Var Tape::row_dot(Var a, Var b) {
  const Array& av = value(a);
  const Array& bv = value(b);
  require_same("row_dot", av, bv);
  Array out = Array::matrix(av.rows(), 1);
  for (std::size_t i = 0; i < av.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < av.cols(); ++j) acc += av(i, j) * bv(i, j);
    out[i] = acc;
  }
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, const Array& g) {
    if (t.needs(a)) {
      Array& dst = t.grad_ref(a);
      const Array& other = t.value(b);
      for (std::size_t i = 0; i < dst.rows(); ++i) {
        for (std::size_t j = 0; j < dst.cols(); ++j) dst(i, j) += g[i] * other(i, j);
      }
    }
    if (t.needs(b)) {
      Array& dst = t.grad_ref(b);
      const Array& other = t.value(a);
      for (std::size_t i = 0; i < dst.rows(); ++i) {
        for (std::size_t j = 0; j < dst.cols(); ++j) dst(i, j) += g[i] * other(i, j);
      }
    }
  });
}

namespace {

// Numerically stable log-sum-exp of one row; fills `weights` with the softmax.
double row_logsumexp(std::span<const double> row, std::span<double> weights) {
  const double mx = *std::max_element(row.begin(), row.end());
  double s = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    weights[j] = std::exp(row[j] - mx);
    s += weights[j];
  }
  for (double& w : weights) w /= s;
  return mx + std::log(s);
}

}  // namespace

Var Tape::logsumexp(Var a) {
  const Array& av = value(a);
  require_matrix("logsumexp", av);
  Array out = Array::matrix(av.rows(), 1);
  Array soft = matrix_like(av);
  for (std::size_t i = 0; i < av.rows(); ++i) out[i] = row_logsumexp(av.row_span(i), soft.row_span(i));
  return push(std::move(out), needs(a), [a, soft = std::move(soft)](Tape& t, const Array& g) {
    Array& dst = t.grad_ref(a);
    for (std::size_t i = 0; i < soft.rows(); ++i) {
      for (std::size_t j = 0; j < soft.cols(); ++j) dst(i, j) += g[i] * soft(i, j);
    }
  });
}

Var Tape::softmax_cross_entropy(Var logits, std::span<const int> labels) {
  const Array& lv = value(logits);
  require_matrix("softmax_cross_entropy", lv);
  if (labels.size() != lv.rows()) {
    throw ShapeError("softmax_cross_entropy", shape_string(lv) + " with " +
                                                  std::to_string(labels.size()) + " labels");
  }
  const std::size_t n = lv.rows(), c = lv.cols();
  for (int label : labels) {
    if (label < 0 || static_cast<std::size_t>(label) >= c) {
      throw DomainError("softmax_cross_entropy: label " + std::to_string(label) +
                        " outside [0," + std::to_string(c) + ")");
    }
  }
  Array soft = matrix_like(lv);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lse = row_logsumexp(lv.row_span(i), soft.row_span(i));
    total += lse - lv(i, static_cast<std::size_t>(labels[i]));
  }
  std::vector<int> lab(labels.begin(), labels.end());
  return push(Array::scalar(total / static_cast<double>(n)), needs(logits),
              [logits, soft = std::move(soft), lab = std::move(lab)](Tape& t, const Array& g) {
                Array& dst = t.grad_ref(logits);
                const double w = g[0] / static_cast<double>(soft.rows());
                for (std::size_t i = 0; i < soft.rows(); ++i) {
                  for (std::size_t j = 0; j < soft.cols(); ++j) {
                    const double onehot = static_cast<int>(j) == lab[i] ? 1.0 : 0.0;
                    dst(i, j) += w * (soft(i, j) - onehot);
                  }
                }
              });
}

}  // namespace vclr

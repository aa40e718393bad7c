#pragma once

// Tape-based reverse-mode differentiation over 2-D tensors.
//
// Every primitive appends one node to a Tape; node ids are assigned in
// creation order, so the tape is topologically sorted by construction and
// backward() replays the recorded rules in reverse id order. The primitive
// set is closed: matmul, add (with row broadcast for biases), elementwise
// multiply, concat and slice along columns, sigmoid, tanh, softmax,
// cross-entropy, row gather, dropout, and sum/mean reductions.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hmtl/error.hpp"
#include "hmtl/random.hpp"
#include "hmtl/tensor.hpp"

namespace hmtl {

using NodeId = std::size_t;

enum class OpKind {
  Parameter,
  Constant,
  MatMul,
  Add,
  Mul,
  Concat,
  Slice,
  Sigmoid,
  Tanh,
  Softmax,
  CrossEntropy,
  Gather,
  Dropout,
  Sum,
  Mean,
};

inline const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::Parameter: return "parameter";
    case OpKind::Constant: return "constant";
    case OpKind::MatMul: return "matmul";
    case OpKind::Add: return "add";
    case OpKind::Mul: return "mul";
    case OpKind::Concat: return "concat";
    case OpKind::Slice: return "slice";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Tanh: return "tanh";
    case OpKind::Softmax: return "softmax";
    case OpKind::CrossEntropy: return "cross_entropy";
    case OpKind::Gather: return "gather";
    case OpKind::Dropout: return "dropout";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
  }
  return "unknown";
}

enum class Activation { Sigmoid, Tanh };

// Accumulated gradients keyed by node id. Nodes that backward() never
// reached have no entry and are treated as zero.
template <typename Real>
class GradientStore {
 public:
  explicit GradientStore(std::size_t nodes = 0) : grads_(nodes) {}

  bool contains(NodeId id) const { return id < grads_.size() && grads_[id].has_value(); }

  const Tensor<Real>* find(NodeId id) const {
    return contains(id) ? &*grads_[id] : nullptr;
  }

  const Tensor<Real>& at(NodeId id) const {
    if (!contains(id)) throw ContractError("no gradient for node " + std::to_string(id));
    return *grads_[id];
  }

  // Zero-initialized on first touch; backward rules add into the result.
  Tensor<Real>& slot(NodeId id, const Shape& shape) {
    auto& g = grads_.at(id);
    if (!g) g.emplace(shape, Real(0));
    return *g;
  }

  // Moves a gradient out, leaving the node without one.
  std::optional<Tensor<Real>> take(NodeId id) {
    if (!contains(id)) return std::nullopt;
    std::optional<Tensor<Real>> out = std::move(grads_[id]);
    grads_[id].reset();
    return out;
  }

  std::size_t capacity() const { return grads_.size(); }

 private:
  std::vector<std::optional<Tensor<Real>>> grads_;
};

template <typename Real>
class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
template <typename Real>
class Var {
 public:
  Var() = default;
  Var(Tape<Real>* tape, NodeId id) : tape_(tape), id_(id) {}

  NodeId id() const { return id_; }
  Tape<Real>& tape() const { return *tape_; }
  const Tensor<Real>& value() const { return tape_->value(id_); }
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape<Real>* tape_ = nullptr;
  NodeId id_ = 0;
};

template <typename Real>
class Tape {
 public:
  using BackwardFn =
      std::function<void(const Tensor<Real>& grad, GradientStore<Real>& store)>;

  struct Node {
    OpKind op;
    std::vector<NodeId> inputs;
    Tensor<Real> owned;
    const Tensor<Real>* external = nullptr;
    bool requires_grad = false;
    BackwardFn backward;

    const Tensor<Real>& value() const { return external ? *external : owned; }
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Trainable leaf that references caller-owned storage; the storage must
  // outlive the tape and stay unmodified until backward() has run.
  Var<Real> parameter(const Tensor<Real>& value) {
    Node node{OpKind::Parameter, {}, Tensor<Real>{}, &value, true, {}};
    return append(std::move(node));
  }

  // Trainable leaf holding its own copy.
  Var<Real> variable(Tensor<Real> value) {
    Node node{OpKind::Parameter, {}, std::move(value), nullptr, true, {}};
    return append(std::move(node));
  }

  // Leaf excluded from differentiation (masks, initial states).
  Var<Real> constant(Tensor<Real> value) {
    Node node{OpKind::Constant, {}, std::move(value), nullptr, false, {}};
    return append(std::move(node));
  }

  Var<Real> record(OpKind op, std::vector<NodeId> inputs, Tensor<Real> value,
                   BackwardFn backward) {
    if (!value.all_finite()) {
      throw NumericError(std::string("non-finite value produced by ") + op_name(op));
    }
    bool requires_grad = false;
    for (NodeId in : inputs) requires_grad = requires_grad || nodes_.at(in).requires_grad;
    Node node{op, std::move(inputs), std::move(value), nullptr, requires_grad,
              requires_grad ? std::move(backward) : BackwardFn{}};
    return append(std::move(node));
  }

  const Tensor<Real>& value(NodeId id) const { return nodes_.at(id).value(); }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  bool requires_grad(NodeId id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  Var<Real> append(Node node) {
    nodes_.push_back(std::move(node));
    return Var<Real>(this, nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
};

// Gradients of a scalar root with respect to every node that reaches it.
// The tape is left untouched, so repeated calls produce identical stores.
template <typename Real>
GradientStore<Real> backward(const Var<Real>& root) {
  const Tape<Real>& tape = root.tape();
  if (root.value().size() != 1) {
    throw ContractError("backward() needs a scalar root, got " +
                        shape_string(root.shape()));
  }
  GradientStore<Real> store(tape.size());
  if (!tape.requires_grad(root.id())) return store;
  store.slot(root.id(), root.shape()).fill(Real(1));
  for (NodeId id = root.id() + 1; id-- > 0;) {
    const auto& node = tape.node(id);
    if (!node.backward || !store.contains(id)) continue;
    // Slots live in a fixed-size vector, so this reference survives the
    // rule creating slots for its inputs.
    const Tensor<Real>& grad = store.at(id);
    node.backward(grad, store);
  }
  return store;
}

namespace detail {

template <typename Real>
void require_matrix(const Var<Real>& v, const char* op) {
  if (!v.value().is_matrix()) {
    throw DimensionError(std::string(op) + " expects a matrix, got " +
                         shape_string(v.shape()));
  }
}

template <typename Real>
Real stable_sigmoid(Real x) {
  if (x >= Real(0)) return Real(1) / (Real(1) + std::exp(-x));
  const Real e = std::exp(x);
  return e / (Real(1) + e);
}

}  // namespace detail

template <typename Real>
Var<Real> matmul(const Var<Real>& a, const Var<Real>& b) {
  detail::require_matrix(a, "matmul");
  detail::require_matrix(b, "matmul");
  const auto& av = a.value();
  const auto& bv = b.value();
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  if (bv.rows() != k) {
    throw DimensionError("matmul shape mismatch: " + shape_string(av.shape()) +
                         " x " + shape_string(bv.shape()));
  }
  Tensor<Real> out = Tensor<Real>::matrix(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    Real* orow = out.row(i).data();
    for (std::size_t p = 0; p < k; ++p) {
      const Real s = av(i, p);
      if (s == Real(0)) continue;
      const Real* brow = bv.row(p).data();
      for (std::size_t j = 0; j < n; ++j) orow[j] += s * brow[j];
    }
  }
  Tape<Real>& tape = a.tape();
  const NodeId ia = a.id(), ib = b.id();
  return tape.record(
      OpKind::MatMul, {ia, ib}, std::move(out),
      [&tape, ia, ib, m, k, n](const Tensor<Real>& g, GradientStore<Real>& store) {
        const auto& av = tape.value(ia);
        const auto& bv = tape.value(ib);
        if (tape.requires_grad(ia)) {
          auto& ga = store.slot(ia, av.shape());
          for (std::size_t i = 0; i < m; ++i) {
            const Real* grow = g.row(i).data();
            for (std::size_t p = 0; p < k; ++p) {
              const Real* brow = bv.row(p).data();
              Real acc = 0;
              for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
              ga(i, p) += acc;
            }
          }
        }
        if (tape.requires_grad(ib)) {
          auto& gb = store.slot(ib, bv.shape());
          for (std::size_t i = 0; i < m; ++i) {
            const Real* grow = g.row(i).data();
            for (std::size_t p = 0; p < k; ++p) {
              const Real s = av(i, p);
              if (s == Real(0)) continue;
              Real* gbrow = gb.row(p).data();
              for (std::size_t j = 0; j < n; ++j) gbrow[j] += s * grow[j];
            }
          }
        }
      });
}

// a + b where b has a's shape or is a single row broadcast over a's rows.
template <typename Real>
Var<Real> add(const Var<Real>& a, const Var<Real>& b) {
  detail::require_matrix(a, "add");
  detail::require_matrix(b, "add");
  const auto& av = a.value();
  const auto& bv = b.value();
  const bool broadcast = bv.rows() == 1 && av.rows() != 1 && bv.cols() == av.cols();
  if (!broadcast && av.shape() != bv.shape()) {
    throw DimensionError("add shape mismatch: " + shape_string(av.shape()) + " + " +
                         shape_string(bv.shape()));
  }
  Tensor<Real> out = av;
  const std::size_t cols = av.cols();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[broadcast ? i % cols : i];
  Tape<Real>& tape = a.tape();
  const NodeId ia = a.id(), ib = b.id();
  return tape.record(
      OpKind::Add, {ia, ib}, std::move(out),
      [&tape, ia, ib, broadcast, cols](const Tensor<Real>& g, GradientStore<Real>& store) {
        if (tape.requires_grad(ia)) accumulate_into(store.slot(ia, g.shape()), g);
        if (tape.requires_grad(ib)) {
          if (broadcast) {
            auto& gb = store.slot(ib, {1, cols});
            for (std::size_t i = 0; i < g.size(); ++i) gb[i % cols] += g[i];
          } else {
            accumulate_into(store.slot(ib, g.shape()), g);
          }
        }
      });
}

// Elementwise product of equally shaped matrices.
template <typename Real>
Var<Real> mul(const Var<Real>& a, const Var<Real>& b) {
  detail::require_matrix(a, "mul");
  detail::require_matrix(b, "mul");
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.shape() != bv.shape()) {
    throw DimensionError("mul shape mismatch: " + shape_string(av.shape()) + " * " +
                         shape_string(bv.shape()));
  }
  Tensor<Real> out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  Tape<Real>& tape = a.tape();
  const NodeId ia = a.id(), ib = b.id();
  return tape.record(
      OpKind::Mul, {ia, ib}, std::move(out),
      [&tape, ia, ib](const Tensor<Real>& g, GradientStore<Real>& store) {
        const auto& av = tape.value(ia);
        const auto& bv = tape.value(ib);
        if (tape.requires_grad(ia)) {
          auto& ga = store.slot(ia, av.shape());
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
        }
        if (tape.requires_grad(ib)) {
          auto& gb = store.slot(ib, bv.shape());
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
        }
      });
}

// Concatenation along columns; all parts share the row count.
template <typename Real>
Var<Real> concat(std::span<const Var<Real>> parts) {
  if (parts.empty()) throw ContractError("concat of zero tensors");
  const std::size_t rows = parts[0].rows();
  std::size_t total = 0;
  std::vector<NodeId> ids;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    detail::require_matrix(p, "concat");
    if (p.rows() != rows) {
      throw DimensionError("concat row mismatch: " + shape_string(parts[0].shape()) +
                           " vs " + shape_string(p.shape()));
    }
    ids.push_back(p.id());
    widths.push_back(p.cols());
    total += p.cols();
  }
  Tensor<Real> out = Tensor<Real>::matrix(rows, total);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto& v = p.value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(v.row(r).begin(), v.row(r).end(), out.row(r).begin() + offset);
    }
    offset += v.cols();
  }
  Tape<Real>& tape = parts[0].tape();
  return tape.record(
      OpKind::Concat, ids, std::move(out),
      [&tape, ids, widths, rows](const Tensor<Real>& g, GradientStore<Real>& store) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (tape.requires_grad(ids[k])) {
            auto& gk = store.slot(ids[k], {rows, widths[k]});
            for (std::size_t r = 0; r < rows; ++r) {
              const Real* src = g.row(r).data() + offset;
              Real* dst = gk.row(r).data();
              for (std::size_t c = 0; c < widths[k]; ++c) dst[c] += src[c];
            }
          }
          offset += widths[k];
        }
      });
}

template <typename Real>
Var<Real> concat(std::initializer_list<Var<Real>> parts) {
  return concat(std::span<const Var<Real>>(parts.begin(), parts.size()));
}

// Columns [begin, end).
template <typename Real>
Var<Real> slice(const Var<Real>& a, std::size_t begin, std::size_t end) {
  detail::require_matrix(a, "slice");
  const auto& av = a.value();
  if (begin >= end || end > av.cols()) {
    throw DimensionError("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of range for " + shape_string(av.shape()));
  }
  const std::size_t rows = av.rows(), width = end - begin;
  Tensor<Real> out = Tensor<Real>::matrix(rows, width);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(av.row(r).begin() + begin, width, out.row(r).begin());
  }
  Tape<Real>& tape = a.tape();
  const NodeId ia = a.id();
  const Shape in_shape = av.shape();
  return tape.record(
      OpKind::Slice, {ia}, std::move(out),
      [ia, in_shape, begin, width, rows](const Tensor<Real>& g, GradientStore<Real>& store) {
        auto& ga = store.slot(ia, in_shape);
        for (std::size_t r = 0; r < rows; ++r) {
          Real* dst = ga.row(r).data() + begin;
          const Real* src = g.row(r).data();
          for (std::size_t c = 0; c < width; ++c) dst[c] += src[c];
        }
      });
}

template <typename Real>
Var<Real> activation(const Var<Real>& x, Activation kind) {
  Tensor<Real> out = x.value();
  if (kind == Activation::Sigmoid) {
    for (auto& v : out.data()) v = detail::stable_sigmoid(v);
  } else {
    for (auto& v : out.data()) v = std::tanh(v);
  }
  Tape<Real>& tape = x.tape();
  const NodeId ix = x.id();
  const NodeId iy = tape.size();
  return tape.record(
      kind == Activation::Sigmoid ? OpKind::Sigmoid : OpKind::Tanh, {ix}, std::move(out),
      [&tape, ix, iy, kind](const Tensor<Real>& g, GradientStore<Real>& store) {
        const auto& y = tape.value(iy);
        auto& gx = store.slot(ix, y.shape());
        if (kind == Activation::Sigmoid) {
          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (Real(1) - y[i]);
        } else {
          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (Real(1) - y[i] * y[i]);
        }
      });
}

template <typename Real>
Var<Real> sigmoid(const Var<Real>& x) {
  return activation(x, Activation::Sigmoid);
}

template <typename Real>
Var<Real> tanh(const Var<Real>& x) {
  return activation(x, Activation::Tanh);
}

namespace detail {

// Row-wise softmax with max subtraction.
template <typename Real>
Tensor<Real> softmax_rows(const Tensor<Real>& logits) {
  Tensor<Real> out = logits;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const Real top = *std::max_element(row.begin(), row.end());
    Real total = 0;
    for (auto& v : row) {
      v = std::exp(v - top);
      total += v;
    }
    for (auto& v : row) v /= total;
  }
  return out;
}

}  // namespace detail

template <typename Real>
Var<Real> softmax(const Var<Real>& logits) {
  detail::require_matrix(logits, "softmax");
  Tensor<Real> out = detail::softmax_rows(logits.value());
  Tape<Real>& tape = logits.tape();
  const NodeId ix = logits.id();
  const NodeId iy = tape.size();
  return tape.record(
      OpKind::Softmax, {ix}, std::move(out),
      [&tape, ix, iy](const Tensor<Real>& g, GradientStore<Real>& store) {
        const auto& y = tape.value(iy);
        auto& gx = store.slot(ix, y.shape());
        for (std::size_t r = 0; r < y.rows(); ++r) {
          const auto yr = y.row(r);
          const auto gr = g.row(r);
          Real dot = 0;
          for (std::size_t c = 0; c < yr.size(); ++c) dot += gr[c] * yr[c];
          auto out = gx.row(r);
          for (std::size_t c = 0; c < yr.size(); ++c) out[c] += yr[c] * (gr[c] - dot);
        }
      });
}

// Mean negative log-likelihood of the target class over unmasked rows.
// An empty mask means every row counts.
template <typename Real>
Var<Real> cross_entropy(const Var<Real>& logits, std::span<const std::size_t> targets,
                        std::span<const bool> mask = {}) {
  detail::require_matrix(logits, "cross_entropy");
  const auto& lv = logits.value();
  const std::size_t n = lv.rows(), classes = lv.cols();
  if (targets.size() != n) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) +
                         " targets for logits " + shape_string(lv.shape()));
  }
  if (!mask.empty() && mask.size() != n) {
    throw DimensionError("cross_entropy: mask length " + std::to_string(mask.size()) +
                         " for " + std::to_string(n) + " rows");
  }
  std::vector<bool> active(n, true);
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    active[i] = mask.empty() || mask[i];
    if (!active[i]) continue;
    if (targets[i] >= classes) {
      throw LabelError("cross_entropy: target " + std::to_string(targets[i]) +
                       " outside [0, " + std::to_string(classes) + ")");
    }
    ++count;
  }
  if (count == 0) throw DegenerateBatchError("cross_entropy: every position is masked");

  Tensor<Real> probs = detail::softmax_rows(lv);
  Real loss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!active[i]) continue;
    const auto row = lv.row(i);
    const Real top = *std::max_element(row.begin(), row.end());
    Real total = 0;
    for (Real v : row) total += std::exp(v - top);
    loss += (top + std::log(total)) - row[targets[i]];
  }
  loss /= static_cast<Real>(count);

  std::vector<std::size_t> saved_targets(targets.begin(), targets.end());
  Tape<Real>& tape = logits.tape();
  const NodeId ix = logits.id();
  return tape.record(
      OpKind::CrossEntropy, {ix}, Tensor<Real>::scalar(loss),
      [ix, probs = std::move(probs), saved_targets = std::move(saved_targets),
       active = std::move(active), count](const Tensor<Real>& g, GradientStore<Real>& store) {
        auto& gx = store.slot(ix, probs.shape());
        const Real scale = g[0] / static_cast<Real>(count);
        for (std::size_t r = 0; r < probs.rows(); ++r) {
          if (!active[r]) continue;
          const auto pr = probs.row(r);
          auto out = gx.row(r);
          for (std::size_t c = 0; c < pr.size(); ++c) out[c] += scale * pr[c];
          out[saved_targets[r]] -= scale;
        }
      });
}

// Rows of `table` selected by `indices`; the embedding lookup primitive.
template <typename Real>
Var<Real> gather_rows(const Var<Real>& table, std::span<const std::size_t> indices) {
  detail::require_matrix(table, "gather");
  const auto& tv = table.value();
  if (indices.empty()) throw DimensionError("gather with no indices");
  const std::size_t width = tv.cols();
  Tensor<Real> out = Tensor<Real>::matrix(indices.size(), width);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= tv.rows()) {
      throw DimensionError("gather index " + std::to_string(indices[r]) +
                           " out of range for " + shape_string(tv.shape()));
    }
    std::copy(tv.row(indices[r]).begin(), tv.row(indices[r]).end(), out.row(r).begin());
  }
  Tape<Real>& tape = table.tape();
  const NodeId it = table.id();
  const Shape table_shape = tv.shape();
  std::vector<std::size_t> saved(indices.begin(), indices.end());
  return tape.record(
      OpKind::Gather, {it}, std::move(out),
      [it, table_shape, saved = std::move(saved), width](const Tensor<Real>& g,
                                                          GradientStore<Real>& store) {
        auto& gt = store.slot(it, table_shape);
        for (std::size_t r = 0; r < saved.size(); ++r) {
          Real* dst = gt.row(saved[r]).data();
          const Real* src = g.row(r).data();
          for (std::size_t c = 0; c < width; ++c) dst[c] += src[c];
        }
      });
}

// Inverted dropout: survivors scaled by 1/(1-p) in train mode; identity
// (no node recorded) otherwise.
template <typename Real>
Var<Real> dropout(const Var<Real>& x, double p, Rng& rng, bool train) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ContractError("dropout rate must lie in [0, 1), got " + std::to_string(p));
  }
  if (!train || p == 0.0) return x;
  const Real scale = Real(1) / static_cast<Real>(1.0 - p);
  Tensor<Real> keep(x.shape());
  for (auto& k : keep.data()) k = rng.bernoulli(p) ? Real(0) : scale;
  Tensor<Real> out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= keep[i];
  Tape<Real>& tape = x.tape();
  const NodeId ix = x.id();
  return tape.record(
      OpKind::Dropout, {ix}, std::move(out),
      [ix, keep = std::move(keep)](const Tensor<Real>& g, GradientStore<Real>& store) {
        auto& gx = store.slot(ix, keep.shape());
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * keep[i];
      });
}

template <typename Real>
Var<Real> sum(const Var<Real>& x) {
  Real total = 0;
  for (Real v : x.value().data()) total += v;
  Tape<Real>& tape = x.tape();
  const NodeId ix = x.id();
  const Shape in_shape = x.shape();
  return tape.record(OpKind::Sum, {ix}, Tensor<Real>::scalar(total),
                     [ix, in_shape](const Tensor<Real>& g, GradientStore<Real>& store) {
                       auto& gx = store.slot(ix, in_shape);
                       for (auto& v : gx.data()) v += g[0];
                     });
}

template <typename Real>
Var<Real> mean(const Var<Real>& x) {
  const std::size_t n = x.value().size();
  Real total = 0;
  for (Real v : x.value().data()) total += v;
  Tape<Real>& tape = x.tape();
  const NodeId ix = x.id();
  const Shape in_shape = x.shape();
  return tape.record(OpKind::Mean, {ix}, Tensor<Real>::scalar(total / static_cast<Real>(n)),
                     [ix, in_shape, n](const Tensor<Real>& g, GradientStore<Real>& store) {
                       auto& gx = store.slot(ix, in_shape);
                       const Real share = g[0] / static_cast<Real>(n);
                       for (auto& v : gx.data()) v += share;
                     });
}

}  // namespace hmtl

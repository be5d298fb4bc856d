#pragma once

#include <cstddef>
#include <deque>
#include <span>
#include <string_view>
#include <vector>

#include "gfmlab/autodiff/tensor.hpp"

namespace gfmlab::ad {

enum class Op {
  Leaf,
  MatMul,
  Add,
  Sub,
  Mul,
  Scale,
  AddScalar,
  Relu,
  Exp,
  Log,
  RowSoftmax,
  RowLogSoftmax,
  RowCosine,       // (n x d, n x d) -> n x 1, cosine of matching rows
  PairwiseCosine,  // (n x d, m x d) -> n x m
  ConcatRows,
  GatherRows,
  Sum,
  Mean,
  MeanRows,  // column means, n x c -> 1 x c
  Variance,  // population variance over all entries
  AddBias,   // n x c + broadcast 1 x c
  Transpose,
};

std::string_view op_name(Op op);

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool requires_grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Non-primary operands of a primitive.
struct OpAttrs {
  double scalar = 0.0;
  std::vector<std::size_t> indices;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so the list is
// topologically sorted. One tape serves one scalar backward pass; build a new
// tape for each gradient evaluation. Not thread-safe: one tape per thread.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  Var apply(Op op, std::span<const Var> inputs, const OpAttrs& attrs = {});

  // Populates d(root)/d(leaf) for every requires_grad leaf. Gradients
  // accumulate additively across fan-out.
  void backward(Var root);

  // Gradient of a node after backward(); zeros for nodes the root does not
  // depend on.
  Tensor grad(Var v) const;
  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }
  Op op_at(std::size_t id) const { return nodes_.at(id).op; }
  const std::vector<std::size_t>& inputs_at(std::size_t id) const { return nodes_.at(id).inputs; }

 private:
  struct Node {
    Op op = Op::Leaf;
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    OpAttrs attrs;
    std::vector<double> saved;
  };

  void check_owned(Var v) const;
  Tensor forward(Op op, std::span<const Var> inputs, const OpAttrs& attrs,
                 std::vector<double>& saved) const;
  void propagate(std::size_t id);
  Tensor& grad_slot(std::size_t id);

  std::deque<Node> nodes_;  // deque keeps value references stable
  bool backward_done_ = false;
};

// Named primitives. All inputs must live on the same tape.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var neg(Var a);
Var relu(Var a);
Var exp(Var a);
Var log(Var a);
Var row_softmax(Var a);
Var row_log_softmax(Var a);
Var row_cosine(Var u, Var v);
Var pairwise_cosine(Var u, Var v);
Var concat_rows(std::span<const Var> parts);
Var gather_rows(Var a, std::vector<std::size_t> rows);
Var sum(Var a);
Var mean(Var a);
Var mean_rows(Var a);
Var variance(Var a);
Var add_bias(Var a, Var bias);
Var transpose(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }

}  // namespace gfmlab::ad

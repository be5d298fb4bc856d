#include "gfmlab/autodiff/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gfmlab/errors.hpp"

namespace gfmlab::ad {

namespace {

constexpr double kCosineGuard = 1e-12;

void require(bool cond, Op op, const std::string& what) {
  if (!cond) throw ContractError(std::string(op_name(op)) + ": " + what);
}

void require_arity(Op op, std::span<const Var> inputs, std::size_t n) {
  require(inputs.size() == n, op,
          "expects " + std::to_string(n) + " inputs, got " + std::to_string(inputs.size()));
}

void require_same_shape(Op op, const Tensor& a, const Tensor& b) {
  require(a.same_shape(b), op, "shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

// Accumulates a*b^T into out (a: n x k, b: m x k).
void add_matmul_bt(const Tensor& a, const Tensor& b, Tensor& out) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a(i, p) * b(j, p);
      out(i, j) += s;
    }
  }
}

// Accumulates a^T*b into out (a: k x n, b: k x m).
void add_matmul_at(const Tensor& a, const Tensor& b, Tensor& out) {
  const std::size_t k = a.rows(), n = a.cols(), m = b.cols();
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t i = 0; i < n; ++i) {
      const double av = a(p, i);
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) out(i, j) += av * b(p, j);
    }
  }
}

// Row-pair cosine with the guarded denominator. saved gets {denominator,
// |u|^2, |v|^2, guarded} per pair.
double guarded_cosine(std::span<const double> u, std::span<const double> v,
                      std::vector<double>& saved) {
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t p = 0; p < u.size(); ++p) {
    uv += u[p] * v[p];
    uu += u[p] * u[p];
    vv += v[p] * v[p];
  }
  const double raw = std::sqrt(uu) * std::sqrt(vv);
  const bool guarded = raw < kCosineGuard;
  const double denom = guarded ? kCosineGuard : raw;
  saved.insert(saved.end(), {denom, uu, vv, guarded ? 1.0 : 0.0});
  return uv / denom;
}

// Accumulates g * d cos(u, v)/du into du.
void cosine_grad(std::span<const double> u, std::span<const double> v, double c,
                 const double* saved, double g, std::span<double> du) {
  const double denom = saved[0], uu = saved[1];
  const bool guarded = saved[3] != 0.0;
  for (std::size_t p = 0; p < u.size(); ++p) {
    double d = v[p] / denom;
    if (!guarded) d -= c * u[p] / uu;
    du[p] += g * d;
  }
}

}  // namespace

std::string_view op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::MatMul: return "matmul";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Scale: return "scale";
    case Op::AddScalar: return "add_scalar";
    case Op::Relu: return "relu";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::RowSoftmax: return "row_softmax";
    case Op::RowLogSoftmax: return "row_log_softmax";
    case Op::RowCosine: return "row_cosine";
    case Op::PairwiseCosine: return "pairwise_cosine";
    case Op::ConcatRows: return "concat_rows";
    case Op::GatherRows: return "gather_rows";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
    case Op::MeanRows: return "mean_rows";
    case Op::Variance: return "variance";
    case Op::AddBias: return "add_bias";
    case Op::Transpose: return "transpose";
  }
  return "unknown";
}

const Tensor& Var::value() const {
  if (tape_ == nullptr) throw ContractError("use of an unbound Var");
  return tape_->value(*this);
}

bool Var::requires_grad() const {
  if (tape_ == nullptr) throw ContractError("use of an unbound Var");
  return tape_->requires_grad(*this);
}

void Tape::check_owned(Var v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) {
    throw ContractError("Var does not belong to this tape");
  }
}

const Tensor& Tape::value(Var v) const {
  check_owned(v);
  return nodes_[v.id_].value;
}

bool Tape::requires_grad(Var v) const {
  check_owned(v);
  return nodes_[v.id_].requires_grad;
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  if (!value.all_finite()) throw NumericError("leaf tensor contains non-finite values");
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::apply(Op op, std::span<const Var> inputs, const OpAttrs& attrs) {
  if (op == Op::Leaf) throw ContractError("apply(): leaf is not a primitive");
  if (backward_done_) throw ContractError("tape already consumed by backward()");
  bool any_grad = false;
  for (const Var& v : inputs) {
    check_owned(v);
    any_grad = any_grad || nodes_[v.id_].requires_grad;
  }
  std::vector<double> saved;
  Tensor out = forward(op, inputs, attrs, saved);
  if (!out.all_finite()) {
    throw NumericError(std::string(op_name(op)) + " produced non-finite values");
  }
  Node node;
  node.op = op;
  node.value = std::move(out);
  node.requires_grad = any_grad;
  if (any_grad) {
    node.inputs.reserve(inputs.size());
    for (const Var& v : inputs) node.inputs.push_back(v.id_);
    node.attrs = attrs;
    node.saved = std::move(saved);
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor Tape::forward(Op op, std::span<const Var> in, const OpAttrs& attrs,
                     std::vector<double>& saved) const {
  auto val = [&](std::size_t i) -> const Tensor& { return nodes_[in[i].id_].value; };
  switch (op) {
    case Op::MatMul: {
      require_arity(op, in, 2);
      require(val(0).cols() == val(1).rows(), op,
              "inner dimensions differ: " + val(0).shape_str() + " * " + val(1).shape_str());
      return ad::matmul(val(0), val(1));
    }
    case Op::Add:
    case Op::Sub:
    case Op::Mul: {
      require_arity(op, in, 2);
      require_same_shape(op, val(0), val(1));
      Tensor out = val(0);
      const Tensor& b = val(1);
      for (std::size_t i = 0; i < out.size(); ++i) {
        if (op == Op::Add) out[i] += b[i];
        else if (op == Op::Sub) out[i] -= b[i];
        else out[i] *= b[i];
      }
      return out;
    }
    case Op::Scale:
    case Op::AddScalar: {
      require_arity(op, in, 1);
      require(std::isfinite(attrs.scalar), op, "non-finite scalar operand");
      Tensor out = val(0);
      for (double& v : out.values()) v = op == Op::Scale ? v * attrs.scalar : v + attrs.scalar;
      return out;
    }
    case Op::Relu:
    case Op::Exp:
    case Op::Log: {
      require_arity(op, in, 1);
      Tensor out = val(0);
      for (double& v : out.values()) {
        if (op == Op::Relu) v = v > 0.0 ? v : 0.0;
        else if (op == Op::Exp) v = std::exp(v);
        else v = std::log(v);
      }
      return out;
    }
    case Op::RowSoftmax:
    case Op::RowLogSoftmax: {
      require_arity(op, in, 1);
      const Tensor& a = val(0);
      require(a.cols() > 0, op, "empty rows");
      Tensor out(a.rows(), a.cols());
      for (std::size_t r = 0; r < a.rows(); ++r) {
        auto row = a.row_span(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (double v : row) z += std::exp(v - mx);
        const double lz = std::log(z);
        for (std::size_t c = 0; c < a.cols(); ++c) {
          const double shifted = row[c] - mx;
          out(r, c) = op == Op::RowSoftmax ? std::exp(shifted - lz) : shifted - lz;
        }
      }
      return out;
    }
    case Op::RowCosine: {
      require_arity(op, in, 2);
      require_same_shape(op, val(0), val(1));
      Tensor out(val(0).rows(), 1);
      saved.reserve(4 * val(0).rows());
      for (std::size_t r = 0; r < val(0).rows(); ++r) {
        out(r, 0) = guarded_cosine(val(0).row_span(r), val(1).row_span(r), saved);
      }
      return out;
    }
    case Op::PairwiseCosine: {
      require_arity(op, in, 2);
      require(val(0).cols() == val(1).cols(), op,
              "feature widths differ: " + val(0).shape_str() + " vs " + val(1).shape_str());
      Tensor out(val(0).rows(), val(1).rows());
      saved.reserve(4 * out.size());
      for (std::size_t i = 0; i < val(0).rows(); ++i)
        for (std::size_t j = 0; j < val(1).rows(); ++j)
          out(i, j) = guarded_cosine(val(0).row_span(i), val(1).row_span(j), saved);
      return out;
    }
    case Op::ConcatRows: {
      require(!in.empty(), op, "needs at least one input");
      const std::size_t cols = val(0).cols();
      std::size_t rows = 0;
      for (std::size_t i = 0; i < in.size(); ++i) {
        require(val(i).cols() == cols, op, "column counts differ");
        rows += val(i).rows();
      }
      std::vector<double> values;
      values.reserve(rows * cols);
      for (std::size_t i = 0; i < in.size(); ++i) {
        auto v = val(i).values();
        values.insert(values.end(), v.begin(), v.end());
      }
      return Tensor(rows, cols, std::move(values));
    }
    case Op::GatherRows: {
      require_arity(op, in, 1);
      const Tensor& a = val(0);
      Tensor out(attrs.indices.size(), a.cols());
      for (std::size_t r = 0; r < attrs.indices.size(); ++r) {
        require(attrs.indices[r] < a.rows(), op, "row index out of range");
        auto src = a.row_span(attrs.indices[r]);
        std::copy(src.begin(), src.end(), out.row_span(r).begin());
      }
      return out;
    }
    case Op::Sum:
    case Op::Mean: {
      require_arity(op, in, 1);
      require(val(0).size() > 0, op, "empty input");
      double s = 0.0;
      for (double v : val(0).values()) s += v;
      if (op == Op::Mean) s /= static_cast<double>(val(0).size());
      return Tensor::scalar(s);
    }
    case Op::MeanRows: {
      require_arity(op, in, 1);
      const Tensor& a = val(0);
      require(a.rows() > 0, op, "empty input");
      Tensor out(1, a.cols());
      for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) out(0, c) += a(r, c);
      for (double& v : out.values()) v /= static_cast<double>(a.rows());
      return out;
    }
    case Op::Variance: {
      require_arity(op, in, 1);
      const Tensor& a = val(0);
      require(a.size() > 0, op, "empty input");
      const double n = static_cast<double>(a.size());
      double mu = 0.0;
      for (double v : a.values()) mu += v;
      mu /= n;
      double s = 0.0;
      for (double v : a.values()) s += (v - mu) * (v - mu);
      saved.push_back(mu);
      return Tensor::scalar(s / n);
    }
    case Op::AddBias: {
      require_arity(op, in, 2);
      require(val(1).rows() == 1 && val(1).cols() == val(0).cols(), op,
              "bias must be 1 x " + std::to_string(val(0).cols()) + ", got " + val(1).shape_str());
      Tensor out = val(0);
      for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += val(1)(0, c);
      return out;
    }
    case Op::Transpose: {
      require_arity(op, in, 1);
      return val(0).transposed();
    }
    case Op::Leaf:
      break;
  }
  throw ContractError("unsupported primitive");
}

Tensor& Tape::grad_slot(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var root) {
  if (root.tape_ != this || root.id_ >= nodes_.size()) {
    throw ContractError("backward(): root is not a node of this tape");
  }
  if (backward_done_) throw ContractError("backward(): tape already consumed");
  if (nodes_[root.id_].value.size() != 1) {
    throw ContractError("backward(): root must be scalar, got " +
                        nodes_[root.id_].value.shape_str());
  }
  backward_done_ = true;
  for (auto& n : nodes_) n.grad = Tensor();
  if (!nodes_[root.id_].requires_grad) return;
  grad_slot(root.id_)[0] = 1.0;
  for (std::size_t id = root.id_ + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.op == Op::Leaf || !n.requires_grad || n.grad.empty()) continue;
    propagate(id);
  }
}

void Tape::propagate(std::size_t id) {
  const Node& n = nodes_[id];
  const Tensor& g = n.grad;
  const Tensor& out = n.value;
  auto needs = [&](std::size_t i) { return nodes_[n.inputs[i]].requires_grad; };
  auto in_val = [&](std::size_t i) -> const Tensor& { return nodes_[n.inputs[i]].value; };
  auto slot = [&](std::size_t i) -> Tensor& { return grad_slot(n.inputs[i]); };

  switch (n.op) {
    case Op::MatMul:
      if (needs(0)) add_matmul_bt(g, in_val(1), slot(0));
      if (needs(1)) add_matmul_at(in_val(0), g, slot(1));
      break;
    case Op::Add:
    case Op::Sub:
      if (needs(0)) {
        Tensor& s = slot(0);
        for (std::size_t i = 0; i < g.size(); ++i) s[i] += g[i];
      }
      if (needs(1)) {
        Tensor& s = slot(1);
        const double sign = n.op == Op::Add ? 1.0 : -1.0;
        for (std::size_t i = 0; i < g.size(); ++i) s[i] += sign * g[i];
      }
      break;
    case Op::Mul:
      if (needs(0)) {
        Tensor& s = slot(0);
        const Tensor& b = in_val(1);
        for (std::size_t i = 0; i < g.size(); ++i) s[i] += g[i] * b[i];
      }
      if (needs(1)) {
        Tensor& s = slot(1);
        const Tensor& a = in_val(0);
        for (std::size_t i = 0; i < g.size(); ++i) s[i] += g[i] * a[i];
      }
      break;
    case Op::Scale: {
      Tensor& s = slot(0);
      for (std::size_t i = 0; i < g.size(); ++i) s[i] += n.attrs.scalar * g[i];
      break;
    }
    case Op::AddScalar: {
      Tensor& s = slot(0);
      for (std::size_t i = 0; i < g.size(); ++i) s[i] += g[i];
      break;
    }
    case Op::Relu: {
      // relu'(0) = 0
      Tensor& s = slot(0);
      const Tensor& a = in_val(0);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (a[i] > 0.0) s[i] += g[i];
      break;
    }
    case Op::Exp: {
      Tensor& s = slot(0);
      for (std::size_t i = 0; i < g.size(); ++i) s[i] += g[i] * out[i];
      break;
    }
    case Op::Log: {
      Tensor& s = slot(0);
      const Tensor& a = in_val(0);
      for (std::size_t i = 0; i < g.size(); ++i) s[i] += g[i] / a[i];
      break;
    }
    case Op::RowSoftmax: {
      Tensor& s = slot(0);
      for (std::size_t r = 0; r < out.rows(); ++r) {
        double gy = 0.0;
        for (std::size_t c = 0; c < out.cols(); ++c) gy += g(r, c) * out(r, c);
        for (std::size_t c = 0; c < out.cols(); ++c) s(r, c) += out(r, c) * (g(r, c) - gy);
      }
      break;
    }
    case Op::RowLogSoftmax: {
      Tensor& s = slot(0);
      for (std::size_t r = 0; r < out.rows(); ++r) {
        double gs = 0.0;
        for (std::size_t c = 0; c < out.cols(); ++c) gs += g(r, c);
        for (std::size_t c = 0; c < out.cols(); ++c) s(r, c) += g(r, c) - std::exp(out(r, c)) * gs;
      }
      break;
    }
    case Op::RowCosine: {
      const Tensor& u = in_val(0);
      const Tensor& v = in_val(1);
      for (std::size_t r = 0; r < u.rows(); ++r) {
        const double* sv = n.saved.data() + 4 * r;
        // saved[1]/[2] are |u|^2 and |v|^2; swap them for the v-side gradient.
        const double sv_swapped[4] = {sv[0], sv[2], sv[1], sv[3]};
        if (needs(0)) cosine_grad(u.row_span(r), v.row_span(r), out(r, 0), sv, g(r, 0), slot(0).row_span(r));
        if (needs(1)) cosine_grad(v.row_span(r), u.row_span(r), out(r, 0), sv_swapped, g(r, 0), slot(1).row_span(r));
      }
      break;
    }
    case Op::PairwiseCosine: {
      const Tensor& u = in_val(0);
      const Tensor& v = in_val(1);
      for (std::size_t i = 0; i < u.rows(); ++i) {
        for (std::size_t j = 0; j < v.rows(); ++j) {
          const double gij = g(i, j);
          if (gij == 0.0) continue;
          const double* sv = n.saved.data() + 4 * (i * v.rows() + j);
          const double sv_swapped[4] = {sv[0], sv[2], sv[1], sv[3]};
          if (needs(0)) cosine_grad(u.row_span(i), v.row_span(j), out(i, j), sv, gij, slot(0).row_span(i));
          if (needs(1)) cosine_grad(v.row_span(j), u.row_span(i), out(i, j), sv_swapped, gij, slot(1).row_span(j));
        }
      }
      break;
    }
    case Op::ConcatRows: {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const std::size_t len = in_val(k).size();
        if (needs(k)) {
          Tensor& s = slot(k);
          for (std::size_t i = 0; i < len; ++i) s[i] += g[offset + i];
        }
        offset += len;
      }
      break;
    }
    case Op::GatherRows: {
      Tensor& s = slot(0);
      for (std::size_t r = 0; r < n.attrs.indices.size(); ++r) {
        auto dst = s.row_span(n.attrs.indices[r]);
        auto src = g.row_span(r);
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
      }
      break;
    }
    case Op::Sum:
    case Op::Mean: {
      Tensor& s = slot(0);
      const double d = n.op == Op::Mean ? g[0] / static_cast<double>(s.size()) : g[0];
      for (double& v : s.values()) v += d;
      break;
    }
    case Op::MeanRows: {
      Tensor& s = slot(0);
      const double inv = 1.0 / static_cast<double>(s.rows());
      for (std::size_t r = 0; r < s.rows(); ++r)
        for (std::size_t c = 0; c < s.cols(); ++c) s(r, c) += g(0, c) * inv;
      break;
    }
    case Op::Variance: {
      Tensor& s = slot(0);
      const Tensor& a = in_val(0);
      const double mu = n.saved[0];
      const double k = 2.0 * g[0] / static_cast<double>(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) s[i] += k * (a[i] - mu);
      break;
    }
    case Op::AddBias: {
      if (needs(0)) {
        Tensor& s = slot(0);
        for (std::size_t i = 0; i < g.size(); ++i) s[i] += g[i];
      }
      if (needs(1)) {
        Tensor& s = slot(1);
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) s(0, c) += g(r, c);
      }
      break;
    }
    case Op::Transpose: {
      Tensor& s = slot(0);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) s(c, r) += g(r, c);
      break;
    }
    case Op::Leaf:
      break;
  }
}

Tensor Tape::grad(Var v) const {
  check_owned(v);
  const Node& n = nodes_[v.id_];
  if (n.grad.empty()) return Tensor(n.value.rows(), n.value.cols());
  return n.grad;
}

namespace {
Var apply_on(Op op, std::initializer_list<Var> inputs, OpAttrs attrs = {}) {
  const Var& first = *inputs.begin();
  if (first.tape() == nullptr) throw ContractError("use of an unbound Var");
  return first.tape()->apply(op, std::span<const Var>(inputs.begin(), inputs.size()), attrs);
}
}  // namespace

Var matmul(Var a, Var b) { return apply_on(Op::MatMul, {a, b}); }
Var add(Var a, Var b) { return apply_on(Op::Add, {a, b}); }
Var sub(Var a, Var b) { return apply_on(Op::Sub, {a, b}); }
Var mul(Var a, Var b) { return apply_on(Op::Mul, {a, b}); }
Var scale(Var a, double s) { return apply_on(Op::Scale, {a}, OpAttrs{s, {}}); }
Var add_scalar(Var a, double s) { return apply_on(Op::AddScalar, {a}, OpAttrs{s, {}}); }
Var neg(Var a) { return scale(a, -1.0); }
Var relu(Var a) { return apply_on(Op::Relu, {a}); }
Var exp(Var a) { return apply_on(Op::Exp, {a}); }
Var log(Var a) { return apply_on(Op::Log, {a}); }
Var row_softmax(Var a) { return apply_on(Op::RowSoftmax, {a}); }
Var row_log_softmax(Var a) { return apply_on(Op::RowLogSoftmax, {a}); }
Var row_cosine(Var u, Var v) { return apply_on(Op::RowCosine, {u, v}); }
Var pairwise_cosine(Var u, Var v) { return apply_on(Op::PairwiseCosine, {u, v}); }
Var concat_rows(std::span<const Var> parts) {
  if (parts.empty() || parts.front().tape() == nullptr) {
    throw ContractError("concat_rows: needs at least one bound input");
  }
  return parts.front().tape()->apply(Op::ConcatRows, parts);
}
Var gather_rows(Var a, std::vector<std::size_t> rows) {
  return apply_on(Op::GatherRows, {a}, OpAttrs{0.0, std::move(rows)});
}
Var sum(Var a) { return apply_on(Op::Sum, {a}); }
Var mean(Var a) { return apply_on(Op::Mean, {a}); }
Var mean_rows(Var a) { return apply_on(Op::MeanRows, {a}); }
Var variance(Var a) { return apply_on(Op::Variance, {a}); }
Var add_bias(Var a, Var bias) { return apply_on(Op::AddBias, {a, bias}); }
Var transpose(Var a) { return apply_on(Op::Transpose, {a}); }

}  // namespace gfmlab::ad

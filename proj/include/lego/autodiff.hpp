// SPDX-License-Identifier: Apache-2.0
#pragma once

// Minimal reverse-mode differentiation over dense matrices.
//
// A Tape records nodes in creation order, which is also a topological order
// since parents always exist before their children. Nodes are evaluated
// eagerly when created; forward() re-evaluates after parameter values change
// and backward() accumulates adjoints from a scalar root.
//
// Piecewise ops (relu, threshold_mask, topk, bce clamping) fix their
// selection during the forward pass and route gradients through the selected
// entries only. relu'(0) = 0.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lego/error.hpp"
#include "lego/matrix.hpp"

namespace lego::autodiff {

using NodeId = std::size_t;

enum class Op {
  input,
  constant,
  matmul,
  mul,
  add,
  sub,
  scale,
  scale_by,
  transpose,
  relu,
  sigmoid,
  sum,
  sum_rows,
  variance,
  topk_select,
  threshold_mask,
  bce,
  power_stack_entry,
};

inline std::string_view op_name(Op op) {
  switch (op) {
    case Op::input: return "input";
    case Op::constant: return "constant";
    case Op::matmul: return "matmul";
    case Op::mul: return "elementwise-mul";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::scale: return "scale";
    case Op::scale_by: return "scale-by";
    case Op::transpose: return "transpose";
    case Op::relu: return "relu";
    case Op::sigmoid: return "sigmoid";
    case Op::sum: return "sum";
    case Op::sum_rows: return "sum-rows";
    case Op::variance: return "variance";
    case Op::topk_select: return "topk-select";
    case Op::threshold_mask: return "threshold-mask";
    case Op::bce: return "bce";
    case Op::power_stack_entry: return "power-stack-entry";
  }
  return "?";
}

/// Parameter node id -> adjoint.
using Gradients = std::map<NodeId, Matrix>;

class Tape {
 public:
  struct Node {
    Op op = Op::input;
    std::vector<NodeId> parents;
    Matrix value;
    Matrix grad;
    std::string name;
    bool trainable = false;
    // op payloads
    double scalar = 0.0;
    std::size_t k = 0, p = 0, q = 0;
    Matrix aux;                        // labels (bce) or stack term (power_stack_entry)
    std::vector<std::size_t> selected;  // topk indices, frozen at forward
    std::vector<std::uint8_t> active;   // relu / mask / unclamped flags, frozen at forward
  };

  NodeId parameter(Matrix value, std::string name = {}) {
    check_finite(value, "parameter " + name);
    Node n;
    n.op = Op::input;
    n.value = std::move(value);
    n.name = std::move(name);
    n.trainable = true;
    return push(std::move(n), false);
  }

  NodeId constant(Matrix value) {
    check_finite(value, "constant");
    Node n;
    n.op = Op::constant;
    n.value = std::move(value);
    return push(std::move(n), false);
  }

  /// Replaces the value of an input node. Call forward() afterwards.
  void set_value(NodeId id, Matrix value) {
    Node& n = at(id);
    if (n.op != Op::input && n.op != Op::constant) throw Error("set_value on a non-input node");
    require_same_shape(n.value, value, "set_value");
    n.value = std::move(value);
  }

  NodeId matmul(NodeId a, NodeId b) { return binary(Op::matmul, a, b); }
  NodeId mul(NodeId a, NodeId b) { return binary(Op::mul, a, b); }
  NodeId add(NodeId a, NodeId b) { return binary(Op::add, a, b); }
  NodeId sub(NodeId a, NodeId b) { return binary(Op::sub, a, b); }
  NodeId transpose(NodeId x) { return unary(Op::transpose, x); }
  NodeId relu(NodeId x) { return unary(Op::relu, x); }
  NodeId sigmoid(NodeId x) { return unary(Op::sigmoid, x); }
  NodeId sum(NodeId x) { return unary(Op::sum, x); }
  /// Adds the rows together: (r x c) -> (1 x c).
  NodeId sum_rows(NodeId x) { return unary(Op::sum_rows, x); }
  /// Population variance of all entries, as a 1x1 node.
  NodeId variance(NodeId x) { return unary(Op::variance, x); }

  NodeId scale(double s, NodeId x) {
    Node n;
    n.op = Op::scale;
    n.parents = {x};
    n.scalar = s;
    return push(std::move(n));
  }

  /// s * x where s is a 1x1 node.
  NodeId scale(NodeId s, NodeId x) { return binary(Op::scale_by, s, x); }

  /// The k largest entries of a vector node, as a 1 x k row. Ties go to the
  /// lower index.
  NodeId topk(NodeId x, std::size_t k) {
    Node n;
    n.op = Op::topk_select;
    n.parents = {x};
    n.k = k;
    return push(std::move(n));
  }

  /// x * [x >= alpha], element-wise.
  NodeId threshold_mask(NodeId x, double alpha) {
    Node n;
    n.op = Op::threshold_mask;
    n.parents = {x};
    n.scalar = alpha;
    return push(std::move(n));
  }

  /// Mean binary cross-entropy of probabilities against 0/1 labels, with
  /// probabilities clamped to [eps, 1 - eps].
  NodeId bce(NodeId probs, Matrix labels, double eps = 1e-7) {
    Node n;
    n.op = Op::bce;
    n.parents = {probs};
    n.aux = std::move(labels);
    n.scalar = eps;
    return push(std::move(n));
  }

  /// weights(p, q) * term, with term a constant matrix.
  NodeId power_stack_entry(NodeId weights, std::size_t p, std::size_t q, Matrix term) {
    Node n;
    n.op = Op::power_stack_entry;
    n.parents = {weights};
    n.p = p;
    n.q = q;
    n.aux = std::move(term);
    return push(std::move(n));
  }

  const Matrix& value(NodeId id) const { return at(id).value; }
  const Matrix& grad(NodeId id) const { return at(id).grad; }
  const Node& node(NodeId id) const { return at(id); }
  std::size_t size() const noexcept { return nodes_.size(); }

  std::vector<NodeId> parameters() const {
    std::vector<NodeId> out;
    for (NodeId i = 0; i < nodes_.size(); ++i)
      if (nodes_[i].trainable) out.push_back(i);
    return out;
  }

  /// Recomputes every ancestor of root in topological order and returns the
  /// scalar loss.
  double forward(NodeId root) {
    const auto reach = ancestors(root);
    for (NodeId i = 0; i <= root; ++i)
      if (reach[i]) evaluate(nodes_[i]);
    const Matrix& v = at(root).value;
    if (v.rows() != 1 || v.cols() != 1) throw ShapeMismatch("forward: root is " + v.shape_string() + ", not 1x1");
    return v(0, 0);
  }

  /// Adjoints of every trainable node reachable from root. Adjoints are
  /// reset first, so repeated calls give identical results.
  Gradients backward(NodeId root) {
    const Matrix& rv = at(root).value;
    if (rv.rows() != 1 || rv.cols() != 1) throw ShapeMismatch("backward: root is " + rv.shape_string() + ", not 1x1");
    const auto reach = ancestors(root);
    for (NodeId i = 0; i <= root; ++i)
      if (reach[i]) nodes_[i].grad = Matrix(nodes_[i].value.rows(), nodes_[i].value.cols());
    nodes_[root].grad(0, 0) = 1.0;
    for (NodeId i = root + 1; i-- > 0;) {
      if (!reach[i]) continue;
      propagate(nodes_[i]);
    }
    Gradients out;
    for (NodeId i = 0; i <= root; ++i) {
      if (!reach[i] || !nodes_[i].trainable) continue;
      check_finite(nodes_[i].grad, "gradient of " + (nodes_[i].name.empty() ? std::to_string(i) : nodes_[i].name));
      out.emplace(i, nodes_[i].grad);
    }
    return out;
  }

  /// Concatenated frozen selections (relu activity, masks, top-k picks, bce
  /// clamping). Two forward passes with equal signatures took the same
  /// branch everywhere.
  std::vector<std::size_t> selection_signature() const {
    std::vector<std::size_t> sig;
    for (const Node& n : nodes_) {
      sig.insert(sig.end(), n.active.begin(), n.active.end());
      sig.insert(sig.end(), n.selected.begin(), n.selected.end());
    }
    return sig;
  }

 private:
  std::vector<Node> nodes_;

  Node& at(NodeId id) {
    if (id >= nodes_.size()) throw IndexOutOfRange("unknown node " + std::to_string(id));
    return nodes_[id];
  }
  const Node& at(NodeId id) const {
    if (id >= nodes_.size()) throw IndexOutOfRange("unknown node " + std::to_string(id));
    return nodes_[id];
  }

  static void check_finite(const Matrix& m, const std::string& what) {
    if (!m.all_finite()) throw NonFinite(what);
  }

  NodeId push(Node n, bool eval = true) {
    for (NodeId p : n.parents) at(p);
    if (eval) evaluate(n);
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
  }

  NodeId unary(Op op, NodeId x) {
    Node n;
    n.op = op;
    n.parents = {x};
    return push(std::move(n));
  }

  NodeId binary(Op op, NodeId a, NodeId b) {
    Node n;
    n.op = op;
    n.parents = {a, b};
    return push(std::move(n));
  }

  std::vector<std::uint8_t> ancestors(NodeId root) const {
    at(root);
    std::vector<std::uint8_t> reach(root + 1, 0);
    reach[root] = 1;
    for (NodeId i = root + 1; i-- > 0;) {
      if (!reach[i]) continue;
      for (NodeId p : nodes_[i].parents) reach[p] = 1;
    }
    return reach;
  }

  [[noreturn]] static void shape_error(const Node& n, const Matrix& a, const Matrix* b = nullptr) {
    std::string msg = std::string(op_name(n.op)) + ": " + a.shape_string();
    if (b) msg += " vs " + b->shape_string();
    throw ShapeMismatch(msg);
  }

  static const Matrix& vector_check(const Node& n, const Matrix& x) {
    if (x.rows() != 1 && x.cols() != 1) shape_error(n, x);
    return x;
  }

  void evaluate(Node& n) {
    auto in = [&](std::size_t k) -> const Matrix& { return nodes_[n.parents[k]].value; };
    switch (n.op) {
      case Op::input:
      case Op::constant:
        return;
      case Op::matmul:
        if (in(0).cols() != in(1).rows()) shape_error(n, in(0), &in(1));
        n.value = lego::matmul(in(0), in(1));
        break;
      case Op::mul:
        if (!in(0).same_shape(in(1))) shape_error(n, in(0), &in(1));
        n.value = hadamard(in(0), in(1));
        break;
      case Op::add:
        if (!in(0).same_shape(in(1))) shape_error(n, in(0), &in(1));
        n.value = in(0) + in(1);
        break;
      case Op::sub:
        if (!in(0).same_shape(in(1))) shape_error(n, in(0), &in(1));
        n.value = in(0) - in(1);
        break;
      case Op::scale:
        n.value = n.scalar * in(0);
        break;
      case Op::scale_by:
        if (in(0).size() != 1) shape_error(n, in(0), &in(1));
        n.value = in(0)[0] * in(1);
        break;
      case Op::transpose:
        n.value = lego::transpose(in(0));
        break;
      case Op::relu: {
        const Matrix& x = in(0);
        n.value = Matrix(x.rows(), x.cols());
        n.active.assign(x.size(), 0);
        for (std::size_t k = 0; k < x.size(); ++k) {
          if (x[k] > 0.0) {
            n.value[k] = x[k];
            n.active[k] = 1;
          }
        }
        break;
      }
      case Op::sigmoid: {
        const Matrix& x = in(0);
        n.value = Matrix(x.rows(), x.cols());
        for (std::size_t k = 0; k < x.size(); ++k) n.value[k] = 1.0 / (1.0 + std::exp(-x[k]));
        break;
      }
      case Op::sum:
        n.value = Matrix::scalar(lego::sum(in(0)));
        break;
      case Op::sum_rows: {
        const Matrix& x = in(0);
        n.value = Matrix(1, x.cols());
        for (std::size_t i = 0; i < x.rows(); ++i)
          for (std::size_t j = 0; j < x.cols(); ++j) n.value(0, j) += x(i, j);
        break;
      }
      case Op::variance: {
        const Matrix& x = in(0);
        if (x.empty()) shape_error(n, x);
        const double count = static_cast<double>(x.size());
        const double mean = lego::sum(x) / count;
        double acc = 0.0;
        for (double v : x.values()) acc += (v - mean) * (v - mean);
        n.value = Matrix::scalar(acc / count);
        break;
      }
      case Op::topk_select: {
        const Matrix& x = vector_check(n, in(0));
        if (n.k == 0 || n.k > x.size()) throw KTooLarge(n.k, x.size());
        std::vector<std::size_t> order(x.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return x[l] > x[r]; });
        n.selected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n.k));
        n.value = Matrix(1, n.k);
        for (std::size_t t = 0; t < n.k; ++t) n.value[t] = x[n.selected[t]];
        break;
      }
      case Op::threshold_mask: {
        const Matrix& x = in(0);
        n.value = Matrix(x.rows(), x.cols());
        n.active.assign(x.size(), 0);
        for (std::size_t k = 0; k < x.size(); ++k) {
          if (x[k] >= n.scalar) {
            n.value[k] = x[k];
            n.active[k] = 1;
          }
        }
        break;
      }
      case Op::bce: {
        const Matrix& s = in(0);
        if (!s.same_shape(n.aux)) shape_error(n, s, &n.aux);
        const double eps = n.scalar;
        n.active.assign(s.size(), 0);
        double acc = 0.0;
        for (std::size_t k = 0; k < s.size(); ++k) {
          const double c = std::clamp(s[k], eps, 1.0 - eps);
          n.active[k] = (s[k] > eps && s[k] < 1.0 - eps) ? 1 : 0;
          const double y = n.aux[k];
          acc -= y * std::log(c) + (1.0 - y) * std::log(1.0 - c);
        }
        n.value = Matrix::scalar(acc / static_cast<double>(s.size()));
        break;
      }
      case Op::power_stack_entry: {
        const Matrix& w = in(0);
        if (n.p >= w.rows() || n.q >= w.cols()) shape_error(n, w);
        n.value = w(n.p, n.q) * n.aux;
        break;
      }
    }
    check_finite(n.value, std::string(op_name(n.op)));
  }

  void propagate(Node& n) {
    if (n.parents.empty()) return;
    const Matrix& g = n.grad;
    auto pv = [&](std::size_t k) -> const Matrix& { return nodes_[n.parents[k]].value; };
    auto pg = [&](std::size_t k) -> Matrix& { return nodes_[n.parents[k]].grad; };
    switch (n.op) {
      case Op::input:
      case Op::constant:
        return;
      case Op::matmul: {
        // Compute both contributions before accumulating, in case a == b.
        Matrix ga = lego::matmul(g, lego::transpose(pv(1)));
        Matrix gb = lego::matmul(lego::transpose(pv(0)), g);
        axpy(1.0, ga, pg(0));
        axpy(1.0, gb, pg(1));
        break;
      }
      case Op::mul: {
        Matrix ga = hadamard(g, pv(1));
        Matrix gb = hadamard(g, pv(0));
        axpy(1.0, ga, pg(0));
        axpy(1.0, gb, pg(1));
        break;
      }
      case Op::add:
        axpy(1.0, g, pg(0));
        axpy(1.0, g, pg(1));
        break;
      case Op::sub:
        axpy(1.0, g, pg(0));
        axpy(-1.0, g, pg(1));
        break;
      case Op::scale:
        axpy(n.scalar, g, pg(0));
        break;
      case Op::scale_by: {
        double ds = 0.0;
        const Matrix& x = pv(1);
        for (std::size_t k = 0; k < x.size(); ++k) ds += g[k] * x[k];
        const double s = pv(0)[0];
        axpy(s, g, pg(1));
        pg(0)[0] += ds;
        break;
      }
      case Op::transpose:
        axpy(1.0, lego::transpose(g), pg(0));
        break;
      case Op::relu:
      case Op::threshold_mask: {
        Matrix& out = pg(0);
        for (std::size_t k = 0; k < g.size(); ++k)
          if (n.active[k]) out[k] += g[k];
        break;
      }
      case Op::sigmoid: {
        Matrix& out = pg(0);
        for (std::size_t k = 0; k < g.size(); ++k) out[k] += g[k] * n.value[k] * (1.0 - n.value[k]);
        break;
      }
      case Op::sum: {
        Matrix& out = pg(0);
        for (double& v : out.values()) v += g[0];
        break;
      }
      case Op::sum_rows: {
        Matrix& out = pg(0);
        for (std::size_t i = 0; i < out.rows(); ++i)
          for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += g(0, j);
        break;
      }
      case Op::variance: {
        const Matrix& x = pv(0);
        const double count = static_cast<double>(x.size());
        const double mean = lego::sum(x) / count;
        Matrix& out = pg(0);
        for (std::size_t k = 0; k < x.size(); ++k) out[k] += g[0] * 2.0 * (x[k] - mean) / count;
        break;
      }
      case Op::topk_select: {
        Matrix& out = pg(0);
        for (std::size_t t = 0; t < n.selected.size(); ++t) out[n.selected[t]] += g[t];
        break;
      }
      case Op::bce: {
        const Matrix& s = pv(0);
        const double eps = n.scalar;
        const double count = static_cast<double>(s.size());
        Matrix& out = pg(0);
        for (std::size_t k = 0; k < s.size(); ++k) {
          if (!n.active[k]) continue;
          const double c = std::clamp(s[k], eps, 1.0 - eps);
          const double y = n.aux[k];
          out[k] += g[0] * (-(y / c) + (1.0 - y) / (1.0 - c)) / count;
        }
        break;
      }
      case Op::power_stack_entry: {
        double acc = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) acc += g[k] * n.aux[k];
        pg(0)(n.p, n.q) += acc;
        break;
      }
    }
  }
};

struct NamedTensor {
  std::string name;
  Matrix value;
};

struct GradCheckReport {
  struct Entry {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t excluded = 0;
  };
  std::vector<Entry> params;
  double max_rel_error = 0.0;
  std::size_t excluded = 0;
  bool passed = true;
};

/// Builds a scalar expression from the parameter nodes it is handed.
using ExpressionBuilder = std::function<NodeId(Tape&, std::span<const NodeId>)>;

/// Denominator floor for the relative error; gradients smaller than this are
/// effectively compared in absolute terms.
inline constexpr double kGradCheckFloor = 1e-6;

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
}

/// Compares analytic adjoints with central differences. An entry whose
/// perturbation flips any frozen selection (relu kink, mask threshold, top-k
/// boundary, bce clamp) is reported as excluded rather than compared.
inline GradCheckReport grad_check(const ExpressionBuilder& build, const std::vector<NamedTensor>& params,
                                  double step = 1e-5, double tolerance = 1e-4) {
  Tape tape;
  std::vector<NodeId> ids;
  for (const auto& p : params) ids.push_back(tape.parameter(p.value, p.name));
  const NodeId root = build(tape, ids);
  tape.forward(root);
  const auto base_sig = tape.selection_signature();
  const Gradients analytic = tape.backward(root);

  GradCheckReport report;
  for (std::size_t t = 0; t < params.size(); ++t) {
    GradCheckReport::Entry entry{params[t].name};
    const auto found = analytic.find(ids[t]);
    const Matrix zero(params[t].value.rows(), params[t].value.cols());
    const Matrix& ga = found == analytic.end() ? zero : found->second;
    Matrix probe = params[t].value;
    for (std::size_t k = 0; k < probe.size(); ++k) {
      const double orig = probe[k];
      probe[k] = orig + step;
      tape.set_value(ids[t], probe);
      const double up = tape.forward(root);
      const bool same_up = tape.selection_signature() == base_sig;
      probe[k] = orig - step;
      tape.set_value(ids[t], probe);
      const double down = tape.forward(root);
      const bool same_down = tape.selection_signature() == base_sig;
      probe[k] = orig;
      tape.set_value(ids[t], probe);
      if (!same_up || !same_down) {
        ++entry.excluded;
        continue;
      }
      const double numeric = (up - down) / (2.0 * step);
      entry.max_rel_error = std::max(entry.max_rel_error, relative_error(ga[k], numeric));
      ++entry.checked;
    }
    tape.forward(root);
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.excluded += entry.excluded;
    report.params.push_back(std::move(entry));
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace lego::autodiff

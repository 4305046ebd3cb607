// SPDX-License-Identifier: Apache-2.0
#pragma once

// Graph power stacks and the learnable graph fusion operator.
//
// A stack holds [R^0, R^1, ..., R^P] where R^0 = I and R^p is the p-th matrix
// power. Two stacks fuse into
//
//   G = sum_{p, q} A[p][q] * (Ra^p (.) Rb^q)
//
// with (.) the element-wise product. A is either a full (P+1)x(Q+1) matrix or
// the outer product of two selector vectors a and b.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <future>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lego/error.hpp"
#include "lego/graph.hpp"
#include "lego/matrix.hpp"

namespace lego {

enum class PowerNormalization { raw, row_stochastic };

inline std::string_view to_string(PowerNormalization n) {
  return n == PowerNormalization::raw ? "raw" : "row-stochastic";
}

inline PowerNormalization parse_power_normalization(std::string_view s) {
  if (s == "raw") return PowerNormalization::raw;
  if (s == "row-stochastic") return PowerNormalization::row_stochastic;
  throw DataError("unknown power normalization '" + std::string(s) + "'");
}

struct GraphPowerStack {
  std::vector<Matrix> powers;
  RelationshipGraph base;
  PowerNormalization normalization = PowerNormalization::raw;

  std::size_t size() const noexcept { return powers.size(); }
  std::size_t max_power() const noexcept { return powers.size() - 1; }
  std::size_t nodes() const noexcept { return powers.empty() ? 0 : powers.front().rows(); }
  const Matrix& operator[](std::size_t p) const { return powers.at(p); }
};

/// Scales every row to sum to 1. All-zero rows are left untouched.
inline Matrix row_normalize(const Matrix& m) {
  Matrix out = m;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto row = out.row_span(i);
    double s = 0.0;
    for (double v : row) s += v;
    if (s == 0.0) continue;
    for (double& v : row) v /= s;
  }
  return out;
}

inline GraphPowerStack expand_powers(const RelationshipGraph& graph, std::size_t max_power,
                                     PowerNormalization normalization = PowerNormalization::raw) {
  if (!graph.scores.is_square()) throw ShapeMismatch("expand_powers: graph is " + graph.scores.shape_string());
  if (!graph.scores.all_finite()) throw DataError("expand_powers: graph has non-finite entries");
  const Matrix step = normalization == PowerNormalization::row_stochastic ? row_normalize(graph.scores) : graph.scores;
  GraphPowerStack stack{{}, graph, normalization};
  stack.powers.reserve(max_power + 1);
  stack.powers.push_back(Matrix::identity(graph.nodes()));
  for (std::size_t p = 1; p <= max_power; ++p) stack.powers.push_back(matmul(stack.powers.back(), step));
  return stack;
}

enum class FusionForm { outer_product, full_matrix };

inline std::string_view to_string(FusionForm f) {
  return f == FusionForm::outer_product ? "outer-product" : "full-matrix";
}

inline FusionForm parse_fusion_form(std::string_view s) {
  if (s == "outer-product" || s == "outer") return FusionForm::outer_product;
  if (s == "full-matrix" || s == "full") return FusionForm::full_matrix;
  throw DataError("unknown fusion form '" + std::string(s) + "'");
}

/// Learnable fusion parameters: selectors (a, b) or a full matrix A.
struct FusionWeights {
  FusionForm form = FusionForm::full_matrix;
  std::vector<double> a;
  std::vector<double> b;
  Matrix A;

  static FusionWeights outer_product(std::vector<double> a, std::vector<double> b) {
    FusionWeights w{FusionForm::outer_product, std::move(a), std::move(b), {}};
    w.validate();
    return w;
  }
  static FusionWeights full_matrix(Matrix A) {
    FusionWeights w{FusionForm::full_matrix, {}, {}, std::move(A)};
    w.validate();
    return w;
  }
  /// Starting point for training: A[0][0] = A[1][1] = 1, i.e. I + Ra (.) Rb.
  static FusionWeights initial(FusionForm form, std::size_t P, std::size_t Q) {
    if (form == FusionForm::outer_product) {
      std::vector<double> a(P + 1, 0.0), b(Q + 1, 0.0);
      a[0] = 1.0;
      b[0] = 1.0;
      if (P >= 1) a[1] = 1.0;
      if (Q >= 1) b[1] = 1.0;
      return outer_product(std::move(a), std::move(b));
    }
    Matrix A(P + 1, Q + 1);
    A(0, 0) = 1.0;
    if (P >= 1 && Q >= 1) A(1, 1) = 1.0;
    return full_matrix(std::move(A));
  }

  std::size_t rows() const noexcept { return form == FusionForm::outer_product ? a.size() : A.rows(); }
  std::size_t cols() const noexcept { return form == FusionForm::outer_product ? b.size() : A.cols(); }

  double coefficient(std::size_t p, std::size_t q) const {
    return form == FusionForm::outer_product ? a[p] * b[q] : A(p, q);
  }

  /// Effective (P+1)x(Q+1) weight matrix.
  Matrix effective() const { return form == FusionForm::outer_product ? outer(a, b) : A; }

  void validate() const {
    if (form == FusionForm::outer_product) {
      if (a.empty() || b.empty()) throw DimensionMismatch("outer-product fusion needs non-empty a and b");
      for (double v : a)
        if (!std::isfinite(v)) throw DataError("fusion selector a has non-finite entries");
      for (double v : b)
        if (!std::isfinite(v)) throw DataError("fusion selector b has non-finite entries");
    } else {
      if (A.empty()) throw DimensionMismatch("full-matrix fusion needs a non-empty A");
      if (!A.all_finite()) throw DataError("fusion matrix A has non-finite entries");
    }
  }
};

struct FusedGraph {
  Matrix scores;
  std::string provenance;

  std::size_t nodes() const noexcept { return scores.rows(); }
};

struct FuseOptions {
  /// Split the (p, q) terms over worker threads. Partial sums are merged in a
  /// fixed order; results may differ from the serial path by reassociation
  /// only (well under 1e-12 for graphs in [0, 1]).
  bool parallel = false;
  std::size_t threads = 4;
};

namespace detail {

inline void check_fusion_shapes(const GraphPowerStack& sa, const GraphPowerStack& sb, const FusionWeights& w) {
  if (sa.size() == 0 || sb.size() == 0) throw DimensionMismatch("fuse: empty power stack");
  if (sa.nodes() != sb.nodes())
    throw DimensionMismatch("fuse: node axis differs (" + std::to_string(sa.nodes()) + " vs " +
                            std::to_string(sb.nodes()) + ")");
  if (w.rows() != sa.size())
    throw DimensionMismatch("fuse: weight rows " + std::to_string(w.rows()) + " != stack_a length " +
                            std::to_string(sa.size()));
  if (w.cols() != sb.size())
    throw DimensionMismatch("fuse: weight cols " + std::to_string(w.cols()) + " != stack_b length " +
                            std::to_string(sb.size()));
  w.validate();
}

// Accumulates terms with flat index in [begin, end), flat = p * (Q+1) + q.
inline Matrix fuse_terms(const GraphPowerStack& sa, const GraphPowerStack& sb, const FusionWeights& w,
                         std::size_t begin, std::size_t end) {
  const std::size_t n = sa.nodes();
  const std::size_t qn = sb.size();
  Matrix out(n, n);
  for (std::size_t t = begin; t < end; ++t) {
    const std::size_t p = t / qn, q = t % qn;
    const double c = w.coefficient(p, q);
    const Matrix& ra = sa.powers[p];
    const Matrix& rb = sb.powers[q];
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += c * (ra[k] * rb[k]);
  }
  return out;
}

}  // namespace detail

inline FusedGraph fuse(const GraphPowerStack& sa, const GraphPowerStack& sb, const FusionWeights& w,
                       const FuseOptions& opt = {}) {
  detail::check_fusion_shapes(sa, sb, w);
  const std::size_t terms = sa.size() * sb.size();
  FusedGraph out;
  out.provenance = "stack_a(P=" + std::to_string(sa.max_power()) + "," + std::string(to_string(sa.normalization)) +
                   ") x stack_b(Q=" + std::to_string(sb.max_power()) + "," +
                   std::string(to_string(sb.normalization)) + ") via " + std::string(to_string(w.form));
  if (!opt.parallel || opt.threads < 2 || terms < 2) {
    out.scores = detail::fuse_terms(sa, sb, w, 0, terms);
    return out;
  }
  const std::size_t workers = std::min(opt.threads, terms);
  std::vector<std::future<Matrix>> parts;
  for (std::size_t t = 0; t < workers; ++t) {
    const std::size_t begin = terms * t / workers, end = terms * (t + 1) / workers;
    parts.push_back(std::async(std::launch::async, [&, begin, end] { return detail::fuse_terms(sa, sb, w, begin, end); }));
  }
  out.scores = Matrix(sa.nodes(), sa.nodes());
  for (auto& f : parts) axpy(1.0, f.get(), out.scores);
  return out;
}

/// Scalar polynomial sum_{p,q} A[p][q] * sa^p * sb^q evaluated at one (i, j)
/// entry of two relationship graphs, with 0^0 = 1. Independent of the matrix
/// power path; it agrees with fuse() only where element-wise and matrix
/// powers coincide.
inline double multilinear_oracle(const RelationshipGraph& ga, const RelationshipGraph& gb, const Matrix& A,
                                 std::size_t i, std::size_t j) {
  if (i >= ga.nodes() || j >= ga.nodes() || i >= gb.nodes() || j >= gb.nodes())
    throw IndexOutOfRange("multilinear_oracle: index (" + std::to_string(i) + ", " + std::to_string(j) +
                          ") out of range");
  if (!A.all_finite()) throw DataError("multilinear_oracle: A has non-finite entries");
  const double sa = ga.scores(i, j);
  const double sb = gb.scores(i, j);
  double total = 0.0;
  for (std::size_t p = 0; p < A.rows(); ++p) {
    for (std::size_t q = 0; q < A.cols(); ++q) {
      const double pa = p == 0 ? 1.0 : std::pow(sa, static_cast<double>(p));
      const double pb = q == 0 ? 1.0 : std::pow(sb, static_cast<double>(q));
      total += A(p, q) * pa * pb;
    }
  }
  return total;
}

/// max |fuse(outer(a, b)) - fuse(full(a x b))| over all entries.
inline double outer_equivalence_check(const GraphPowerStack& sa, const GraphPowerStack& sb,
                                      std::span<const double> a, std::span<const double> b) {
  const auto wo = FusionWeights::outer_product({a.begin(), a.end()}, {b.begin(), b.end()});
  const auto wf = FusionWeights::full_matrix(outer(a, b));
  return max_abs_diff(fuse(sa, sb, wo).scores, fuse(sa, sb, wf).scores);
}

}  // namespace lego

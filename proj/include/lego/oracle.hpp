// SPDX-License-Identifier: Apache-2.0
#pragma once

// Brute-force reference implementations used by the self-checks: naive
// matrix powers, the four-loop fusion sum, and a gradient check of the full
// training loss on small toy bags.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "lego/autodiff.hpp"
#include "lego/fusion.hpp"
#include "lego/graph.hpp"
#include "lego/matrix.hpp"
#include "lego/model.hpp"

namespace lego::oracle {

/// R^p by repeated triple loops, R^0 = I.
inline Matrix naive_power(const Matrix& r, std::size_t p) {
  const std::size_t n = r.rows();
  Matrix out = Matrix::identity(n);
  for (std::size_t s = 0; s < p; ++s) {
    Matrix next(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) acc += out(i, k) * r(k, j);
        next(i, j) = acc;
      }
    out = next;
  }
  return out;
}

/// G[i][j] = sum_p sum_q A[p][q] * (Ra^p)[i][j] * (Rb^q)[i][j].
inline Matrix naive_fuse(const Matrix& ra, const Matrix& rb, const Matrix& A) {
  const std::size_t n = ra.rows();
  std::vector<Matrix> pa, pb;
  for (std::size_t p = 0; p < A.rows(); ++p) pa.push_back(naive_power(ra, p));
  for (std::size_t q = 0; q < A.cols(); ++q) pb.push_back(naive_power(rb, q));
  Matrix g(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < A.rows(); ++p)
        for (std::size_t q = 0; q < A.cols(); ++q) g(i, j) += A(p, q) * pa[p](i, j) * pb[q](i, j);
  return g;
}

/// Symmetric matrix with unit diagonal and off-diagonal entries in [0, 1].
template <class Rng>
Matrix random_graph(std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) m(i, j) = m(j, i) = u(rng);
  }
  return m;
}

template <class Rng>
Matrix random_weights(std::size_t rows, std::size_t cols, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = u(rng);
  return m;
}

struct FuseCheck {
  double max_deviation = 0.0;
  std::size_t trials = 0;
};

/// fuse() against naive_fuse on random instances of a fixed shape.
inline FuseCheck fuse_check(std::size_t n, std::size_t P, std::size_t Q, std::size_t trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  FuseCheck out;
  for (std::size_t t = 0; t < trials; ++t) {
    const Matrix ra = random_graph(n, rng), rb = random_graph(n, rng);
    const Matrix A = random_weights(P + 1, Q + 1, rng);
    const auto fast = fuse(expand_powers(make_graph(ra), P), expand_powers(make_graph(rb), Q), FusionWeights::full_matrix(A));
    out.max_deviation = std::max(out.max_deviation, max_abs_diff(fast.scores, naive_fuse(ra, rb, A)));
    ++out.trials;
  }
  return out;
}

/// One abnormal and one normal toy bag: random features in d dimensions,
/// clamped-cosine graphs, raw powers up to max(P, Q).
struct ToyBags {
  std::vector<Matrix> pos_a, pos_b, neg_a, neg_b;
  std::vector<int> pos_labels, neg_labels;
};

template <class Rng>
ToyBags make_toy_bags(std::size_t n, std::size_t P, std::size_t Q, Rng& rng, std::size_t d = 3) {
  std::normal_distribution<double> g(0.0, 1.0);
  auto stack = [&](std::size_t max_power) {
    Matrix f(n, d);
    for (double& v : f.values()) v = g(rng);
    return expand_powers(relationship_graph(FeatureSet("toy", f)), max_power).powers;
  };
  ToyBags b{stack(P), stack(Q), stack(P), stack(Q), std::vector<int>(n, 0), std::vector<int>(n, 0)};
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  b.pos_labels[pick(rng)] = 1;
  return b;
}

/// Gradient check of mean BCE over both bags plus the degree-variance term,
/// with respect to A, W1, b1, W2 and b2.
inline autodiff::GradCheckReport toy_grad_check(const ToyBags& bags, const Matrix& A, const ClassifierParams& cls,
                                                const RegularizerConfig& reg, double step = 1e-5,
                                                double tolerance = 1e-4) {
  const auto build = [&](autodiff::Tape& t, std::span<const autodiff::NodeId> ids) {
    const graph_ops::ClassifierNodes c{ids[1], ids[2], ids[3], ids[4]};
    const auto gp = graph_ops::fused_graph(t, ids[0], bags.pos_a, bags.pos_b);
    const auto gn = graph_ops::fused_graph(t, ids[0], bags.neg_a, bags.neg_b);
    const std::vector<autodiff::NodeId> graphs{gp, gn};
    const std::vector<std::vector<int>> labels{bags.pos_labels, bags.neg_labels};
    return t.add(graph_ops::mean_bce(t, graphs, labels, c), graph_ops::degree_variance_loss(t, gp, gn, reg));
  };
  return autodiff::grad_check(build,
                              {{"A", A},
                               {"W1", cls.W1},
                               {"b1", Matrix::row(cls.b1)},
                               {"W2", Matrix::column(cls.W2)},
                               {"b2", Matrix::scalar(cls.b2)}},
                              step, tolerance);
}

struct GradSweep {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t excluded = 0;
  bool passed = true;
};

/// toy_grad_check over `cases` seeded toy bag pairs.
inline GradSweep grad_sweep(std::size_t cases, std::size_t n, std::size_t P, std::size_t Q, const RegularizerConfig& reg,
                            std::uint64_t seed, double tolerance = 1e-4) {
  std::mt19937_64 rng(seed);
  GradSweep out;
  for (std::size_t c = 0; c < cases; ++c) {
    const ToyBags bags = make_toy_bags(n, P, Q, rng);
    const Matrix A = random_weights(P + 1, Q + 1, rng);
    const ClassifierParams cls = ClassifierParams::uniform(n, rng);
    const auto rep = toy_grad_check(bags, A, cls, reg, 1e-5, tolerance);
    out.max_rel_error = std::max(out.max_rel_error, rep.max_rel_error);
    for (const auto& p : rep.params) out.checked += p.checked;
    out.excluded += rep.excluded;
    out.passed = out.passed && rep.passed;
  }
  return out;
}

}  // namespace lego::oracle

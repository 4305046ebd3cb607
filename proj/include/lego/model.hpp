// SPDX-License-Identifier: Apache-2.0
#pragma once

// Anomaly scoring head on a fused graph plus the degree variance regularizer.
//
// Each node i is scored from its row g_i of the fused graph:
//   score_i = sigmoid(W2 . relu(W1 g_i + b1) + b2)
//
// The regularizer compares degree variances of a normal and an abnormal bag:
//   deg_j = sum_i G[i][j] * [G[i][j] >= alpha]
//   loss  = lambda * (Var(deg(G_neg)) - Var(topk(deg(G_pos))))^2
// with population variance and ties in top-k going to the lower node index.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lego/autodiff.hpp"
#include "lego/error.hpp"
#include "lego/fusion.hpp"
#include "lego/matrix.hpp"

namespace lego {

/// Probabilities are clamped to [kScoreClamp, 1 - kScoreClamp] inside the BCE.
inline constexpr double kScoreClamp = 1e-7;

struct ClassifierParams {
  Matrix W1;              // N x N
  std::vector<double> b1;  // N
  std::vector<double> W2;  // N
  double b2 = 0.0;

  std::size_t nodes() const noexcept { return W1.rows(); }

  static ClassifierParams zeros(std::size_t n) { return {Matrix(n, n), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0.0}; }

  /// Weights and biases uniform in [-1/sqrt(N), 1/sqrt(N)].
  template <class Rng>
  static ClassifierParams uniform(std::size_t n, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(n));
    std::uniform_real_distribution<double> u(-bound, bound);
    ClassifierParams c = zeros(n);
    for (double& v : c.W1.values()) v = u(rng);
    for (double& v : c.b1) v = u(rng);
    for (double& v : c.W2) v = u(rng);
    c.b2 = u(rng);
    return c;
  }

  void validate() const {
    const std::size_t n = W1.rows();
    if (n == 0 || !W1.is_square() || b1.size() != n || W2.size() != n)
      throw ShapeMismatch("classifier params: W1 " + W1.shape_string() + ", b1 " + std::to_string(b1.size()) +
                          ", W2 " + std::to_string(W2.size()));
    if (!W1.all_finite() || !std::isfinite(b2) ||
        !std::all_of(b1.begin(), b1.end(), [](double v) { return std::isfinite(v); }) ||
        !std::all_of(W2.begin(), W2.end(), [](double v) { return std::isfinite(v); }))
      throw DataError("classifier params have non-finite entries");
  }
};

struct RegularizerConfig {
  double lambda = 1.0;
  double alpha = 0.5;
  std::size_t k = 10;

  RegularizerConfig() = default;
  RegularizerConfig(double lambda_, double alpha_, std::size_t k_, std::optional<std::size_t> nodes = std::nullopt)
      : lambda(lambda_), alpha(alpha_), k(k_) {
    validate(nodes);
  }

  void validate(std::optional<std::size_t> nodes = std::nullopt) const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DataError("regularizer lambda must be >= 0");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw DataError("regularizer alpha must lie in [0, 1]");
    if (k == 0) throw DataError("regularizer k must be positive");
    if (nodes && k > *nodes) throw KTooLarge(k, *nodes);
  }
};

struct BagScore {
  std::vector<double> per_node_scores;
  int bag_label = 0;
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline std::vector<double> score_nodes(const Matrix& G, const ClassifierParams& params) {
  params.validate();
  const std::size_t n = params.nodes();
  if (G.rows() != n || G.cols() != n)
    throw ShapeMismatch("score_nodes: graph " + G.shape_string() + " vs classifier N=" + std::to_string(n));
  std::vector<double> scores(n);
  std::vector<double> hidden(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t h = 0; h < n; ++h) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += params.W1(h, j) * G(i, j);
      hidden[h] = std::max(0.0, acc + params.b1[h]);
    }
    double logit = 0.0;
    for (std::size_t h = 0; h < n; ++h) logit += params.W2[h] * hidden[h];
    scores[i] = sigmoid(logit + params.b2);
  }
  return scores;
}

inline std::vector<double> score_nodes(const FusedGraph& G, const ClassifierParams& params) {
  return score_nodes(G.scores, params);
}

/// Column sums over entries that pass the alpha cut-off.
inline std::vector<double> weighted_degrees(const Matrix& G, double alpha) {
  if (!G.is_square()) throw ShapeMismatch("weighted_degrees: graph is " + G.shape_string());
  std::vector<double> deg(G.cols(), 0.0);
  for (std::size_t i = 0; i < G.rows(); ++i)
    for (std::size_t j = 0; j < G.cols(); ++j)
      if (G(i, j) >= alpha) deg[j] += G(i, j);
  return deg;
}

inline double population_variance(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return acc / static_cast<double>(v.size());
}

/// The k largest values; ties resolved toward the lower index.
inline std::vector<double> top_k(std::span<const double> v, std::size_t k) {
  if (k > v.size()) throw KTooLarge(k, v.size());
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  std::vector<double> out(k);
  for (std::size_t t = 0; t < k; ++t) out[t] = v[order[t]];
  return out;
}

inline double degree_variance_loss(const Matrix& G_pos, const Matrix& G_neg, const RegularizerConfig& cfg) {
  if (!G_pos.is_square() || !G_neg.is_square() || G_pos.rows() != G_neg.rows())
    throw ShapeMismatch("degree_variance_loss: " + G_pos.shape_string() + " vs " + G_neg.shape_string());
  cfg.validate(G_pos.rows());
  if (cfg.lambda == 0.0) return 0.0;
  const double v_neg = population_variance(weighted_degrees(G_neg, cfg.alpha));
  const double v_pos = population_variance(top_k(weighted_degrees(G_pos, cfg.alpha), cfg.k));
  const double d = v_neg - v_pos;
  return cfg.lambda * d * d;
}

/// A fused graph with per-node 0/1 labels.
struct LabeledGraph {
  Matrix graph;
  std::vector<int> labels;

  bool abnormal() const { return std::any_of(labels.begin(), labels.end(), [](int l) { return l != 0; }); }
};

struct RegularizerPair {
  std::size_t abnormal = 0;
  std::size_t normal = 0;
};

/// Uniformly picks one abnormal and one normal bag. A bag is abnormal when it
/// contains any abnormal node.
template <class Rng>
RegularizerPair sample_regularizer_pair(std::span<const LabeledGraph> bags, Rng& rng) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t b = 0; b < bags.size(); ++b) (bags[b].abnormal() ? pos : neg).push_back(b);
  if (pos.empty() || neg.empty())
    throw MissingPolarity("regularizer needs one abnormal and one normal bag (have " + std::to_string(pos.size()) +
                          " abnormal, " + std::to_string(neg.size()) + " normal)");
  std::uniform_int_distribution<std::size_t> pick_pos(0, pos.size() - 1), pick_neg(0, neg.size() - 1);
  const std::size_t a = pos[pick_pos(rng)];
  const std::size_t n = neg[pick_neg(rng)];
  return {a, n};
}

inline double bce_term(double score, int label) {
  const double c = std::clamp(score, kScoreClamp, 1.0 - kScoreClamp);
  return label ? -std::log(c) : -std::log(1.0 - c);
}

/// Mean per-node BCE over all bags, plus the regularizer on `pair` when
/// lambda > 0.
inline double total_loss(std::span<const LabeledGraph> bags, const ClassifierParams& params,
                         const RegularizerConfig& cfg, std::optional<RegularizerPair> pair = std::nullopt) {
  if (bags.empty()) throw DataError("total_loss: no bags");
  double bce = 0.0;
  std::size_t count = 0;
  for (const auto& bag : bags) {
    const auto scores = score_nodes(bag.graph, params);
    if (bag.labels.size() != scores.size())
      throw ShapeMismatch("total_loss: " + std::to_string(bag.labels.size()) + " labels for " +
                          std::to_string(scores.size()) + " nodes");
    for (std::size_t i = 0; i < scores.size(); ++i) bce += bce_term(scores[i], bag.labels[i]);
    count += scores.size();
  }
  double loss = bce / static_cast<double>(count);
  if (cfg.lambda > 0.0) {
    if (!pair) {
      std::optional<std::size_t> a, n;
      for (std::size_t b = 0; b < bags.size(); ++b) {
        if (bags[b].abnormal()) {
          if (!a) a = b;
        } else if (!n) {
          n = b;
        }
      }
      if (!a || !n) throw MissingPolarity("total_loss: lambda > 0 but the bags lack a normal or an abnormal bag");
      pair = RegularizerPair{*a, *n};
    }
    if (pair->abnormal >= bags.size() || pair->normal >= bags.size())
      throw IndexOutOfRange("total_loss: regularizer pair out of range");
    loss += degree_variance_loss(bags[pair->abnormal].graph, bags[pair->normal].graph, cfg);
  }
  return loss;
}

// Tape builders used for training and gradient checks.
namespace graph_ops {

using autodiff::NodeId;
using autodiff::Tape;

struct ClassifierNodes {
  NodeId W1, b1, W2, b2;  // N x N, 1 x N, N x 1, 1 x 1
};

inline ClassifierNodes add_classifier(Tape& tape, const ClassifierParams& p) {
  return {tape.parameter(p.W1, "W1"), tape.parameter(Matrix::row(p.b1), "b1"), tape.parameter(Matrix::column(p.W2), "W2"),
          tape.parameter(Matrix::scalar(p.b2), "b2")};
}

inline ClassifierParams read_classifier(const Tape& tape, const ClassifierNodes& c) {
  ClassifierParams p;
  p.W1 = tape.value(c.W1);
  const auto b1 = tape.value(c.b1).values();
  p.b1.assign(b1.begin(), b1.end());
  const auto w2 = tape.value(c.W2).values();
  p.W2.assign(w2.begin(), w2.end());
  p.b2 = tape.value(c.b2)(0, 0);
  return p;
}

/// N x 1 node of per-node probabilities.
inline NodeId scores(Tape& tape, NodeId G, const ClassifierNodes& c, NodeId ones) {
  const NodeId pre = tape.add(tape.matmul(G, tape.transpose(c.W1)), tape.matmul(ones, c.b1));
  const NodeId hidden = tape.relu(pre);
  const NodeId logits = tape.add(tape.matmul(hidden, c.W2), tape.matmul(ones, c.b2));
  return tape.sigmoid(logits);
}

/// Fused graph from a (P+1)x(Q+1) weight node and two constant power
/// sequences [R^0 .. R^P] and [R^0 .. R^Q].
inline NodeId fused_graph(Tape& tape, NodeId weights, std::span<const Matrix> powers_a,
                          std::span<const Matrix> powers_b) {
  if (powers_a.empty() || powers_b.empty()) throw DimensionMismatch("fused_graph: empty power stack");
  std::optional<NodeId> acc;
  for (std::size_t p = 0; p < powers_a.size(); ++p) {
    for (std::size_t q = 0; q < powers_b.size(); ++q) {
      const NodeId term = tape.power_stack_entry(weights, p, q, hadamard(powers_a[p], powers_b[q]));
      acc = acc ? tape.add(*acc, term) : term;
    }
  }
  return *acc;
}

/// Weight node for outer-product selectors: a is (P+1) x 1, b is (Q+1) x 1.
inline NodeId outer_weights(Tape& tape, NodeId a, NodeId b) { return tape.matmul(a, tape.transpose(b)); }

inline NodeId degree_variance_loss(Tape& tape, NodeId G_pos, NodeId G_neg, const RegularizerConfig& cfg) {
  const NodeId deg_neg = tape.sum_rows(tape.threshold_mask(G_neg, cfg.alpha));
  const NodeId deg_pos = tape.sum_rows(tape.threshold_mask(G_pos, cfg.alpha));
  const NodeId diff = tape.sub(tape.variance(deg_neg), tape.variance(tape.topk(deg_pos, cfg.k)));
  return tape.scale(cfg.lambda, tape.mul(diff, diff));
}

inline Matrix label_column(std::span<const int> labels) {
  Matrix m(labels.size(), 1);
  for (std::size_t i = 0; i < labels.size(); ++i) m(i, 0) = labels[i] ? 1.0 : 0.0;
  return m;
}

/// Mean per-node BCE over the given (graph node, labels) bags; every bag must
/// have the same node count.
inline NodeId mean_bce(Tape& tape, std::span<const NodeId> graphs, std::span<const std::vector<int>> labels,
                       const ClassifierNodes& c) {
  if (graphs.empty() || graphs.size() != labels.size()) throw DataError("mean_bce: bag/label count mismatch");
  const std::size_t n = tape.value(graphs.front()).rows();
  const NodeId ones = tape.constant(Matrix(n, 1, 1.0));
  std::optional<NodeId> acc;
  for (std::size_t b = 0; b < graphs.size(); ++b) {
    const NodeId term = tape.bce(scores(tape, graphs[b], c, ones), label_column(labels[b]), kScoreClamp);
    acc = acc ? tape.add(*acc, term) : term;
  }
  return tape.scale(1.0 / static_cast<double>(graphs.size()), *acc);
}

}  // namespace graph_ops

}  // namespace lego

// SPDX-License-Identifier: Apache-2.0
#pragma once

// Relationship graphs built from unit-level feature matrices.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "lego/error.hpp"
#include "lego/matrix.hpp"

namespace lego {

/// N x d features of one modality. Rows are units (snippets, tokens, ...).
class FeatureSet {
 public:
  static constexpr double kNormTolerance = 1e-9;

  FeatureSet() = default;
  FeatureSet(std::string modality_id, Matrix features, bool normalized = false)
      : modality_id_(std::move(modality_id)), features_(std::move(features)), normalized_(normalized) {
    if (features_.rows() == 0 || features_.cols() == 0)
      throw DataError("feature set '" + modality_id_ + "' must have at least one row and one column");
    if (!features_.all_finite()) throw DataError("feature set '" + modality_id_ + "' has non-finite entries");
    if (normalized_) {
      for (std::size_t i = 0; i < features_.rows(); ++i) {
        double sq = 0.0;
        for (double v : features_.row_span(i)) sq += v * v;
        if (std::abs(std::sqrt(sq) - 1.0) > kNormTolerance)
          throw NotNormalized("row " + std::to_string(i) + " of '" + modality_id_ + "' is not unit norm");
      }
    }
  }

  const std::string& modality_id() const noexcept { return modality_id_; }
  const Matrix& features() const noexcept { return features_; }
  bool normalized() const noexcept { return normalized_; }
  std::size_t units() const noexcept { return features_.rows(); }
  std::size_t dims() const noexcept { return features_.cols(); }

 private:
  std::string modality_id_;
  Matrix features_;
  bool normalized_ = false;
};

enum class RelationKind { cosine, clamped_cosine, gaussian };

/// Relationship-function identifier. `gamma` only applies to the gaussian kernel.
struct Relation {
  RelationKind kind = RelationKind::clamped_cosine;
  double gamma = 1.0;

  friend bool operator==(const Relation&, const Relation&) = default;
};

inline std::string_view to_string(RelationKind k) {
  switch (k) {
    case RelationKind::cosine: return "cosine";
    case RelationKind::clamped_cosine: return "clamped-cosine";
    case RelationKind::gaussian: return "gaussian";
  }
  return "?";
}

inline RelationKind parse_relation_kind(std::string_view s) {
  if (s == "cosine") return RelationKind::cosine;
  if (s == "clamped-cosine") return RelationKind::clamped_cosine;
  if (s == "gaussian") return RelationKind::gaussian;
  throw DataError("unknown relationship kind '" + std::string(s) + "'");
}

struct ValueRange {
  double lo = 0.0;
  double hi = 1.0;
  bool contains(double v) const noexcept { return v >= lo && v <= hi; }
};

inline ValueRange value_range(const Relation& r) {
  if (r.kind == RelationKind::cosine) return {-1.0, 1.0};
  return {0.0, 1.0};
}

/// Score a unit has with itself. All supported kinds give 1.
inline double self_score(const Relation&) { return 1.0; }

struct RelationshipGraph {
  Matrix scores;
  Relation kind;
  ValueRange range;

  std::size_t nodes() const noexcept { return scores.rows(); }
};

inline FeatureSet normalize_rows(const FeatureSet& in) {
  Matrix out = in.features();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto row = out.row_span(i);
    double sq = 0.0;
    for (double v : row) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm < 1e-12) throw ZeroRow(i);
    for (double& v : row) v /= norm;
  }
  return FeatureSet(in.modality_id(), std::move(out), true);
}

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) throw ZeroVector();
  // Products are formed symmetrically so r(u, v) and r(v, u) agree bit for bit.
  const double c = dot(a, b) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

}  // namespace detail

/// Pairwise relationship score between two unit-level features.
inline double relationship(std::span<const double> fi, std::span<const double> fj, const Relation& r) {
  if (fi.size() != fj.size())
    throw DimensionMismatch("relationship: dims " + std::to_string(fi.size()) + " vs " + std::to_string(fj.size()));
  switch (r.kind) {
    case RelationKind::cosine: return detail::cosine(fi, fj);
    case RelationKind::clamped_cosine: return std::max(0.0, detail::cosine(fi, fj));
    case RelationKind::gaussian: {
      if (!(r.gamma > 0.0)) throw DataError("gaussian relationship needs gamma > 0");
      double sq = 0.0;
      for (std::size_t k = 0; k < fi.size(); ++k) {
        const double d = fi[k] - fj[k];
        sq += d * d;
      }
      return std::exp(-r.gamma * sq);
    }
  }
  throw DataError("unknown relationship kind");
}

/// Adjacency matrix of pairwise scores. Upper triangle computed, lower mirrored,
/// diagonal assigned the exact self-score.
inline RelationshipGraph build_graph(const FeatureSet& fs, const Relation& r) {
  const Matrix& f = fs.features();
  const std::size_t n = f.rows();
  RelationshipGraph g{Matrix(n, n), r, value_range(r)};
  for (std::size_t i = 0; i < n; ++i) {
    g.scores(i, i) = self_score(r);
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      try {
        s = relationship(f.row_span(i), f.row_span(j), r);
      } catch (const ZeroVector&) {
        throw ZeroVector("zero vector in relationship(" + std::to_string(i) + ", " + std::to_string(j) + ")");
      } catch (const DimensionMismatch& e) {
        throw DimensionMismatch("pair (" + std::to_string(i) + ", " + std::to_string(j) + "): " + e.what());
      }
      g.scores(i, j) = s;
      g.scores(j, i) = s;
    }
  }
  return g;
}

struct GraphOptions {
  Relation relation;
  bool normalize = true;
};

/// build_graph with the default preprocessing (row L2 normalization unless disabled).
inline RelationshipGraph relationship_graph(const FeatureSet& fs, const GraphOptions& opt = {}) {
  if (opt.normalize && !fs.normalized()) return build_graph(normalize_rows(fs), opt.relation);
  return build_graph(fs, opt.relation);
}

/// Wraps an already computed score matrix, checking the graph invariants.
inline RelationshipGraph make_graph(Matrix scores, const Relation& r = {}, double sym_tol = 1e-9) {
  if (!scores.is_square()) throw ShapeMismatch("graph must be square, got " + scores.shape_string());
  if (!scores.all_finite()) throw DataError("graph has non-finite entries");
  if (max_asymmetry(scores) > sym_tol) throw DataError("graph is not symmetric");
  const ValueRange range = value_range(r);
  for (double v : scores.values())
    if (!range.contains(v)) throw DataError("graph entry " + std::to_string(v) + " outside declared range");
  return RelationshipGraph{std::move(scores), r, range};
}

/// ||x - y||^2 - (2 - 2 cos(x, y)) for unit vectors; zero up to rounding.
inline double distance_similarity_residual(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionMismatch("residual: vectors differ in dimension");
  const double nx = std::sqrt(detail::dot(x, x));
  const double ny = std::sqrt(detail::dot(y, y));
  if (std::abs(nx - 1.0) > FeatureSet::kNormTolerance || std::abs(ny - 1.0) > FeatureSet::kNormTolerance)
    throw NotNormalized("distance_similarity_residual expects unit vectors");
  double dist = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = x[k] - y[k];
    dist += d * d;
  }
  return dist - (2.0 - 2.0 * detail::cosine(x, y));
}

}  // namespace lego

// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "lego/graph.hpp"
#include "test_util.hpp"

using namespace lego;

namespace {

double scalar_cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  return ab / std::sqrt(aa * bb);
}

const Relation kCosine{RelationKind::cosine};
const Relation kClamped{RelationKind::clamped_cosine};

}  // namespace

TEST(NormalizeRows, Examples) {
  const auto n = normalize_rows(FeatureSet("m", Matrix{{3, 4}, {1, 0}}));
  EXPECT_NEAR(n.features()(0, 0), 0.6, 1e-15);
  EXPECT_NEAR(n.features()(0, 1), 0.8, 1e-15);
  EXPECT_EQ(n.features()(1, 0), 1.0);
  EXPECT_TRUE(n.normalized());
}

TEST(NormalizeRows, ZeroRowReportsIndex) {
  try {
    normalize_rows(FeatureSet("m", Matrix{{1, 1}, {0, 0}}));
    FAIL();
  } catch (const ZeroRow& e) {
    EXPECT_EQ(e.row(), 1u);
  }
}

TEST(FeatureSet, Validation) {
  EXPECT_THROW(FeatureSet("m", Matrix(0, 3)), DataError);
  EXPECT_THROW(FeatureSet("m", Matrix{{std::nan(""), 1}}), DataError);
  EXPECT_THROW(FeatureSet("m", Matrix{{1, 1}}, true), NotNormalized);
}

TEST(Relationship, Examples) {
  const std::vector<double> x{1, 0}, y{-1, 0}, o{0, 0}, l{1, 1};
  EXPECT_EQ(relationship(x, x, kCosine), 1.0);
  EXPECT_EQ(relationship(x, y, kClamped), 0.0);
  EXPECT_EQ(relationship(x, y, kCosine), -1.0);
  EXPECT_NEAR(relationship(o, l, {RelationKind::gaussian, 1.0}), std::exp(-2.0), 1e-15);
  EXPECT_THROW(relationship(x, o, kCosine), ZeroVector);
  EXPECT_THROW(relationship(x, std::vector<double>{1, 0, 0}, kCosine), DimensionMismatch);
}

TEST(RelationKind, RoundTrip) {
  for (auto k : {RelationKind::cosine, RelationKind::clamped_cosine, RelationKind::gaussian})
    EXPECT_EQ(parse_relation_kind(to_string(k)), k);
  EXPECT_THROW(parse_relation_kind("dot"), DataError);
}

TEST(BuildGraph, Examples) {
  const auto same = build_graph(FeatureSet("m", Matrix{{0.6, 0.8}, {0.6, 0.8}}), kClamped);
  EXPECT_EQ(same.scores, Matrix(2, 2, 1.0));
  const auto orth = build_graph(FeatureSet("m", Matrix{{1, 0}, {0, 1}}), kClamped);
  EXPECT_EQ(orth.scores, Matrix::identity(2));
}

TEST(BuildGraph, MatchesScalarLoop) {
  test::Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng() % 8, d = 1 + rng() % 6;
    const Matrix f = test::gaussian_matrix(n, d, rng);
    const auto g = build_graph(FeatureSet("m", f), kCosine);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double want = i == j ? 1.0 : scalar_cosine(f.row_span(i), f.row_span(j));
        EXPECT_NEAR(g.scores(i, j), want, 1e-12);
      }
  }
}

TEST(BuildGraph, InvariantsUnderRandomInputs) {
  test::Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng() % 10, d = 1 + rng() % 8;
    const FeatureSet fs("m", test::gaussian_matrix(n, d, rng));
    for (auto kind : {RelationKind::cosine, RelationKind::clamped_cosine, RelationKind::gaussian}) {
      const auto g = relationship_graph(fs, {{kind, 0.7}, true});
      EXPECT_TRUE(g.scores.is_square());
      EXPECT_EQ(max_asymmetry(g.scores), 0.0);
      for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(g.scores(i, i), 1.0);
      for (double v : g.scores.values()) {
        EXPECT_TRUE(g.range.contains(v));
        if (kind == RelationKind::clamped_cosine) {
          EXPECT_TRUE(v >= 0.0 && v <= 1.0);
        }
        if (kind == RelationKind::gaussian) {
          EXPECT_TRUE(v > 0.0 && v <= 1.0);
        }
        if (kind == RelationKind::cosine) {
          EXPECT_TRUE(v >= -1.0 && v <= 1.0);
        }
      }
    }
  }
}

TEST(BuildGraph, ZeroFeatureRow) {
  EXPECT_THROW(build_graph(FeatureSet("m", Matrix{{1, 0}, {0, 0}}), kCosine), ZeroVector);
  EXPECT_THROW(relationship_graph(FeatureSet("m", Matrix{{1, 0}, {0, 0}})), ZeroRow);
}

TEST(MakeGraph, RejectsBadMatrices) {
  EXPECT_THROW(make_graph(Matrix(2, 3)), ShapeMismatch);
  EXPECT_THROW(make_graph(Matrix{{1, 0.2}, {0.3, 1}}), DataError);
  EXPECT_THROW(make_graph(Matrix{{1, 2}, {2, 1}}), DataError);
  EXPECT_NO_THROW(make_graph(Matrix{{1, -0.5}, {-0.5, 1}}, kCosine));
}

TEST(DistanceSimilarity, Examples) {
  const std::vector<double> x{1, 0}, y{0, 1};
  EXPECT_EQ(distance_similarity_residual(x, x), 0.0);
  EXPECT_NEAR(distance_similarity_residual(x, y), 0.0, 1e-15);
  EXPECT_THROW(distance_similarity_residual(std::vector<double>{2, 0}, x), NotNormalized);
}

TEST(DistanceSimilarity, RandomUnitPairs) {
  test::Rng rng(17);
  for (std::size_t d : {2u, 8u, 64u})
    for (int t = 0; t < 100; ++t) {
      const auto x = test::unit_vector(d, rng), y = test::unit_vector(d, rng);
      EXPECT_LT(std::abs(distance_similarity_residual(x, y)), 1e-9);
    }
}

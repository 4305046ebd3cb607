// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "lego/fusion.hpp"
#include "lego/oracle.hpp"
#include "test_util.hpp"

using namespace lego;

namespace {

RelationshipGraph random_graph(std::size_t n, test::Rng& rng) { return make_graph(test::symmetric_unit_diag(n, rng)); }

// Horner in q, then in p: sum_p sa^p * (sum_q A[p][q] sb^q).
double horner(const Matrix& A, double sa, double sb) {
  double outer = 0.0;
  for (std::size_t p = A.rows(); p-- > 0;) {
    double inner = 0.0;
    for (std::size_t q = A.cols(); q-- > 0;) inner = inner * sb + A(p, q);
    outer = outer * sa + inner;
  }
  return outer;
}

}  // namespace

TEST(ExpandPowers, ZeroPowerIsIdentity) {
  test::Rng rng(1);
  const auto s = expand_powers(random_graph(5, rng), 0);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0], Matrix::identity(5));
}

TEST(ExpandPowers, IdentityBaseIsFixedPoint) {
  for (auto norm : {PowerNormalization::raw, PowerNormalization::row_stochastic}) {
    const auto s = expand_powers(make_graph(Matrix::identity(4)), 5, norm);
    ASSERT_EQ(s.size(), 6u);
    for (const auto& m : s.powers) EXPECT_EQ(m, Matrix::identity(4));
  }
}

TEST(ExpandPowers, MatchesNaiveMatmul) {
  test::Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    const auto g = random_graph(3 + rng() % 4, rng);
    const auto s = expand_powers(g, 3);
    Matrix want = Matrix::identity(g.nodes());
    for (std::size_t p = 0; p <= 3; ++p) {
      EXPECT_LT(max_abs_diff(s[p], want), 1e-9);
      want = test::naive_matmul(want, g.scores);
    }
  }
}

TEST(ExpandPowers, RowStochasticRowsSumToOne) {
  test::Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto s = expand_powers(random_graph(2 + rng() % 6, rng), 4, PowerNormalization::row_stochastic);
    for (const auto& m : s.powers)
      for (std::size_t i = 0; i < m.rows(); ++i) {
        double r = 0.0;
        for (double v : m.row_span(i)) r += v;
        EXPECT_NEAR(r, 1.0, 1e-9);
      }
  }
}

TEST(ExpandPowers, ZeroRowsStayZero) {
  const Matrix z{{0, 0}, {0, 1}};
  const auto n = row_normalize(z);
  EXPECT_EQ(n, z);
}

TEST(Fuse, SingleTermExamples) {
  test::Rng rng(4);
  const auto ga = random_graph(4, rng), gb = random_graph(4, rng);
  const auto sa = expand_powers(ga, 2), sb = expand_powers(gb, 2);
  Matrix A(3, 3);
  A(0, 0) = 1.0;
  EXPECT_EQ(fuse(sa, sb, FusionWeights::full_matrix(A)).scores, Matrix::identity(4));
  A(0, 0) = 0.0;
  A(1, 1) = 1.0;
  EXPECT_EQ(fuse(sa, sb, FusionWeights::full_matrix(A)).scores, hadamard(ga.scores, gb.scores));
}

TEST(Fuse, FourLoopOracleAllSmallShapes) {
  test::Rng rng(5);
  double worst = 0.0;
  for (std::size_t n = 2; n <= 6; ++n)
    for (std::size_t P = 0; P <= 4; ++P)
      for (std::size_t Q = 0; Q <= 4; ++Q) {
        const Matrix ra = test::symmetric_unit_diag(n, rng), rb = test::symmetric_unit_diag(n, rng);
        const Matrix A = test::uniform_matrix(P + 1, Q + 1, rng, -1.0, 1.0);
        const auto g = fuse(expand_powers(make_graph(ra), P), expand_powers(make_graph(rb), Q), FusionWeights::full_matrix(A));
        // Verbatim sum over p, q, i, j with independently computed powers.
        Matrix want(n, n);
        Matrix pa = Matrix::identity(n);
        for (std::size_t p = 0; p <= P; ++p) {
          Matrix pb = Matrix::identity(n);
          for (std::size_t q = 0; q <= Q; ++q) {
            for (std::size_t i = 0; i < n; ++i)
              for (std::size_t j = 0; j < n; ++j) want(i, j) += A(p, q) * pa(i, j) * pb(i, j);
            pb = test::naive_matmul(pb, rb);
          }
          pa = test::naive_matmul(pa, ra);
        }
        worst = std::max(worst, max_abs_diff(g.scores, want));
      }
  EXPECT_LT(worst, 1e-9);
}

TEST(Fuse, LinearInWeights) {
  test::Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    const auto sa = expand_powers(random_graph(4, rng), 2), sb = expand_powers(random_graph(4, rng), 3);
    const Matrix A1 = test::uniform_matrix(3, 4, rng, -1, 1), A2 = test::uniform_matrix(3, 4, rng, -1, 1);
    const Matrix sum12 = fuse(sa, sb, FusionWeights::full_matrix(A1)).scores + fuse(sa, sb, FusionWeights::full_matrix(A2)).scores;
    EXPECT_LT(max_abs_diff(fuse(sa, sb, FusionWeights::full_matrix(A1 + A2)).scores, sum12), 1e-12);
  }
}

TEST(Fuse, PreservesSymmetry) {
  test::Rng rng(7);
  for (int t = 0; t < 50; ++t) {
    const auto sa = expand_powers(random_graph(5, rng), 3), sb = expand_powers(random_graph(5, rng), 3);
    const auto g = fuse(sa, sb, FusionWeights::full_matrix(test::uniform_matrix(4, 4, rng, -1, 1)));
    EXPECT_LT(max_asymmetry(g.scores), 1e-9);
  }
}

TEST(Fuse, ParallelMatchesSerial) {
  test::Rng rng(8);
  const auto sa = expand_powers(random_graph(6, rng), 4), sb = expand_powers(random_graph(6, rng), 4);
  const auto w = FusionWeights::full_matrix(test::uniform_matrix(5, 5, rng, -1, 1));
  EXPECT_LT(max_abs_diff(fuse(sa, sb, w).scores, fuse(sa, sb, w, {true, 4}).scores), 1e-12);
}

TEST(Fuse, ShapeErrors) {
  test::Rng rng(9);
  const auto sa = expand_powers(random_graph(4, rng), 2), sb = expand_powers(random_graph(5, rng), 2);
  EXPECT_THROW(fuse(sa, sb, FusionWeights::initial(FusionForm::full_matrix, 2, 2)), DimensionMismatch);
  const auto sc = expand_powers(random_graph(4, rng), 2);
  EXPECT_THROW(fuse(sa, sc, FusionWeights::initial(FusionForm::full_matrix, 3, 2)), DimensionMismatch);
  EXPECT_THROW(fuse(sa, sc, FusionWeights::initial(FusionForm::outer_product, 2, 1)), DimensionMismatch);
  EXPECT_THROW(FusionWeights::full_matrix(Matrix{{std::nan("")}}), DataError);
}

TEST(OuterEquivalence, Examples) {
  test::Rng rng(10);
  const auto sa = expand_powers(random_graph(4, rng), 1), sb = expand_powers(random_graph(4, rng), 1);
  const std::vector<double> e{1, 0}, z{0, 0};
  EXPECT_EQ(outer_equivalence_check(sa, sb, e, e), 0.0);
  EXPECT_EQ(outer_equivalence_check(sa, sb, z, e), 0.0);
  EXPECT_EQ(fuse(sa, sb, FusionWeights::outer_product(z, e)).scores, Matrix(4, 4));
}

TEST(OuterEquivalence, RandomSelectors) {
  test::Rng rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng() % 5, P = rng() % 5, Q = rng() % 5;
    const auto sa = expand_powers(random_graph(n, rng), P), sb = expand_powers(random_graph(n, rng), Q);
    std::vector<double> a(P + 1), b(Q + 1);
    for (double& v : a) v = u(rng);
    for (double& v : b) v = u(rng);
    EXPECT_LT(outer_equivalence_check(sa, sb, a, b), 1e-12);
  }
}

TEST(MultilinearOracle, Examples) {
  const auto zero = make_graph(Matrix{{0}});
  const auto one = make_graph(Matrix{{1}});
  const Matrix ones(2, 2, 1.0);
  EXPECT_EQ(multilinear_oracle(zero, zero, ones, 0, 0), 1.0);
  EXPECT_EQ(multilinear_oracle(one, one, ones, 0, 0), 4.0);
  EXPECT_THROW(multilinear_oracle(one, one, ones, 1, 0), IndexOutOfRange);
}

TEST(MultilinearOracle, MatchesHorner) {
  test::Rng rng(12);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 500; ++t) {
    const double sa = u(rng), sb = u(rng);
    const Matrix A = test::uniform_matrix(1 + rng() % 5, 1 + rng() % 5, rng, -1, 1);
    const auto ga = make_graph(Matrix{{sa}}), gb = make_graph(Matrix{{sb}});
    EXPECT_NEAR(multilinear_oracle(ga, gb, A, 0, 0), horner(A, sa, sb), 1e-12);
  }
}

// Matrix and element-wise powers coincide on diagonal graphs, so there the
// fused diagonal equals the scalar polynomial.
TEST(MultilinearOracle, AgreesWithFuseOnDiagonalGraphs) {
  test::Rng rng(13);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 4;
    Matrix da(n, n), db(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      da(i, i) = u(rng);
      db(i, i) = u(rng);
    }
    const auto ga = make_graph(da), gb = make_graph(db);
    const Matrix A = test::uniform_matrix(4, 4, rng, -1, 1);
    const auto g = fuse(expand_powers(ga, 3), expand_powers(gb, 3), FusionWeights::full_matrix(A));
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(g.scores(i, i), multilinear_oracle(ga, gb, A, i, i), 1e-9);
  }
}

TEST(FuseCheck, LibraryOracleAgrees) {
  const auto r = oracle::fuse_check(5, 4, 4, 50, 7);
  EXPECT_EQ(r.trials, 50u);
  EXPECT_LT(r.max_deviation, 1e-9);
}

TEST(FusionWeights, Initial) {
  const auto full = FusionWeights::initial(FusionForm::full_matrix, 2, 3);
  EXPECT_EQ(full.coefficient(0, 0), 1.0);
  EXPECT_EQ(full.coefficient(1, 1), 1.0);
  EXPECT_EQ(sum(full.effective()), 2.0);
  const auto outer_w = FusionWeights::initial(FusionForm::outer_product, 2, 7);
  EXPECT_EQ(outer_w.rows(), 3u);
  EXPECT_EQ(outer_w.cols(), 8u);
  EXPECT_EQ(sum(outer_w.effective()), 4.0);
  EXPECT_EQ(parse_fusion_form(to_string(FusionForm::outer_product)), FusionForm::outer_product);
  EXPECT_THROW(parse_fusion_form("diagonal"), DataError);
}

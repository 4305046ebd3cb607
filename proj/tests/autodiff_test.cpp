// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "lego/autodiff.hpp"
#include "lego/oracle.hpp"
#include "test_util.hpp"

using namespace lego;
using namespace lego::autodiff;

namespace {

GradCheckReport check(const ExpressionBuilder& build, std::vector<NamedTensor> params) {
  return grad_check(build, params);
}

}  // namespace

TEST(Tape, ForwardValues) {
  Tape t;
  const auto a = t.parameter(Matrix{{1, 2}, {3, 4}}, "a");
  const auto b = t.constant(Matrix{{1, 0}, {0, 2}});
  EXPECT_EQ(t.value(t.matmul(a, b)), (Matrix{{1, 4}, {3, 8}}));
  EXPECT_EQ(t.value(t.mul(a, b)), (Matrix{{1, 0}, {0, 8}}));
  EXPECT_EQ(t.value(t.sum_rows(a)), (Matrix{{4, 6}}));
  EXPECT_EQ(t.value(t.sum(a))(0, 0), 10.0);
  EXPECT_EQ(t.value(t.variance(a))(0, 0), 1.25);
  EXPECT_EQ(t.value(t.threshold_mask(a, 2.5)), (Matrix{{0, 0}, {3, 4}}));
  EXPECT_EQ(t.value(t.topk(t.constant(Matrix{{2, 5, 5, 1}}), 2)), (Matrix{{5, 5}}));
  EXPECT_EQ(t.value(t.relu(t.constant(Matrix{{-1, 2}}))), (Matrix{{0, 2}}));
  EXPECT_EQ(t.value(t.power_stack_entry(a, 1, 0, Matrix(2, 2, 1.0))), Matrix(2, 2, 3.0));
}

TEST(Tape, TopkTiesPickLowerIndex) {
  Tape t;
  const auto x = t.parameter(Matrix{{3, 7, 7, 7}}, "x");
  const auto s = t.sum(t.topk(x, 2));
  t.forward(s);
  const auto g = t.backward(s).at(x);
  EXPECT_EQ(g, (Matrix{{0, 1, 1, 0}}));
}

TEST(Tape, BackwardIsRepeatable) {
  Tape t;
  const auto x = t.parameter(Matrix{{0.3, -0.2}}, "x");
  const auto y = t.sum(t.sigmoid(t.mul(x, x)));
  t.forward(y);
  const auto g1 = t.backward(y);
  const auto g2 = t.backward(y);
  EXPECT_EQ(g1.at(x), g2.at(x));
}

TEST(Tape, ConstantsHaveNoGradient) {
  Tape t;
  const auto c = t.constant(Matrix{{1.0}});
  const auto p = t.parameter(Matrix{{2.0}}, "p");
  const auto y = t.mul(c, p);
  t.forward(y);
  const auto g = t.backward(y);
  EXPECT_EQ(g.count(c), 0u);
  EXPECT_EQ(g.at(p)(0, 0), 1.0);
}

TEST(Tape, NonScalarRootRejected) {
  Tape t;
  const auto x = t.parameter(Matrix(2, 2), "x");
  EXPECT_THROW(t.forward(x), ShapeMismatch);
}

TEST(Tape, NonFiniteDetected) {
  Tape t;
  EXPECT_THROW(t.constant(Matrix{{std::nan("")}}), NonFinite);
  const auto x = t.parameter(Matrix{{1e308}}, "x");
  EXPECT_THROW(t.scale(1e10, x), NonFinite);
}

TEST(GradCheck, EveryOpOnRandomInputs) {
  test::Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix A = test::gaussian_matrix(3, 4, rng), B = test::gaussian_matrix(4, 3, rng);
    const Matrix C = test::gaussian_matrix(3, 3, rng);
    Matrix labels(3, 1);
    labels(trial % 3, 0) = 1.0;
    const auto build = [&](Tape& t, std::span<const NodeId> ids) {
      const auto m = t.matmul(ids[0], ids[1]);                     // 3x3
      const auto h = t.relu(t.add(m, t.transpose(ids[2])));
      const auto s = t.sub(t.scale(0.5, h), t.mul(ids[2], ids[2]));
      const auto deg = t.sum_rows(t.threshold_mask(s, 0.1));
      const auto var = t.sub(t.variance(deg), t.variance(t.topk(deg, 2)));
      // Kept small so the sigmoid stays away from saturation, where finite
      // differences of log(1 - p) lose most of their digits.
      const auto probs = t.sigmoid(t.scale(0.1, t.matmul(s, t.transpose(t.sum_rows(ids[2])))));
      const auto w = t.power_stack_entry(ids[0], 1, 2, Matrix(2, 2, 0.5));
      return t.add(t.add(t.bce(probs, labels), t.mul(var, var)), t.scale(t.sum(w), t.sum(t.mul(w, w))));
    };
    const auto r = check(build, {{"A", A}, {"B", B}, {"C", C}});
    EXPECT_TRUE(r.passed) << "trial " << trial << " max rel " << r.max_rel_error;
  }
}

TEST(GradCheck, ExcludesSelectionFlips) {
  // relu at exactly 0 flips under any perturbation.
  const auto build = [](Tape& t, std::span<const NodeId> ids) { return t.sum(t.relu(ids[0])); };
  const auto r = check(build, {{"x", Matrix{{0.0, 1.0}}}});
  EXPECT_EQ(r.excluded, 1u);
  EXPECT_EQ(r.params[0].checked, 1u);
  EXPECT_TRUE(r.passed);
}

TEST(GradCheck, RelativeErrorFloor) {
  EXPECT_EQ(relative_error(0.0, 0.0), 0.0);
  EXPECT_NEAR(relative_error(1e-9, 0.0), 1e-3, 1e-15);
  EXPECT_NEAR(relative_error(2.0, 1.0), 0.5, 1e-15);
}

TEST(GradCheck, FullTrainingLossOnToyBags) {
  const auto r = oracle::grad_sweep(5, 4, 2, 2, RegularizerConfig(1.0, 0.5, 2, 4), 99);
  EXPECT_TRUE(r.passed) << r.max_rel_error;
  EXPECT_GT(r.checked, 0u);
}

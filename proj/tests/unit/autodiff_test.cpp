// Copyright 2026 The graphroute Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "graphroute/autodiff.hpp"
#include "graphroute/parameters.hpp"
#include "graphroute/ranking_loss.hpp"

namespace graphroute {
namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

// sum(op(a, b) .* w) for a fixed random w, checked against central differences.
void expect_gradient(const std::string& what, int rows, int cols,
                     const std::function<ad::Var(ad::Tape&, ad::Var, ad::Var)>& op) {
  Rng rng(digest_of(what));
  ParameterSet ps;
  ps.add("a", random_matrix(rows, cols, rng));
  ps.add("b", random_matrix(rows, cols, rng));
  Matrix w;
  auto loss = [&](ad::Tape& tape, const BoundParameters& p) {
    const auto out = op(tape, p["a"], p["b"]);
    const auto& v = tape.value(out);
    if (w.rows() != v.rows() || w.cols() != v.cols()) {
      Rng wr(7);
      w = random_matrix(v.rows(), v.cols(), wr);
    }
    return tape.sum(tape.mul_const(out, w));
  };
  const auto check = testing::finite_difference_check(ps, loss, 1e-5);
  EXPECT_LT(check.max_relative_error, 1e-7) << what << " worst " << check.worst_tensor;
}

TEST(Autodiff, ElementaryOps) {
  expect_gradient("matmul", 3, 3, [](ad::Tape& t, ad::Var a, ad::Var b) { return t.matmul(a, b); });
  expect_gradient("add", 2, 4, [](ad::Tape& t, ad::Var a, ad::Var b) { return t.add(a, b); });
  expect_gradient("sub", 2, 4, [](ad::Tape& t, ad::Var a, ad::Var b) { return t.sub(a, b); });
  expect_gradient("add_row", 3, 4, [](ad::Tape& t, ad::Var a, ad::Var b) {
    return t.add_row(a, t.slice_cols(t.gather_rows(b, std::vector<int>{1}), 0, 4));
  });
  expect_gradient("scale", 2, 3, [](ad::Tape& t, ad::Var a, ad::Var) { return t.scale(a, -2.5); });
  expect_gradient("gelu", 3, 3, [](ad::Tape& t, ad::Var a, ad::Var) { return t.gelu(a); });
  expect_gradient("tanh", 3, 3, [](ad::Tape& t, ad::Var a, ad::Var) { return t.tanh(a); });
  expect_gradient("row_dot", 4, 3, [](ad::Tape& t, ad::Var a, ad::Var b) { return t.row_dot(a, b); });
  expect_gradient("softmax_rows", 3, 5, [](ad::Tape& t, ad::Var a, ad::Var) { return t.softmax_rows(a); });
  expect_gradient("mul_rows", 4, 3, [](ad::Tape& t, ad::Var a, ad::Var b) { return t.mul_rows(a, t.slice_cols(b, 0, 1)); });
  expect_gradient("mul_scalar", 2, 3, [](ad::Tape& t, ad::Var a, ad::Var b) {
    return t.mul_scalar(a, t.slice_cols(t.gather_rows(b, std::vector<int>{0}), 2, 1));
  });
}

TEST(Autodiff, StructuralOps) {
  expect_gradient("gather_scatter", 4, 3, [](ad::Tape& t, ad::Var a, ad::Var) {
    const std::vector<int> idx{3, 0, 0, 2, 1};
    return t.scatter_add_rows(t.gather_rows(a, idx), std::vector<int>{1, 1, 0, 2, 2}, 3);
  });
  expect_gradient("concat_slice", 3, 4, [](ad::Tape& t, ad::Var a, ad::Var b) {
    const ad::Var cols[] = {a, b};
    const ad::Var rows[] = {t.slice_cols(t.concat_cols(cols), 2, 4), b};
    return t.concat_rows(rows);
  });
  expect_gradient("layer_norm", 4, 6, [](ad::Tape& t, ad::Var a, ad::Var b) {
    const auto gamma = t.slice_cols(t.gather_rows(b, std::vector<int>{0}), 0, 6);
    const auto beta = t.slice_cols(t.gather_rows(b, std::vector<int>{1}), 0, 6);
    return t.layer_norm(a, gamma, beta);
  });
  expect_gradient("segment_softmax", 6, 1, [](ad::Tape& t, ad::Var a, ad::Var) {
    return t.segment_softmax(a, std::vector<int>{0, 0, 1, 2, 2, 2}, 3);
  });
}

TEST(Autodiff, GroupedCrossEntropy) {
  Matrix target(5, 1);
  target << 0.25, 0.75, 0.1, 0.3, 0.6;
  expect_gradient("grouped_ce", 5, 1, [&](ad::Tape& t, ad::Var a, ad::Var) {
    return t.grouped_cross_entropy(a, std::vector<int>{0, 0, 1, 1, 1}, 2, target);
  });
}

TEST(Autodiff, UnusedParameterHasZeroGradient) {
  ParameterSet ps;
  ps.add("used", Matrix::Ones(2, 2));
  ps.add("unused", Matrix::Ones(2, 2));
  ad::Tape tape;
  const BoundParameters bound(tape, ps, true);
  tape.backward(tape.sum(bound["used"]));
  const auto g = bound.gradients(tape);
  EXPECT_TRUE(g.at("unused").isZero(0.0));
  EXPECT_TRUE(g.at("used").isOnes(0.0));
}

TEST(RankingLossTest, ClosedForms) {
  const RankingLoss loss{0.5};
  const std::vector<int> group{0, 0, 0, 0};
  EXPECT_NEAR(loss(std::vector<double>{1, 1, 1, 1}, std::vector<double>{0.5, 0.5, 0.5, 0.5}, group), std::log(4.0),
              1e-12);
  // Near-zero temperature: the target is one-hot on the top rating.
  const RankingLoss sharp{1e-6};
  EXPECT_NEAR(sharp(std::vector<double>{2, 0}, std::vector<double>{1, 0}, std::vector<int>{0, 0}),
              std::log(1.0 + std::exp(-2.0)), 1e-12);
}

TEST(RankingLossTest, PermutationAndGroups) {
  const RankingLoss loss{0.5};
  const std::vector<double> s{0.3, -1.0, 2.0, 0.7, 0.1};
  const std::vector<double> r{1.0, 0.0, 0.5, 0.2, 0.9};
  const std::vector<int> g{0, 0, 0, 1, 1};
  const std::vector<double> sp{0.7, 2.0, 0.1, 0.3, -1.0};
  const std::vector<double> rp{0.2, 0.5, 0.9, 1.0, 0.0};
  const std::vector<int> gp{1, 0, 1, 0, 0};
  EXPECT_NEAR(loss(s, r, g), loss(sp, rp, gp), 1e-12);
  // Singleton groups are ignored.
  const std::vector<double> s2{0.3, -1.0, 2.0, 0.7, 0.1, 5.0};
  const std::vector<double> r2{1.0, 0.0, 0.5, 0.2, 0.9, 0.0};
  const std::vector<int> g2{0, 0, 0, 1, 1, 2};
  EXPECT_NEAR(loss(s, r, g), loss(s2, r2, g2), 1e-12);
  EXPECT_THROW(loss(std::vector<double>{1}, std::vector<double>{1}, std::vector<int>{0}), std::exception);
}

TEST(RankingLossTest, TapeMatchesScalarVersion) {
  const RankingLoss loss{0.5};
  const std::vector<double> s{0.3, -1.0, 2.0, 0.7, 0.1};
  const std::vector<double> r{1.0, 0.0, 0.5, 0.2, 0.9};
  const std::vector<int> g{0, 0, 0, 1, 1};
  ad::Tape tape;
  Matrix col(5, 1);
  for (int i = 0; i < 5; ++i) col(i, 0) = s[static_cast<std::size_t>(i)];
  const auto v = loss(tape, tape.constant(col), r, g);
  EXPECT_NEAR(tape.value(v)(0, 0), loss(s, r, g), 1e-12);
}

TEST(AdamTest, MinimizesQuadratic) {
  ParameterSet ps;
  ps.add("x", Matrix::Constant(1, 3, 5.0));
  Adam adam(ps, {0.1});
  for (int i = 0; i < 500; ++i) {
    // d/dx sum(x^2) = 2x
    ParameterSet g;
    g.add("x", 2.0 * ps.at("x"));
    adam.step(ps, g);
  }
  EXPECT_LT(ps.at("x").cwiseAbs().maxCoeff(), 0.05);
  EXPECT_EQ(adam.steps(), 500);
}

}  // namespace
}  // namespace graphroute

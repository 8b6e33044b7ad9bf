#include <gtest/gtest.h>

#include "oracle.hpp"
#include "pho/errors.hpp"
#include "pho/sas.hpp"
#include "test_util.hpp"

using namespace pho;

namespace {

ModalityMeans means2(double x0, double x1, double y0, double y1) {
  return ModalityMeans((Vector(2) << x0, x1).finished(), (Vector(2) << y0, y1).finished());
}

}  // namespace

TEST(P1Objective, IdentityOnEqualMeans) {
  EXPECT_EQ(p1_objective(TransformMatrix::identity(2), means2(1, 1, 1, 1), {0.0}), 0.0);
}

TEST(P1Objective, ZeroMap) {
  EXPECT_EQ(p1_objective(TransformMatrix::zero(2), means2(0.3, -2, 3, 4), {1.0}), 25.0);
}

TEST(P1Objective, MatchesTermwiseOracle) {
  Rng rng(11);
  for (int t = 0; t < 20; ++t) {
    const auto m = testutil::random_means(rng, 5);
    const Matrix a = rng.normal_matrix(5, 5);
    const double got = p1_objective(TransformMatrix(a), m, {0.1});
    const double want = oracle::p1_naive(testutil::to_mat(a), testutil::to_vec(m.x_bar),
                                         testutil::to_vec(m.y_bar), 0.1);
    EXPECT_NEAR(got, want, 1e-12 * (1 + std::abs(want)));
  }
}

TEST(P1Objective, DimensionMismatch) {
  EXPECT_THROW(p1_objective(TransformMatrix::identity(3), means2(1, 1, 1, 1), {0.1}), DimensionMismatch);
}

TEST(SolveSas, ScalarExactFit) {
  const ModalityMeans m((Vector(1) << 1).finished(), (Vector(1) << 2).finished());
  const auto a = solve_sas(m, {0.0});
  EXPECT_EQ(a(0, 0), 2.0);
  EXPECT_EQ(a.matrix()(0, 0) * 1.0 - 2.0, 0.0);
}

TEST(SolveSas, ZeroVisibleMeanGivesZeroMap) {
  const auto a = solve_sas(means2(0, 0, 5, 7), {0.5});
  EXPECT_TRUE((a.matrix().array() == 0.0).all());
}

TEST(SolveSas, DegenerateWithoutRidge) {
  EXPECT_THROW(solve_sas(means2(0, 0, 5, 7), {0.0}), DegenerateInput);
}

// Frozen from a NumPy evaluation of y x^T / (|x|^2 + alpha) for this input.
TEST(SolveSas, FrozenHandInstance) {
  const ModalityMeans m((Vector(3) << 1.0, -2.0, 0.5).finished(), (Vector(3) << 0.25, 3.0, -1.0).finished());
  const auto a = solve_sas(m, {0.75});
  const double expected[3][3] = {{1.0 / 24, -1.0 / 12, 1.0 / 48}, {0.5, -1.0, 0.25}, {-1.0 / 6, 1.0 / 3, -1.0 / 12}};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(a(i, j), expected[i][j], 1e-15);
  }
}

TEST(SolveSas, MatchesGradientDescentOracle) {
  Rng rng(17);
  for (int t = 0; t < 10; ++t) {
    const auto m = testutil::random_means(rng, 3);
    const auto a = solve_sas(m, {0.1});
    const auto gd = oracle::gd_minimize_p1(testutil::to_vec(m.x_bar), testutil::to_vec(m.y_bar), 0.1);
    EXPECT_LE(p1_objective(a, m, {0.1}), gd.objective + 1e-8);
    EXPECT_LT((a.matrix() - testutil::from_mat(gd.a)).cwiseAbs().maxCoeff(), 1e-5);
  }
}

TEST(SolveSas, OptimalAgainstRandomPerturbations) {
  Rng rng(23);
  const auto m = testutil::random_means(rng, 4);
  const SasParams p{0.1};
  const auto a = solve_sas(m, p);
  const double f0 = p1_objective(a, m, p);
  for (double eps : {1e-3, 1e-2}) {
    for (int k = 0; k < 1000; ++k) {
      Matrix d = rng.normal_matrix(4, 4);
      d /= d.norm();
      EXPECT_LE(f0, p1_objective(TransformMatrix(a.matrix() + eps * d), m, p));
    }
  }
}

TEST(SolveSas, StationaryGradient) {
  Rng rng(29);
  for (int t = 0; t < 20; ++t) {
    const auto m = testutil::random_means(rng, 6);
    const auto a = solve_sas(m, {0.1});
    EXPECT_LT(p1_gradient(a.matrix(), m, 0.1).norm(), 1e-8 * (1 + m.y_bar.norm()));
  }
}

TEST(SolveSas, ScalingCovariance) {
  Rng rng(31);
  const auto m = testutil::random_means(rng, 5);
  const double c = 3.0;
  const auto a1 = solve_sas(m, {0.1});
  const auto a2 = solve_sas(ModalityMeans(c * m.x_bar, c * m.y_bar), {c * c * 0.1});
  EXPECT_LT((a1.matrix() - a2.matrix()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SolveSas, RankOne) {
  Rng rng(37);
  const auto a = solve_sas(testutil::random_means(rng, 6), {0.1}).matrix();
  for (int i = 0; i < 6; ++i) {
    for (int k = i + 1; k < 6; ++k) {
      for (int j = 0; j < 6; ++j) {
        for (int l = j + 1; l < 6; ++l) {
          EXPECT_NEAR(a(i, j) * a(k, l) - a(i, l) * a(k, j), 0.0, 1e-10);
        }
      }
    }
  }
}

TEST(P1Gradient, MatchesFiniteDifferences) {
  Rng rng(41);
  const auto m = testutil::random_means(rng, 4);
  const Matrix a = rng.normal_matrix(4, 4);
  const auto f = [&](const oracle::Vec& flat) {
    oracle::Mat mm{4, flat};
    return p1_objective(TransformMatrix(testutil::from_mat(mm)), m, {0.1});
  };
  const auto numeric = oracle::finite_diff_grad(f, testutil::to_mat(a).a);
  const auto analytic = testutil::to_mat(p1_gradient(a, m, 0.1)).a;
  EXPECT_LT(testutil::max_rel_err(analytic, numeric), 1e-6);
}

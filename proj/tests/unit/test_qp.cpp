#include <shapetest/qp.hpp>

#include <gtest/gtest.h>

#include "oracles.hpp"

#include <random>

using namespace shapetest;

namespace {

Matrix random_spd(int n, std::mt19937_64& g) {
  std::normal_distribution<double> N(0.0, 1.0);
  const Matrix M = Matrix::NullaryExpr(n + 2, n, [&]() { return N(g); });
  return M.transpose() * M + 0.1 * Matrix::Identity(n, n);
}

}  // namespace

TEST(Qp, UnconstrainedIsNewtonStep) {
  std::mt19937_64 g(1);
  const Matrix G = random_spd(5, g);
  const Vector c = Vector::LinSpaced(5, -1.0, 1.0);
  QpProblem p{G, c, Matrix(0, 5), Vector(0), Matrix(0, 5), Vector(0)};
  const QpSolution s = solve_qp(p);
  EXPECT_LT((s.x - G.ldlt().solve(-c)).norm(), 1e-10);
  EXPECT_TRUE(s.active.empty());
}

TEST(Qp, AgreesWithActiveSetEnumeration) {
  std::mt19937_64 g(7);
  std::normal_distribution<double> N(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 4, m = 1 + trial % 7, me = trial % 3 == 0 ? 1 : 0;
    const Matrix G = random_spd(n, g);
    const Vector c = Vector::NullaryExpr(n, [&]() { return 3 * N(g); });
    const Matrix A = Matrix::NullaryExpr(m, n, [&]() { return N(g); });
    // Feasible by construction: rhs below A x0.
    const Vector x0 = Vector::NullaryExpr(n, [&]() { return N(g); });
    const Vector a = A * x0 - Vector::NullaryExpr(m, [&]() { return std::abs(N(g)); });
    const Matrix E = Matrix::NullaryExpr(me, n, [&]() { return N(g); });
    const Vector e = E * x0;
    const auto ref = oracle::enumerate_qp(G, c, E, e, A, a);
    ASSERT_TRUE(ref.feasible);
    const QpSolution s = solve_qp({G, c, E, e, A, a});
    EXPECT_NEAR(s.objective, ref.objective, 1e-8 * std::max(1.0, std::abs(ref.objective))) << "trial " << trial;
    EXPECT_LT((s.x - ref.x).norm(), 1e-7) << "trial " << trial;
    // KKT
    const Vector grad = G * s.x + c;
    Vector lag = grad - A.transpose() * s.ineq_multipliers;
    if (me) lag -= E.transpose() * s.eq_multipliers;
    EXPECT_LT(lag.norm(), 1e-8);
    EXPECT_GE(s.ineq_multipliers.minCoeff(), -1e-12);
    EXPECT_GE((A * s.x - a).minCoeff(), -1e-9);
    for (int k = 0; k < m; ++k) EXPECT_LT(std::abs(s.ineq_multipliers[k] * (A.row(k).dot(s.x) - a[k])), 1e-8);
  }
}

TEST(Qp, InfeasibleThrows) {
  Matrix A(2, 1);
  A << 1, -1;
  Vector a(2);
  a << 1, 0;  // x >= 1 and x <= 0
  QpProblem p{Matrix::Identity(1, 1), Vector::Zero(1), Matrix(0, 1), Vector(0), A, a};
  EXPECT_THROW(solve_qp(p), InfeasibleError);
  Matrix E(2, 1);
  E << 1, 1;
  Vector e(2);
  e << 0, 1;
  QpProblem q{Matrix::Identity(1, 1), Vector::Zero(1), E, e, Matrix(0, 1), Vector(0)};
  EXPECT_THROW(solve_qp(q), InfeasibleError);
}

TEST(Qp, RedundantEqualitiesAreHarmless) {
  Matrix E(3, 3);
  E << 1, 1, 0, 2, 2, 0, 0, 1, -1;
  Vector e(3);
  e << 1, 2, 0;
  QpProblem p{Matrix::Identity(3, 3), Vector::Zero(3), E, e, Matrix(0, 3), Vector(0)};
  const QpSolution s = solve_qp(p);
  EXPECT_LT((E * s.x - e).norm(), 1e-12);
  // x1 = x2 = 1/3, x0 = 2/3
  EXPECT_NEAR(s.x[0], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(s.x[2], 1.0 / 3.0, 1e-12);
}

TEST(Qp, SemidefiniteHessianGetsRidge) {
  // Least squares with a rank-deficient design: G = X'X singular.
  Matrix X(3, 3);
  X << 1, 1, 0, 1, 1, 0, 0, 0, 1;
  const Vector y = Vector::Ones(3);
  Matrix A = Matrix::Identity(3, 3);
  QpProblem p{X.transpose() * X, -X.transpose() * y, Matrix(0, 3), Vector(0), A, Vector::Zero(3)};
  const QpSolution s = solve_qp(p);
  EXPECT_GT(s.ridge, 0.0);
  EXPECT_LT((X * s.x - y).norm(), 1e-5);
}

TEST(Qp, DimensionChecks) {
  QpProblem p{Matrix::Identity(2, 2), Vector::Zero(3), Matrix(0, 2), Vector(0), Matrix(0, 2), Vector(0)};
  EXPECT_THROW(solve_qp(p), InvalidArgument);
}

#include <shapetest/bspline.hpp>

#include <gtest/gtest.h>

#include "oracles.hpp"

#include <random>

using namespace shapetest;

namespace {

std::vector<double> knot_vector(const KnotSystem& ks) { return {ks.knots().begin(), ks.knots().end()}; }

}  // namespace

TEST(KnotSystem, SizesAndClamping) {
  const KnotSystem ks = make_knot_system(3, 6, {0.0, 1.0});
  EXPECT_EQ(ks.size(), 9);
  EXPECT_EQ(static_cast<int>(ks.knots().size()), 6 + 2 * 3 + 1);
  for (int j = 0; j <= 3; ++j) {
    EXPECT_DOUBLE_EQ(ks.knot(j), 0.0);
    EXPECT_DOUBLE_EQ(ks.knot(static_cast<int>(ks.knots().size()) - 1 - j), 1.0);
  }
  const auto u = ks.unique_knots();
  ASSERT_EQ(u.size(), 7u);
  for (int k = 0; k < 7; ++k) EXPECT_NEAR(u[static_cast<std::size_t>(k)], k / 6.0, 1e-15);
  EXPECT_NEAR(ks.spacing(), 1.0 / 6.0, 1e-15);
}

TEST(KnotSystem, RejectsBadArguments) {
  EXPECT_THROW(make_knot_system(-1, 3, {}), InvalidArgument);
  EXPECT_THROW(make_knot_system(2, 0, {}), InvalidArgument);
  EXPECT_THROW(make_knot_system(2, 3, {1.0, 1.0}), InvalidArgument);
}

TEST(BSpline, MatchesRecursiveDefinition) {
  std::mt19937_64 g(11);
  for (int q = 0; q <= 4; ++q)
    for (int lp = 1; lp <= 7; ++lp) {
      const KnotSystem ks = make_knot_system(q, lp, {-1.0, 2.0});
      const auto t = knot_vector(ks);
      std::uniform_real_distribution<double> U(-1.0, 2.0);
      std::vector<double> xs{-1.0, 2.0, ks.unique_knots()[static_cast<std::size_t>(lp / 2)]};
      for (int k = 0; k < 40; ++k) xs.push_back(U(g));
      for (double x : xs) {
        const Vector b = eval_basis(ks, x);
        for (int j = 0; j < ks.size(); ++j)
          EXPECT_NEAR(b[j], oracle::cox_de_boor(t, j, q, x), 1e-13) << "q=" << q << " L'=" << lp << " x=" << x;
      }
    }
}

TEST(BSpline, PartitionOfUnityAndNonnegativity) {
  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int q = 0; q <= 5; ++q) {
    const KnotSystem ks = make_knot_system(q, 9, {0.0, 1.0});
    for (int k = 0; k < 200; ++k) {
      const Vector b = eval_basis(ks, U(g));
      EXPECT_NEAR(b.sum(), 1.0, 1e-13);
      EXPECT_GE(b.minCoeff(), 0.0);
    }
  }
}

TEST(BSpline, NonzeroWindow) {
  const KnotSystem ks = make_knot_system(3, 5, {0.0, 1.0});
  double vals[4];
  for (double x : {0.0, 0.13, 0.4, 0.6, 0.99, 1.0}) {
    const int first = eval_basis_nonzero(ks, x, vals);
    const Vector full = eval_basis(ks, x);
    for (int j = 0; j < ks.size(); ++j) {
      const double expect = (j >= first && j <= first + 3) ? vals[j - first] : 0.0;
      EXPECT_NEAR(full[j], expect, 1e-15);
    }
  }
}

TEST(BSpline, DesignMatrixRows) {
  const KnotSystem ks = make_knot_system(2, 4, {0.0, 2.0});
  const std::vector<double> xs{0.0, 0.3, 1.0, 1.7, 2.0};
  const Matrix X = design_matrix(ks, xs);
  ASSERT_EQ(X.rows(), 5);
  ASSERT_EQ(X.cols(), 6);
  for (int i = 0; i < 5; ++i) EXPECT_LT((X.row(i).transpose() - eval_basis(ks, xs[static_cast<std::size_t>(i)])).norm(), 1e-15);
}

TEST(BSpline, OutOfDomainThrows) {
  const KnotSystem ks = make_knot_system(3, 4, {0.0, 1.0});
  EXPECT_THROW(eval_basis(ks, 1.01), DataError);
  EXPECT_THROW(eval_basis(ks, -0.5), DataError);
  EXPECT_NO_THROW(eval_basis(ks, 1.0 + 1e-14));
}

TEST(BSpline, ReproducesPolynomialsOfDegreeQ) {
  // Greville abscissae reproduce linear functions exactly.
  const KnotSystem ks = make_knot_system(3, 7, {0.0, 1.0});
  const auto gr = ks.greville();
  Vector coef(ks.size());
  for (int j = 0; j < ks.size(); ++j) coef[j] = 2.0 - 3.0 * gr[static_cast<std::size_t>(j)];
  for (double x = 0.0; x <= 1.0; x += 0.01) EXPECT_NEAR(eval_spline(ks, coef, x), 2.0 - 3.0 * x, 1e-13);
}

TEST(BSplineDerivative, MatchesFiniteDifferences) {
  std::mt19937_64 g(5);
  std::normal_distribution<double> N(0.0, 1.0);
  const KnotSystem ks = make_knot_system(3, 6, {0.0, 1.0});
  Vector coef(ks.size());
  for (auto& c : coef) c = N(g);
  const auto knots = ks.unique_knots();
  std::uniform_real_distribution<double> U(0.001, 0.999);
  int checked = 0;
  while (checked < 300) {
    const double x = U(g);
    bool near_knot = false;
    for (double z : knots) near_knot |= std::abs(x - z) < 1e-3;
    if (near_knot) continue;
    const double h = 1e-5;
    const double fd1 = (eval_spline(ks, coef, x + h) - eval_spline(ks, coef, x - h)) / (2 * h);
    const double d1 = eval_spline_derivative(ks, coef, x, 1);
    EXPECT_LT(std::abs(d1 - fd1), 1e-5 * std::max(1.0, std::abs(d1)));
    const double fd2 = (eval_spline_derivative(ks, coef, x + h, 1) - eval_spline_derivative(ks, coef, x - h, 1)) / (2 * h);
    const double d2 = eval_spline_derivative(ks, coef, x, 2);
    EXPECT_LT(std::abs(d2 - fd2), 1e-5 * std::max(1.0, std::abs(d2)));
    ++checked;
  }
}

TEST(BSplineDerivative, KnotSystemDropsOneDegree) {
  const KnotSystem ks = make_knot_system(3, 5, {-2.0, 3.0});
  Vector coef = Vector::LinSpaced(ks.size(), 0.0, 1.0);
  const auto [dks, dcoef] = derivative_coefficients(ks, coef, 1);
  EXPECT_EQ(dks, make_knot_system(2, 5, {-2.0, 3.0}));
  EXPECT_EQ(dcoef.size(), ks.size() - 1);
  const Matrix D = derivative_operator(ks, 2);
  EXPECT_EQ(D.rows(), ks.size() - 2);
  EXPECT_EQ(D.cols(), ks.size());
  const auto [d2ks, d2coef] = derivative_coefficients(ks, coef, 2);
  EXPECT_LT((D * coef - d2coef).norm(), 1e-12);
  EXPECT_EQ(d2ks.degree(), 1);
}

TEST(BSplineDerivative, BasisDerivativeIsLinearInCoefficients) {
  const KnotSystem ks = make_knot_system(3, 4, {0.0, 1.0});
  Vector coef(ks.size());
  coef << 0.3, -1.0, 2.0, 0.5, 0.0, 1.5, -0.7;
  for (double x : {0.05, 0.3, 0.62, 0.97})
    for (int r = 0; r <= 3; ++r)
      EXPECT_NEAR(eval_basis_derivative(ks, x, r).dot(coef), eval_spline_derivative(ks, coef, x, r), 1e-11);
  EXPECT_THROW(eval_basis_derivative(ks, 0.4, 4), InvalidArgument);
}

TEST(SplineBasis, PiecesAndBreakpoints) {
  const KnotSystem a = make_knot_system(3, 4, {0.0, 0.4});
  const KnotSystem b = make_knot_system(3, 4, {0.4, 1.0});
  const SplineBasis basis({a, b});
  EXPECT_EQ(basis.size(), a.size() + b.size());
  EXPECT_EQ(basis.offset(1), a.size());
  EXPECT_EQ(basis.piece_of(0.4), 0);
  EXPECT_EQ(basis.piece_of(0.41), 1);
  const Vector e = basis.eval(0.7);
  EXPECT_LT(e.head(a.size()).norm(), 1e-15);
  EXPECT_LT((e.tail(b.size()) - eval_basis(b, 0.7)).norm(), 1e-15);
  const auto bp = basis.breakpoints();
  EXPECT_EQ(bp.size(), 9u);
  EXPECT_DOUBLE_EQ(bp.front(), 0.0);
  EXPECT_DOUBLE_EQ(bp.back(), 1.0);
}

TEST(SplineBasis, RejectsGaps) {
  const KnotSystem a = make_knot_system(2, 3, {0.0, 0.4});
  const KnotSystem b = make_knot_system(2, 3, {0.5, 1.0});
  EXPECT_THROW(SplineBasis({a, b}), InvalidArgument);
}

TEST(BSpline, LinearHatFunctions) {
  const KnotSystem ks = make_knot_system(1, 2);
  const Vector b = eval_basis(ks, 0.25);
  ASSERT_EQ(b.size(), 3);
  EXPECT_NEAR(b[0], 0.5, 1e-15);
  EXPECT_NEAR(b[1], 0.5, 1e-15);
  EXPECT_NEAR(b[2], 0.0, 1e-15);
}

TEST(BSpline, ColumnMeansMatchIntegrals) {
  const KnotSystem ks = make_knot_system(3, 6);
  std::mt19937_64 g(77);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<double> xs(500);
  for (auto& x : xs) x = U(g);
  const Matrix X = design_matrix(ks, xs);
  const auto t = ks.knots();
  for (int l = 0; l < ks.size(); ++l) {
    const double integral = (t[static_cast<std::size_t>(l + 4)] - t[static_cast<std::size_t>(l)]) / 4.0;
    const double mean = X.col(l).mean();
    const double sd = std::sqrt((X.col(l).array() - mean).square().sum() / (xs.size() - 1));
    EXPECT_LT(std::abs(mean - integral), 3.0 * sd / std::sqrt(500.0)) << l;
  }
}

TEST(BSpline, GrevilleCoefficientsGiveIdentity) {
  for (int q : {1, 2, 3}) {
    const KnotSystem ks = make_knot_system(q, 5, {-1.0, 2.0});
    const auto g = ks.greville();
    const Vector c = Eigen::Map<const Vector>(g.data(), static_cast<Eigen::Index>(g.size()));
    for (double x = -1.0; x <= 2.0; x += 0.0625) {
      EXPECT_NEAR(eval_spline(ks, c, x), x, 1e-10);
      EXPECT_NEAR(eval_spline_derivative(ks, c, x, 1), 1.0, 1e-10);
    }
  }
}

TEST(BSpline, LeastSquaresReproducesQuadratic) {
  const KnotSystem ks = make_knot_system(3, 6);
  std::vector<double> xs(200);
  for (int i = 0; i < 200; ++i) xs[static_cast<std::size_t>(i)] = (i + 0.5) / 200.0;
  const Matrix X = design_matrix(ks, xs);
  Vector y(200);
  for (int i = 0; i < 200; ++i) y[i] = xs[static_cast<std::size_t>(i)] * xs[static_cast<std::size_t>(i)];
  const Vector b = X.colPivHouseholderQr().solve(y);
  for (double x = 0.0; x <= 1.0; x += 0.01) EXPECT_NEAR(eval_spline(ks, b, x), x * x, 1e-6);
}

TEST(BSpline, DegenerateDesigns) {
  const KnotSystem ks = make_knot_system(2, 4);
  const std::vector<double> one{0.3};
  const Matrix X1 = design_matrix(ks, one);
  ASSERT_EQ(X1.rows(), 1);
  EXPECT_LT((X1.row(0).transpose() - eval_basis(ks, 0.3)).norm(), 1e-15);
  const std::vector<double> same(20, 0.6);
  const Matrix Xs = design_matrix(ks, same);
  Eigen::FullPivLU<Matrix> lu(Xs);
  EXPECT_EQ(lu.rank(), 1);
}

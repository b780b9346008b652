#include <shapetest/khmaladze.hpp>
#include <shapetest/linalg.hpp>

#include <gtest/gtest.h>

#include "oracles.hpp"

#include <random>

using namespace shapetest;

namespace {

struct Sample {
  std::vector<double> x, y;
};

Sample sample(int n, std::uint64_t seed, double (*f)(double), double sigma) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::normal_distribution<double> N(0.0, sigma);
  Sample s;
  for (int i = 0; i < n; ++i) {
    s.x.push_back(U(g));
    s.y.push_back(f(s.x.back()) + N(g));
  }
  return s;
}

Vector random_vector(Eigen::Index n, std::mt19937_64& g) {
  std::normal_distribution<double> N(0.0, 1.0);
  return Vector::NullaryExpr(n, [&]() { return N(g); });
}

double identity_fn(double x) { return x; }

}  // namespace

TEST(Ordering, RightAndLeftSweeps) {
  const std::vector<double> x{0.5, 0.1, 0.9, 0.3};
  const std::vector<double> y{1, 2, 3, 4};
  const SplineBasis basis(make_knot_system(1, 2, {0.0, 1.0}));
  const OrderedSample r = order_and_trim(x, y, basis);
  EXPECT_EQ(r.perm, (std::vector<int>{1, 3, 0, 2}));
  EXPECT_EQ(r.tail_start, (std::vector<int>{0, 1, 2, 3}));
  EXPECT_DOUBLE_EQ(r.y_sorted[0], 2.0);
  const OrderedSample l = order_and_trim(x, y, basis, std::nullopt, Direction::left);
  EXPECT_EQ(l.perm, (std::vector<int>{2, 0, 3, 1}));
  EXPECT_EQ(l.trimmed_count(), 0);
}

TEST(Ordering, TiesShareTheirTail) {
  const std::vector<double> x{0.2, 0.7, 0.2, 0.7, 0.4};
  const std::vector<double> y(5, 0.0);
  const OrderedSample os = order_and_trim(x, y, SplineBasis(make_knot_system(2, 3, {0.0, 1.0})));
  EXPECT_EQ(os.tail_start, (std::vector<int>{0, 0, 2, 3, 3}));
}

TEST(Ordering, TrimmingMovesPointsNearKnotsOntoThem) {
  const SplineBasis basis(make_knot_system(3, 4, {0.0, 1.0}));
  std::vector<double> x;
  for (int i = 0; i < 400; ++i) x.push_back((i + 0.5) / 400.0);
  const std::vector<double> y(x.size(), 0.0);
  const double vs = 0.6;
  const OrderedSample os = order_and_trim(x, y, basis, vs);
  const double thr = std::pow(400.0, -vs);
  const auto knots = basis.breakpoints();
  for (int k = 0; k < os.size(); ++k) {
    const double xk = os.x_sorted[k];
    const auto it = std::lower_bound(knots.begin(), knots.end(), xk);
    const bool expect = it != knots.end() && xk + thr >= *it;
    EXPECT_EQ(os.trimmed[static_cast<std::size_t>(k)] != 0, expect) << xk;
    if (expect) {
      EXPECT_DOUBLE_EQ(os.x_tilde[k], *it);
      EXPECT_EQ(os.tail_start[static_cast<std::size_t>(k)],
                static_cast<int>(std::lower_bound(x.begin(), x.end(), *it) - x.begin()));
    } else {
      EXPECT_EQ(os.tail_start[static_cast<std::size_t>(k)], k);
    }
  }
  EXPECT_GT(os.trimmed_count(), 0);
  EXPECT_THROW(order_and_trim(x, y, basis, 0.4), InvalidArgument);
}

TEST(RecursiveResiduals, PlanMatchesNaiveLeastSquares) {
  std::mt19937_64 g(3);
  for (int q : {0, 1, 2, 3})
    for (int lp : {1, 3, 6}) {
      const Sample s = sample(80, 100 + q * 10 + lp, identity_fn, 1.0);
      const SplineBasis basis(make_knot_system(q, lp, {0.0, 1.0}));
      const OrderedSample os = order_and_trim(s.x, s.y, basis);
      const RecursiveResidualPlan plan(os.P_sorted, os.tail_start);
      const Vector u = random_vector(80, g);
      const Vector v = plan.residuals(u);
      const Vector ref = oracle::naive_recursive_residuals(os.P_sorted, os.tail_start, u);
      EXPECT_LT((v - ref).cwiseAbs().maxCoeff(), 1e-8) << "q=" << q << " L'=" << lp;
    }
}

TEST(RecursiveResiduals, PseudoInverseSweepMatchesPlan) {
  std::mt19937_64 g(4);
  const Sample s = sample(150, 5, identity_fn, 1.0);
  const SplineBasis basis(make_knot_system(3, 4, {0.0, 1.0}));
  const OrderedSample os = order_and_trim(s.x, s.y, basis);
  const Vector u = random_vector(150, g);
  const Vector a = RecursiveResidualPlan(os.P_sorted, os.tail_start).residuals(u);
  const Vector b = PseudoInverseSweep(os.P_sorted, os.tail_start).residuals(u);
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(RecursiveResiduals, SweepObserverSeesValidPseudoInverses) {
  const Sample s = sample(120, 6, identity_fn, 1.0);
  const SplineBasis basis(make_knot_system(2, 3, {0.0, 1.0}));
  const OrderedSample os = order_and_trim(s.x, s.y, basis);
  const PseudoInverseSweep sweep(os.P_sorted, os.tail_start);
  int seen = 0, recursive = 0;
  sweep.residuals(Vector::Ones(120), [&](const SweepStep& st) {
    ++seen;
    recursive += st.recursive;
    const Matrix ref = pseudo_inverse(*st.A);
    EXPECT_LT((*st.A_plus - ref).norm(), 1e-6 * std::max(1.0, ref.norm())) << st.index;
  });
  EXPECT_GT(seen, 0);
  EXPECT_GT(recursive, 0);
}

TEST(RecursiveResiduals, AnnihilatesTheBasis) {
  std::mt19937_64 g(7);
  const Sample s = sample(200, 8, identity_fn, 1.0);
  const SplineBasis basis(make_knot_system(3, 6, {0.0, 1.0}));
  const OrderedSample os = order_and_trim(s.x, s.y, basis);
  const RecursiveResidualPlan plan(os.P_sorted, os.tail_start);
  for (int t = 0; t < 10; ++t) {
    const Vector beta = random_vector(basis.size(), g);
    EXPECT_LT(plan.residuals(os.P_sorted * beta).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(RecursiveResiduals, EmptyTailLeavesResidualUnchanged) {
  const Matrix P = Matrix::Ones(3, 1);
  const RecursiveResidualPlan plan(P, {3, 3, 3});
  Vector u(3);
  u << 1, -2, 5;
  EXPECT_LT((plan.residuals(u) - u).norm(), 1e-15);
  EXPECT_THROW(RecursiveResidualPlan(P, {0, 2, 1}), InvalidArgument);
}

TEST(RecursiveResiduals, ForwardFormMatchesNaive) {
  std::mt19937_64 g(9);
  const Sample s = sample(60, 10, identity_fn, 1.0);
  const SplineBasis basis(make_knot_system(2, 3, {0.0, 1.0}));
  const OrderedSample os = order_and_trim(s.x, s.y, basis);
  const Vector u = random_vector(60, g);
  const Vector ref = oracle::naive_forward_residuals(os.P_sorted, u);
  for (auto m : {RecursionMethod::givens, RecursionMethod::pseudo_inverse})
    EXPECT_LT((recursive_residuals_forward(os.P_sorted, u, m) - ref).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(PartialSums, ScaledCumulativeSum) {
  Vector v(4);
  v << 1, 2, -3, 4;
  const Vector p = partial_sum_path(v);
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 1.5);
  EXPECT_DOUBLE_EQ(p[2], 0.0);
  EXPECT_DOUBLE_EQ(p[3], 2.0);
}

TEST(EffectiveBasis, MergesBindingDifferences) {
  // Decreasing data, increasing constraint: every difference binds and the basis collapses to
  // the constant function.
  const Sample s = sample(200, 11, [](double x) { return -x; }, 0.05);
  const KnotSystem ks = make_knot_system(3, 4, {0.0, 1.0});
  const ConstraintSet S = derivative_sign_constraints(ks, 1, +1);
  const FitResult f = constrained_fit(design_matrix(ks, s.x), Eigen::Map<const Vector>(s.y.data(), 200), S);
  const EffectiveBasis e = merge_binding_linear(S, f);
  EXPECT_EQ(e.mode, EffectiveMode::linear_merged);
  EXPECT_EQ(e.dim(), 1);
  ASSERT_EQ(e.groups.size(), 1u);
  EXPECT_EQ(static_cast<int>(e.groups[0].size()), ks.size());
  EXPECT_LT((e.transform - Matrix::Ones(ks.size(), 1)).norm(), 1e-15);
}

TEST(EffectiveBasis, FitLiesInEffectiveSpan) {
  const Sample s = sample(300, 12, [](double x) { return std::sin(5 * x); }, 0.1);
  const KnotSystem ks = make_knot_system(3, 6, {0.0, 1.0});
  const ConstraintSet S = derivative_sign_constraints(ks, 1, +1);
  const FitResult f = constrained_fit(design_matrix(ks, s.x), Eigen::Map<const Vector>(s.y.data(), 300), S);
  const EffectiveBasis e = effective_basis(S, f);
  ASSERT_FALSE(f.binding.empty());
  EXPECT_EQ(e.dim(), ks.size() - static_cast<int>(f.binding.size()));
  // Homogeneous binding rows: b_hat = T alpha for some alpha.
  const Vector alpha = e.transform.colPivHouseholderQr().solve(f.coefficients);
  EXPECT_LT((e.transform * alpha - f.coefficients).norm(), 1e-9);
  // Binding rows vanish on the span.
  for (const auto& b : f.binding) EXPECT_LT((S.ineq.row(b.index) * e.transform).norm(), 1e-12);
}

TEST(EffectiveBasis, NonHomogeneousRowsAreEliminated) {
  ConstraintSet S(4);
  Vector r(4);
  r << 1, 1, 0, 0;
  S.add_equality(r, 2.0);
  FitResult f;
  f.coefficients = Vector::Zero(4);
  f.coefficients << 1, 1, 0, 0;
  f.binding.push_back({BindingConstraint::Kind::equality, 0, 0.0, 0.0});
  const EffectiveBasis e = effective_basis(S, f);
  EXPECT_EQ(e.dim(), 3);
  EXPECT_LT((r.transpose() * e.transform).norm(), 1e-15);
  ASSERT_EQ(e.eliminated.size(), 1u);
  // Inconsistent binding rows are refused.
  f.coefficients << 5, 5, 0, 0;
  EXPECT_THROW(merge_binding_linear(S, f), NumericalError);
}

TEST(EffectiveBasis, NonlinearTangentSpace) {
  const Vector b(Vector::LinSpaced(5, 0.5, 1.5));
  SmoothConstraint h{[](const Vector& x) { return x[0] * x[1] - x[2] * x[2]; },
                     [](const Vector& x) {
                       Vector g = Vector::Zero(x.size());
                       g[0] = x[1];
                       g[1] = x[0];
                       g[2] = -2 * x[2];
                       return g;
                     }};
  const EffectiveBasis e = reparameterize_nonlinear(h, b);
  EXPECT_EQ(e.dim(), 4);
  EXPECT_LT((h.gradient(b).transpose() * e.transform).norm(), 1e-14);
  ASSERT_EQ(e.eliminated.size(), 1u);
  EXPECT_EQ(e.eliminated[0], 2);  // largest gradient entry
  const EffectiveBasis forced = reparameterize_nonlinear(h, b, 0);
  EXPECT_EQ(forced.eliminated[0], 0);
  // Implicit derivative dh/db_l = -(dh/db_l)/(dh/db_0) for the eliminated coordinate.
  for (int c = 0; c < forced.dim(); ++c) {
    int free = -1;
    for (int j = 0; j < 5; ++j)
      if (forced.transform(j, c) == 1.0 && j != 0) free = j;
    ASSERT_GE(free, 0);
    EXPECT_NEAR(forced.transform(0, c), -h.gradient(b)[free] / h.gradient(b)[0], 1e-14);
  }
  Vector z = b;
  z[3] = 0.0;
  EXPECT_THROW(reparameterize_nonlinear(h, z, 4), NumericalError);
}

TEST(Transform, ExactlyConstrainedDataGivesZeroPath) {
  const KnotSystem ks = make_knot_system(3, 5, {0.0, 1.0});
  Vector beta(ks.size());
  beta << 0, 0, 0, 1, 2, 2, 3, 4;  // two flat stretches bind
  const Sample s = sample(250, 13, identity_fn, 0.0);
  std::vector<double> y;
  for (double x : s.x) y.push_back(eval_spline(ks, beta, x));
  const ConstraintSet S = derivative_sign_constraints(ks, 1, +1);
  const TransformOutput t = shapetest::transform(s.x, y, SplineBasis(ks), S);
  EXPECT_LT(t.path.cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT(t.sigma_hat, 1e-9);
  EXPECT_EQ(t.n_tilde, 250 - ks.size() - 2);
}

TEST(Transform, ResidualsAreAnnihilatedUpToNoise) {
  const Sample s = sample(400, 14, [](double x) { return x * x; }, 0.2);
  const KnotSystem ks = make_knot_system(3, 6, {0.0, 1.0});
  const ConstraintSet S = derivative_sign_constraints(ks, 1, +1);
  const TransformOutput t = shapetest::transform(s.x, s.y, SplineBasis(ks), S);
  ASSERT_EQ(t.v.size(), 400);
  EXPECT_NEAR(t.sigma_hat, std::sqrt(t.fit.residuals.squaredNorm() / 400), 1e-12);
  // Adding anything in the effective span leaves v unchanged.
  const Matrix P_eff = t.effective.apply_rows(t.ordered.P_sorted);
  const Vector v2 = t.plan->residuals(t.u_sorted + P_eff * Vector::LinSpaced(t.effective.dim(), -1.0, 2.0));
  EXPECT_LT((v2 - t.v).cwiseAbs().maxCoeff(), 1e-9);
  const TransformOutput p = shapetest::transform(s.x, s.y, SplineBasis(ks), S,
                                                 {FitOptions{}, std::nullopt, Direction::right, std::nullopt, true,
                                                  RecursionMethod::pseudo_inverse});
  EXPECT_LT((p.v - t.v).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Transform, HeteroscedasticScaling) {
  const Sample s = sample(300, 15, identity_fn, 0.3);
  const KnotSystem ks = make_knot_system(3, 4, {0.0, 1.0});
  const ConstraintSet S = derivative_sign_constraints(ks, 1, +1);
  TransformOptions opt;
  opt.scedastic = ScedasticFit{};
  opt.scedastic->basis = make_knot_system(1, 1, {0.0, 1.0});
  opt.scedastic->gamma = Vector::Zero(2);
  opt.scedastic->gamma << std::log(0.25), std::log(4.0);  // sigma from 0.5 to 2
  const TransformOutput t = shapetest::transform(s.x, s.y, SplineBasis(ks), S, opt);
  for (int k = 0; k < 300; k += 37) {
    const double x = t.ordered.x_sorted[k];
    EXPECT_NEAR(t.scale_sorted[k], opt.scedastic->sigma(x), 1e-12);
    EXPECT_NEAR(t.u_sorted[k], t.fit.residuals[t.ordered.perm[static_cast<std::size_t>(k)]] / t.scale_sorted[k], 1e-12);
  }
}

TEST(PseudoInverse, DowndateEdgeCases) {
  std::mt19937_64 g(40);
  Matrix B(4, 4);
  for (int j = 0; j < 4; ++j) B.col(j) = random_vector(4, g);
  const Matrix A = B * B.transpose() / 10.0 + Matrix::Identity(4, 4);
  const Matrix Ap = A.inverse();
  EXPECT_EQ((pinv_downdate(Ap, Vector::Zero(4), 7.0) - Ap).norm(), 0.0);
  const Vector p = random_vector(4, g);
  const Matrix ref = (A + p * p.transpose() / 7.0).inverse();
  EXPECT_LT((pinv_downdate(Ap, p, 7.0) - ref).norm(), 1e-8);
}

TEST(RecursiveResiduals, SmallLinearCaseMatchesNaive) {
  std::mt19937_64 g(41);
  const Sample s = sample(50, 42, identity_fn, 0.5);
  const SplineBasis basis(make_knot_system(1, 2, {0.0, 1.0}));
  ASSERT_EQ(basis.size(), 3);
  const OrderedSample os = order_and_trim(s.x, s.y, basis);
  const Vector u = random_vector(50, g);
  const Vector ref = oracle::naive_recursive_residuals(os.P_sorted, os.tail_start, u);
  EXPECT_LT((RecursiveResidualPlan(os.P_sorted, os.tail_start).residuals(u) - ref).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((PseudoInverseSweep(os.P_sorted, os.tail_start).residuals(u) - ref).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Transform, LeftSweepIsTheMirroredRightSweep) {
  const Sample s = sample(300, 43, [](double x) { return std::sin(4 * x); }, 0.2);
  const SplineBasis basis(make_knot_system(3, 5, {0.0, 1.0}));
  const ConstraintSet none(basis.size());
  std::vector<double> mirrored;
  for (double x : s.x) mirrored.push_back(1.0 - x);
  TransformOptions left;
  left.direction = Direction::left;
  const TransformOutput a = shapetest::transform(s.x, s.y, basis, none, left);
  const TransformOutput b = shapetest::transform(mirrored, s.y, basis, none);
  ASSERT_EQ(a.path.size(), b.path.size());
  EXPECT_LT((a.path - b.path).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_NEAR(a.sigma_hat, b.sigma_hat, 1e-10);
}

TEST(Ordering, TrimmingCountAndKnotPoints) {
  const SplineBasis basis(make_knot_system(3, 4, {0.0, 1.0}));
  std::vector<double> x;
  for (int i = 0; i < 99; ++i) x.push_back((i + 0.5) / 100.0);
  x.push_back(0.5);  // exactly on a knot
  const std::vector<double> y(x.size(), 0.0);
  const OrderedSample os = order_and_trim(x, y, basis, 0.75);
  const double thr = std::pow(100.0, -0.75);
  int expected = 0;
  for (double xi : x)
    for (double k : {0.25, 0.5, 0.75, 1.0})
      if (xi <= k && xi + thr >= k && (k - xi) < 0.25) {
        ++expected;
        break;
      }
  EXPECT_EQ(os.trimmed_count(), expected);
  for (int k = 0; k < os.size(); ++k)
    if (os.x_sorted[k] == 0.5) {
      EXPECT_TRUE(os.trimmed[static_cast<std::size_t>(k)]);
      EXPECT_DOUBLE_EQ(os.x_tilde[k], 0.5);
    }
}

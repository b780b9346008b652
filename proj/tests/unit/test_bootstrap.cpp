#include <shapetest/bootstrap.hpp>
#include <shapetest/simharness.hpp>

#include <gtest/gtest.h>

#include "oracles.hpp"

#include <cstdlib>

using namespace shapetest;

namespace {

struct Fixture {
  std::vector<double> x, y;
  Hypothesis h;
};

Fixture scenario(int id, int n, std::uint64_t seed) {
  ScenarioConfig cfg;
  cfg.scenario = id;
  cfg.n = n;
  cfg.seed = seed;
  auto [x, y] = generate(cfg, 0);
  return {std::move(x), std::move(y), scenario_hypothesis(cfg)};
}

}  // namespace

TEST(Bootstrap, PoolIsDemeanedUnconstrainedResiduals) {
  const Fixture f = scenario(1, 300, 2);
  const BootstrapEngine e(f.x, f.y, f.h.basis, f.h.primary());
  EXPECT_LT(std::abs(e.pool().mean()), 1e-12);
  const Matrix X = f.h.basis.design(f.x);
  const Vector y = Eigen::Map<const Vector>(f.y.data(), 300);
  const Vector u = ols_fit(X, y).residuals;
  // Same multiset up to the mean shift.
  std::vector<double> a(e.pool().data(), e.pool().data() + 300), b(u.data(), u.data() + 300);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  for (int i = 0; i < 300; ++i) EXPECT_NEAR(a[static_cast<std::size_t>(i)], b[static_cast<std::size_t>(i)] - u.mean(), 1e-12);
}

TEST(Bootstrap, ResponsesAnchoredAtConstrainedFit) {
  const Fixture f = scenario(4, 200, 3);
  const BootstrapEngine e(f.x, f.y, f.h.basis, f.h.primary());
  const Vector ys = e.draw_response(5, 1);
  const auto& perm = e.original().ordered.perm;
  std::vector<double> pool(e.pool().data(), e.pool().data() + e.pool().size());
  std::sort(pool.begin(), pool.end());
  for (int k = 0; k < 200; ++k) {
    const double u = ys[k] - e.original().fit.fitted[perm[static_cast<std::size_t>(k)]];
    const auto it = std::lower_bound(pool.begin(), pool.end(), u - 1e-12);
    ASSERT_NE(it, pool.end());
    EXPECT_NEAR(*it, u, 1e-12);
  }
}

TEST(Bootstrap, CorollaryRoutesAgree) {
  for (int id : {1, 2, 4, 5}) {
    const Fixture f = scenario(id, 200, 11);
    const BootstrapEngine e(f.x, f.y, f.h.basis, f.h.primary());
    for (std::uint64_t b = 0; b < 10; ++b) {
      const TestStatistics a = e.replicate(99, b, BootstrapRoute::y_star);
      const TestStatistics c = e.replicate(99, b, BootstrapRoute::u_star);
      EXPECT_NEAR(a.ks, c.ks, 1e-10) << id;
      EXPECT_NEAR(a.cvm, c.cvm, 1e-10) << id;
      EXPECT_NEAR(a.ad, c.ad, 1e-10) << id;
    }
  }
}

TEST(Bootstrap, SingleReplication) {
  const Fixture f = scenario(1, 200, 4);
  const BootstrapReport r = bootstrap_critical_values(f.x, f.y, f.h.basis, f.h.primary(), 1, {0.1, 0.05}, 7);
  ASSERT_EQ(r.stats.rows(), 1);
  for (const auto& cv : r.critical_values) {
    EXPECT_EQ(cv.ks, r.stats(0, 0));
    EXPECT_EQ(cv.cvm, r.stats(0, 1));
    EXPECT_EQ(cv.ad, r.stats(0, 2));
  }
  EXPECT_FALSE(r.warnings.empty());
}

TEST(Bootstrap, QuantileIndexRule) {
  Matrix stats(19, 3);
  for (int i = 0; i < 19; ++i) stats.row(i) << 19 - i, i + 1, 2 * (i + 1);
  std::vector<std::string> w;
  // ceil(0.9 * 20) = 18th order statistic.
  const CriticalValues cv = empirical_critical_values(stats, 0.1, &w);
  EXPECT_EQ(cv.ks, 18.0);
  EXPECT_EQ(cv.cvm, 18.0);
  EXPECT_EQ(cv.ad, 36.0);
  EXPECT_TRUE(w.empty());
  // ceil(0.95 * 20) = 19: still attainable.
  EXPECT_EQ(empirical_critical_values(stats, 0.05, &w).ks, 19.0);
  EXPECT_TRUE(w.empty());
  EXPECT_EQ(empirical_critical_values(stats, 0.01, &w).ks, 19.0);
  EXPECT_EQ(w.size(), 1u);
  EXPECT_THROW(empirical_critical_values(stats, 1.5, nullptr), InvalidArgument);
}

TEST(Bootstrap, CriticalValuesMonotoneInLevel) {
  const Fixture f = scenario(1, 300, 5);
  const BootstrapReport r = bootstrap_critical_values(f.x, f.y, f.h.basis, f.h.primary(), 199, {0.1, 0.05, 0.01}, 8);
  const auto& c10 = r.at(0.10);
  const auto& c5 = r.at(0.05);
  const auto& c1 = r.at(0.01);
  EXPECT_LE(c10.ks, c5.ks);
  EXPECT_LE(c5.ks, c1.ks);
  EXPECT_LE(c10.cvm, c5.cvm);
  EXPECT_LE(c5.cvm, c1.cvm);
  EXPECT_LE(c10.ad, c5.ad);
  EXPECT_LE(c5.ad, c1.ad);
  EXPECT_THROW(r.at(0.2), InvalidArgument);
}

TEST(Bootstrap, IndependentOfThreadCount) {
  const Fixture f = scenario(2, 300, 6);
  setenv("SHAPETEST_THREADS", "1", 1);
  const BootstrapReport a = bootstrap_critical_values(f.x, f.y, f.h.basis, f.h.primary(), 50, {0.1}, 9);
  setenv("SHAPETEST_THREADS", "4", 1);
  const BootstrapReport b = bootstrap_critical_values(f.x, f.y, f.h.basis, f.h.primary(), 50, {0.1}, 9);
  unsetenv("SHAPETEST_THREADS");
  EXPECT_EQ(a.stats, b.stats);
  const BootstrapReport c = bootstrap_critical_values(f.x, f.y, f.h.basis, f.h.primary(), 50, {0.1}, 10);
  EXPECT_NE(a.stats, c.stats);
}

TEST(Bootstrap, HeteroscedasticMode) {
  ScenarioConfig cfg;
  cfg.n = 400;
  cfg.heteroscedastic = true;
  auto [x, y] = generate(cfg, 0);
  const Hypothesis h = scenario_hypothesis(cfg);
  BootstrapOptions opt;
  opt.heteroscedastic = true;
  const BootstrapEngine e(x, y, h.basis, h.primary(), opt);
  ASSERT_TRUE(e.original().scale_sorted.size() == 400);
  EXPECT_GT(e.original().scale_sorted[399], 1.5 * e.original().scale_sorted[0]);
  EXPECT_LT(std::abs(e.pool().mean()), 1e-12);
  const TestStatistics t = e.replicate(1, 0);
  EXPECT_GT(t.ks, 0.0);
  // Normalised residuals have unit mean square in the original sample.
  EXPECT_NEAR(e.original().sigma_hat, 1.0, 0.2);
}

TEST(Bootstrap, NullCriticalValueNearBrownianQuantile) {
  ScenarioConfig cfg;
  cfg.scenario = 1;
  cfg.n = 1000;
  cfg.sigma = 0.25;
  cfg.l_prime = 6;
  cfg.seed = 20240601;
  const auto [x, y] = generate(cfg, 0);
  const Hypothesis h = scenario_hypothesis(cfg);
  const BootstrapReport r = bootstrap_critical_values(x, y, h.basis, h.primary(), 399, {0.05}, 3);
  const double bm = oracle::random_walk_sup_quantile(10000, 100000, 0.95, 5);
  EXPECT_NEAR(r.at(0.05).ks, bm, 0.15);
}

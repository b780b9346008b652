#include <shapetest/bootstrap.hpp>
#include <shapetest/parallel.hpp>
#include <shapetest/random.hpp>

#include <algorithm>
#include <functional>
#include <cmath>
#include <sstream>

namespace shapetest {

const CriticalValues& BootstrapReport::at(double level) const {
  for (const auto& cv : critical_values)
    if (std::abs(cv.level - level) < 1e-12) return cv;
  throw InvalidArgument("no critical value for the requested level");
}

namespace {

TransformOptions with_scedastic(std::span<const double> xs, std::span<const double> ys, const SplineBasis& basis,
                                const BootstrapOptions& options) {
  TransformOptions t = options.transform;
  if (!options.heteroscedastic || t.scedastic) return t;
  const Matrix X = basis.design(xs);
  const Vector y = Eigen::Map<const Vector>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  const FitResult u = unconstrained_fit(X, y, t.fit.penalty);
  t.scedastic = scedastic_fit(xs, u.residuals, make_knot_system(1, options.scedastic_knots, basis.domain()));
  return t;
}

}  // namespace

BootstrapEngine::BootstrapEngine(std::span<const double> xs, std::span<const double> ys, const SplineBasis& basis,
                                 const ConstraintSet& S, const BootstrapOptions& options)
    : options_(options) {
  options_.transform = with_scedastic(xs, ys, basis, options);
  original_ = transform(xs, ys, basis, S, options_.transform);
  observed_ = compute_statistics(original_);
  if (!original_.plan)
    original_.plan = std::make_shared<RecursiveResidualPlan>(
        original_.effective.apply_rows(original_.ordered.P_sorted), original_.ordered.tail_start);

  // STEP 1: unconstrained residuals, demeaned (and normalised in the heteroscedastic case).
  const Matrix X = basis.design(xs);
  const Vector y = Eigen::Map<const Vector>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  const FitResult unc = unconstrained_fit(X, y, options_.transform.fit.penalty);
  const auto n = static_cast<Eigen::Index>(xs.size());
  const auto& perm = original_.ordered.perm;
  pool_.resize(n);
  fitted_.resize(n);
  scale_ = original_.scale_sorted;
  for (Eigen::Index k = 0; k < n; ++k) {
    const int i = perm[static_cast<std::size_t>(k)];
    pool_[k] = unc.residuals[i] / scale_[k];
    fitted_[k] = original_.fit.fitted[i];
  }
  pool_.array() -= pool_.mean();

  const Matrix P_eff = original_.effective.apply_rows(original_.ordered.P_sorted);
  if (P_eff.cols() > 0) {
    Eigen::ColPivHouseholderQR<Matrix> qr(P_eff);
    const auto r = qr.rank();
    basis_q_ = (qr.householderQ() * Matrix::Identity(n, r)).eval();
  } else {
    basis_q_.resize(n, 0);
  }
  off_span_ = fitted_ - basis_q_ * (basis_q_.transpose() * fitted_);
}

Vector BootstrapEngine::draw_response(std::uint64_t seed, std::uint64_t index) const {
  auto rng = make_stream(seed, index, 0xB007);
  const auto n = pool_.size();
  Vector y(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double u = pool_[static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n)))];
    y[k] = fitted_[k] + scale_[k] * u;
  }
  return y;
}

TestStatistics BootstrapEngine::statistics_for(const Vector& y_star, BootstrapRoute route) const {
  const Vector centred = y_star - off_span_;
  const Vector u_hat = centred - basis_q_ * (basis_q_.transpose() * centred);
  const Vector u_norm = u_hat.cwiseQuotient(scale_);
  const double sigma = std::sqrt(u_norm.squaredNorm() / static_cast<double>(u_norm.size()));
  // The y* shortcut relies on annihilation of the span, which normalisation by sigma(x) breaks.
  const bool hetero = options_.transform.scedastic.has_value();
  const Vector& input = (route == BootstrapRoute::u_star || hetero) ? u_norm : centred;
  const Vector v = original_.plan->residuals(input);
  return compute_statistics(partial_sum_path(v), sigma, original_.n_tilde);
}

TestStatistics BootstrapEngine::replicate(std::uint64_t seed, std::uint64_t index) const {
  return replicate(seed, index, options_.route);
}

TestStatistics BootstrapEngine::replicate(std::uint64_t seed, std::uint64_t index, BootstrapRoute route) const {
  return statistics_for(draw_response(seed, index), route);
}

CriticalValues empirical_critical_values(const Matrix& stats, double level, std::vector<std::string>* warnings) {
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("levels must lie in (0, 1)");
  const auto B = stats.rows();
  if (B < 1) throw InvalidArgument("need at least one replication");
  const double pos = (1.0 - level) * static_cast<double>(B + 1);
  auto k = static_cast<Eigen::Index>(std::ceil(pos - 1e-9));
  if (k > B) {
    if (warnings) {
      std::ostringstream msg;
      msg << "B=" << B << " is too small for level " << level << " (need B >= " << std::ceil(1.0 / level - 1.0)
          << "); using the largest replication";
      warnings->push_back(msg.str());
    }
    k = B;
  }
  k = std::max<Eigen::Index>(k, 1);
  CriticalValues cv;
  cv.level = level;
  double* out[3] = {&cv.ks, &cv.cvm, &cv.ad};
  for (int c = 0; c < 3; ++c) {
    std::vector<double> col(stats.col(c).data(), stats.col(c).data() + B);
    std::nth_element(col.begin(), col.begin() + (k - 1), col.end());
    *out[c] = col[static_cast<std::size_t>(k - 1)];
  }
  return cv;
}

BootstrapReport bootstrap_critical_values(std::span<const double> xs, std::span<const double> ys,
                                          const SplineBasis& basis, const ConstraintSet& S, int B,
                                          const std::vector<double>& levels, std::uint64_t seed,
                                          const BootstrapOptions& options) {
  if (B < 1) throw InvalidArgument("need at least one bootstrap replication");
  const BootstrapEngine engine(xs, ys, basis, S, options);
  BootstrapReport rep;
  rep.replications = B;
  rep.seed = seed;
  rep.observed = engine.observed();
  rep.stats.resize(B, 3);
  parallel_for(static_cast<std::size_t>(B), [&](std::size_t b) {
    const TestStatistics t = engine.replicate(seed, b);
    rep.stats(static_cast<Eigen::Index>(b), 0) = t.ks;
    rep.stats(static_cast<Eigen::Index>(b), 1) = t.cvm;
    rep.stats(static_cast<Eigen::Index>(b), 2) = t.ad;
  });
  std::vector<double> sorted = levels;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  for (double a : sorted) rep.critical_values.push_back(empirical_critical_values(rep.stats, a, &rep.warnings));
  return rep;
}

}  // namespace shapetest

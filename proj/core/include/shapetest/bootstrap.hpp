#pragma once

#include <shapetest/khmaladze.hpp>
#include <shapetest/teststats.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace shapetest {

enum class BootstrapRoute {
  y_star,  // feed y* (minus the part of the fit outside the effective span) to the recursion
  u_star,  // recompute residuals by the full-sample projection first
};

struct BootstrapOptions {
  TransformOptions transform;
  // Resample normalised residuals and rescale by sigma(x); the scedastic fit is estimated from the
  // unconstrained residuals unless transform.scedastic is already set.
  bool heteroscedastic = false;
  int scedastic_knots = 4;
  BootstrapRoute route = BootstrapRoute::y_star;
};

struct CriticalValues {
  double level = 0.0;
  double ks = 0.0;
  double cvm = 0.0;
  double ad = 0.0;
};

struct BootstrapReport {
  Matrix stats;  // B x 3: KS, CvM, AD
  std::vector<CriticalValues> critical_values;
  int replications = 0;
  std::uint64_t seed = 0;
  TestStatistics observed;
  std::vector<std::string> warnings;

  const CriticalValues& at(double level) const;
};

/// Frozen artifacts of one sample: constrained fit, effective basis, recursion plan and the
/// resampling pool. Replications are independent and may run concurrently.
class BootstrapEngine {
 public:
  BootstrapEngine(std::span<const double> xs, std::span<const double> ys, const SplineBasis& basis,
                  const ConstraintSet& S, const BootstrapOptions& options = {});

  const TransformOutput& original() const { return original_; }
  const TestStatistics& observed() const { return observed_; }
  const Vector& pool() const { return pool_; }

  TestStatistics replicate(std::uint64_t seed, std::uint64_t index) const;
  TestStatistics replicate(std::uint64_t seed, std::uint64_t index, BootstrapRoute route) const;
  // Bootstrap response in sweep order for (seed, index).
  Vector draw_response(std::uint64_t seed, std::uint64_t index) const;

 private:
  TestStatistics statistics_for(const Vector& y_star, BootstrapRoute route) const;

  BootstrapOptions options_;
  TransformOutput original_;
  TestStatistics observed_;
  Vector pool_;         // demeaned (normalised) unconstrained residuals
  Vector fitted_;       // constrained fit in sweep order
  Vector off_span_;     // part of the fit outside span(P_eff), sweep order
  Matrix basis_q_;      // orthonormal basis of span(P_eff) in sweep order
  Vector scale_;        // sigma(x) in sweep order
};

// Order statistic ceil((1 - level)(B + 1)) of each column; warns when B < 1/level - 1.
CriticalValues empirical_critical_values(const Matrix& stats, double level, std::vector<std::string>* warnings);

BootstrapReport bootstrap_critical_values(std::span<const double> xs, std::span<const double> ys,
                                          const SplineBasis& basis, const ConstraintSet& S, int B,
                                          const std::vector<double>& levels, std::uint64_t seed,
                                          const BootstrapOptions& options = {});

}  // namespace shapetest

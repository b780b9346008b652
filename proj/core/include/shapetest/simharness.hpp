#pragma once

#include <shapetest/bootstrap.hpp>
#include <shapetest/shape_spec.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace shapetest {

enum class SplineMode { bspline, pspline };
enum class Statistic { ks = 0, cvm = 1, ad = 2 };

std::string to_string(SplineMode m);
std::string to_string(Statistic s);

struct ScenarioConfig {
  int scenario = 1;  // 1..5
  int n = 1000;
  double sigma = 0.25;
  int l_prime = 6;  // per subinterval for scenario 2
  int degree = 3;
  SplineMode mode = SplineMode::bspline;
  std::vector<double> levels{0.10, 0.05, 0.01};
  int mc_reps = 100;
  int bootstrap_reps = 199;
  bool warp = false;
  std::uint64_t seed = 1;

  double a = 50.0;                  // scenario 4
  Join join = Join::continuous;     // scenario 2
  bool scenario3_variant = false;   // (10x - 5)^3 leading term instead of the printed (10x - 0.5)^3
  bool heteroscedastic = false;     // errors scaled by (0.5 + x); bootstrap resamples normalised residuals
  std::optional<double> varsigma;
  Direction direction = Direction::right;
  std::vector<double> lambda_grid = default_lambda_grid();
  int lambda_pilot = 20;            // draws used to pick the modal CV penalty

  void validate() const;
};

double scenario_function(const ScenarioConfig& cfg, double x);
double switch_point_scenario2();

// x ~ U[0,1], u ~ N(0, sigma^2) (times 0.5 + x when heteroscedastic), y = m(x) + u.
std::pair<std::vector<double>, std::vector<double>> generate(const ScenarioConfig& cfg, std::uint64_t draw);

// Null hypothesis tested in each scenario.
Hypothesis scenario_hypothesis(const ScenarioConfig& cfg);

struct RejectionTable {
  std::vector<double> levels;
  std::vector<std::array<int, 3>> rejections;  // per level: KS, CvM, AD
  int attempted = 0;
  int completed = 0;
  std::vector<std::string> failures;
  std::vector<std::string> warnings;
  std::optional<double> lambda;

  double rate(Statistic s, std::size_t level_index) const;
};

// Member of the hypothesis used for the data (the best-fitting one for a family).
const ConstraintSet& select_member(const Hypothesis& h, const Matrix& X, const Vector& y, const FitOptions& options);

// Modal cross-validated penalty over the first cfg.lambda_pilot draws (smallest on ties).
double modal_lambda(const ScenarioConfig& cfg, const Hypothesis& h);

RejectionTable run_mc(const ScenarioConfig& cfg);

// Long format: statistic,level,rejections,completed,rate
std::string to_csv(const RejectionTable& table);
// Rows KS/CvM/AD, one column per level.
std::string format_table(const RejectionTable& table);

}  // namespace shapetest

#pragma once

#include <shapetest/bspline.hpp>
#include <shapetest/constraints.hpp>

#include <cmath>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace shapetest {

// lambda * b'Db added to the residual sum of squares.
struct Penalty {
  Matrix matrix;
  double lambda = 0.0;
};

struct BindingConstraint {
  enum class Kind { inequality, equality, quadratic, positivity };
  Kind kind = Kind::inequality;
  int index = 0;  // row in the matching block of the ConstraintSet (coefficient index for positivity)
  double multiplier = 0.0;
  double slack = 0.0;
};

struct FitResult {
  Vector coefficients;
  Vector fitted;
  Vector residuals;
  double sse = 0.0;
  std::vector<BindingConstraint> binding;
  std::optional<double> penalty_lambda;
  // Lagrange multipliers; inequality block covers ineq rows then positivity rows.
  Vector ineq_multipliers;
  Vector eq_multipliers;
  Vector quad_multipliers;
  int iterations = 0;
  bool constrained = false;
};

struct FitOptions {
  std::optional<Penalty> penalty;
  double binding_tol = 1e-7;
  double feasibility_tol = 1e-8;
  int max_sqp_iterations = 200;
};

FitResult ols_fit(const Matrix& X, const Vector& y);
FitResult penalized_fit(const Matrix& X, const Vector& y, const Penalty& penalty);
FitResult unconstrained_fit(const Matrix& X, const Vector& y, const std::optional<Penalty>& penalty);

FitResult constrained_fit(const Matrix& X, const Vector& y, const ConstraintSet& S, const FitOptions& options = {});

// Member with the smallest SSE; ties go to the lower index. Infeasible members are skipped.
std::pair<int, FitResult> constrained_fit_family(const Matrix& X, const Vector& y,
                                                 const std::vector<ConstraintSet>& family,
                                                 const FitOptions& options = {});

struct KktReport {
  double stationarity = 0.0;
  double primal = 0.0;
  double dual = 0.0;  // most negative inequality multiplier, as a positive number
  double complementarity = 0.0;
};

KktReport kkt_check(const Matrix& X, const Vector& y, const ConstraintSet& S, const FitResult& fit,
                    const std::optional<Penalty>& penalty = std::nullopt);

Matrix pspline_penalty(int L, int order = 2);
// Block-diagonal penalty, one block per piece.
Matrix pspline_penalty(const SplineBasis& basis, int order = 2);

std::vector<double> default_lambda_grid();
double cross_validate_lambda(const Matrix& X, const Vector& y, const Matrix& D, std::span<const double> grid);
// Leave-one-out criterion for a single lambda; +inf if some leverage is 1.
double loo_criterion(const Matrix& X, const Vector& y, const Matrix& D, double lambda);

struct ScedasticFit {
  enum class Form { log_squared, linear_combination };

  KnotSystem basis = make_knot_system(1, 4);
  Vector gamma;
  Form form = Form::log_squared;
  double scale = 1.0;  // multiplies the fitted variance so that mean(u^2 / sigma^2) = 1
  double floor = 1e-12;

  double variance(double x) const;
  double sigma(double x) const { return std::sqrt(variance(x)); }
};

ScedasticFit scedastic_fit(std::span<const double> xs, const Vector& residuals, const KnotSystem& ks1,
                           ScedasticFit::Form form = ScedasticFit::Form::log_squared);

}  // namespace shapetest

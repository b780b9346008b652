#pragma once

#include <shapetest/bspline.hpp>

#include <optional>
#include <string>
#include <vector>

namespace shapetest {

// b'Qb + linear'b + constant <= 0
struct QuadraticConstraint {
  Matrix Q;
  Vector linear;
  double constant = 0.0;

  double value(const Vector& b) const;
  Vector gradient(const Vector& b) const;
};

/// Constraint set on spline coefficients:
///   ineq * b >= ineq_rhs, eq * b == eq_rhs, quadratic[j](b) <= 0,
/// and optionally b >= positivity_margin componentwise.
struct ConstraintSet {
  int dim = 0;
  Matrix ineq;
  Vector ineq_rhs;
  Matrix eq;
  Vector eq_rhs;
  std::vector<QuadraticConstraint> quadratic;
  bool positivity = false;
  double positivity_margin = 0.0;
  std::string label;

  ConstraintSet() : ConstraintSet(0) {}
  explicit ConstraintSet(int dim);

  int num_inequalities() const { return static_cast<int>(ineq.rows()); }
  int num_equalities() const { return static_cast<int>(eq.rows()); }
  int num_quadratic() const { return static_cast<int>(quadratic.size()); }

  void add_inequality(const Vector& row, double rhs);
  void add_equality(const Vector& row, double rhs);
  void add_quadratic(QuadraticConstraint qc);

  // Inequality rows with the positivity rows appended (identity block).
  Matrix all_inequalities() const;
  Vector all_inequality_rhs() const;

  // Block embedding into a larger coefficient vector starting at offset.
  ConstraintSet embedded(int offset, int total_dim) const;
  ConstraintSet& append(const ConstraintSet& other);

  // Largest violation over all constraint kinds (0 when feasible).
  double max_violation(const Vector& b) const;
};

ConstraintSet derivative_sign_constraints(const KnotSystem& ks, int r, int sign, double bound = 0.0,
                                          bool boundary_refinement = false);

enum class Join { none, continuous, smooth };

struct IntervalShape {
  KnotSystem knots;
  int order = 1;  // derivative order r
  int sign = 1;   // +1 or -1
};

// Knot systems must tile the domain left to right. Coefficients are stacked in the same order.
ConstraintSet partition_constraints(const std::vector<IntervalShape>& pieces, Join join);

ConstraintSet symmetry_constraints(const KnotSystem& left, const KnotSystem& right, double s0);

enum class MeanPair { AG, AH, GA, GG, GH, HA, HG, HH };

struct QuadraticShape {
  enum class Kind { r_convex, rho_convex, mn_convex };
  Kind kind = Kind::r_convex;
  double parameter = 0.0;
  MeanPair pair = MeanPair::AG;

  static QuadraticShape r_convex(double r) { return {Kind::r_convex, r, MeanPair::AG}; }
  static QuadraticShape rho_convex(double rho) { return {Kind::rho_convex, rho, MeanPair::AG}; }
  static QuadraticShape mn_convex(MeanPair p) { return {Kind::mn_convex, 0.0, p}; }
};

std::string to_string(MeanPair p);
std::optional<MeanPair> mean_pair_from_string(const std::string& s);
std::string to_string(const QuadraticShape& s);

ConstraintSet quadratic_shape_constraints(const KnotSystem& ks, const QuadraticShape& shape,
                                          double positivity_margin = 0.0);

// Pointwise shape expressions in terms of value, first and second derivative.
// The shape holds at x iff the expression is >= 0.
double r_convex_expression(double v, double d1, double d2, double r);
double rho_convex_expression(double v, double d1, double d2, double rho);
double mn_convex_expression(MeanPair p, double x, double v, double d1, double d2);

// One U-shape set per unique knot: decreasing left of the switch, increasing right of it.
std::vector<ConstraintSet> quasiconvexity_candidates(const KnotSystem& ks);

}  // namespace shapetest

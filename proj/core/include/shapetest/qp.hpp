#pragma once

#include <shapetest/bspline.hpp>

#include <vector>

namespace shapetest {

// minimize 0.5 x'Gx + c'x  subject to  eq x = eq_rhs,  ineq x >= ineq_rhs
struct QpProblem {
  Matrix hessian;
  Vector linear;
  Matrix eq;
  Vector eq_rhs;
  Matrix ineq;
  Vector ineq_rhs;
};

struct QpSolution {
  Vector x;
  Vector eq_multipliers;
  Vector ineq_multipliers;  // >= 0; zero for inactive rows
  std::vector<int> active;  // active inequality rows at the solution
  int iterations = 0;
  double objective = 0.0;
  double ridge = 0.0;  // added to the diagonal when G was not numerically positive definite
};

// Dual active-set method of Goldfarb and Idnani. Throws InfeasibleError when the
// constraints are inconsistent and NumericalError when the iteration limit is hit.
QpSolution solve_qp(const QpProblem& problem);

}  // namespace shapetest

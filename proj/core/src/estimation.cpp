#include <shapetest/estimation.hpp>
#include <shapetest/linalg.hpp>
#include <shapetest/parallel.hpp>
#include <shapetest/qp.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace shapetest {

namespace {

void check_dims(const Matrix& X, const Vector& y) {
  if (X.rows() != y.size()) throw InvalidArgument("design rows and response length differ");
  if (X.rows() < 1) throw InvalidArgument("need at least one observation");
}

FitResult finish(const Matrix& X, const Vector& y, Vector b) {
  FitResult f;
  f.fitted = X * b;
  f.residuals = y - f.fitted;
  f.sse = f.residuals.squaredNorm();
  f.coefficients = std::move(b);
  return f;
}

}  // namespace

FitResult ols_fit(const Matrix& X, const Vector& y) {
  check_dims(X, y);
  Eigen::JacobiSVD<Matrix> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double m = static_cast<double>(std::max(X.rows(), X.cols()));
  svd.setThreshold(m * std::numeric_limits<double>::epsilon());
  return finish(X, y, svd.solve(y));
}

FitResult penalized_fit(const Matrix& X, const Vector& y, const Penalty& penalty) {
  check_dims(X, y);
  if (penalty.lambda < 0.0) throw InvalidArgument("penalty parameter must be >= 0");
  if (penalty.lambda == 0.0) {
    FitResult f = ols_fit(X, y);
    f.penalty_lambda = 0.0;
    return f;
  }
  if (penalty.matrix.rows() != X.cols() || penalty.matrix.cols() != X.cols())
    throw InvalidArgument("penalty matrix has wrong dimension");
  const Matrix H = X.transpose() * X + penalty.lambda * penalty.matrix;
  const Vector rhs = X.transpose() * y;
  Eigen::LLT<Matrix> llt(H);
  Vector b = llt.info() == Eigen::Success ? Vector(llt.solve(rhs)) : Vector(pseudo_inverse_psd(H) * rhs);
  FitResult f = finish(X, y, std::move(b));
  f.penalty_lambda = penalty.lambda;
  return f;
}

FitResult unconstrained_fit(const Matrix& X, const Vector& y, const std::optional<Penalty>& penalty) {
  return penalty ? penalized_fit(X, y, *penalty) : ols_fit(X, y);
}

namespace {

struct Objective {
  Matrix H;  // X'X + lambda D
  Vector c;  // -X'y
  double f(const Vector& b) const { return 0.5 * b.dot(H * b) + c.dot(b); }
  Vector grad(const Vector& b) const { return H * b + c; }
};

Objective make_objective(const Matrix& X, const Vector& y, const std::optional<Penalty>& penalty) {
  Objective o{X.transpose() * X, -(X.transpose() * y)};
  if (penalty && penalty->lambda != 0.0) {
    if (penalty->matrix.rows() != X.cols() || penalty->matrix.cols() != X.cols())
      throw InvalidArgument("penalty matrix has wrong dimension");
    o.H += penalty->lambda * penalty->matrix;
  }
  return o;
}

// Sum of constraint violations (l1 measure used by the merit function).
double violation_sum(const ConstraintSet& S, const Matrix& A, const Vector& cA, const Vector& b) {
  double v = 0.0;
  if (A.rows() > 0) v += (cA - A * b).cwiseMax(0.0).sum();
  if (S.eq.rows() > 0) v += (S.eq * b - S.eq_rhs).cwiseAbs().sum();
  for (const auto& qc : S.quadratic) v += std::max(0.0, qc.value(b));
  return v;
}

void collect_binding(const ConstraintSet& S, const Matrix& A, const Vector& cA, FitResult& f,
                     const std::vector<int>& qp_active, double tol) {
  const Vector& b = f.coefficients;
  const int mi = S.num_inequalities();
  std::vector<char> active(static_cast<std::size_t>(A.rows() + S.num_quadratic()), 0);
  for (int r : qp_active) active[static_cast<std::size_t>(r)] = 1;
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    const double slack = A.row(r).dot(b) - cA[r];
    if (!active[static_cast<std::size_t>(r)] && std::abs(slack) > tol * std::max(1.0, A.row(r).norm())) continue;
    BindingConstraint bc;
    bc.kind = r < mi ? BindingConstraint::Kind::inequality : BindingConstraint::Kind::positivity;
    bc.index = r < mi ? static_cast<int>(r) : static_cast<int>(r - mi);
    bc.multiplier = f.ineq_multipliers.size() > r ? f.ineq_multipliers[r] : 0.0;
    bc.slack = slack;
    f.binding.push_back(bc);
  }
  for (int e = 0; e < S.num_equalities(); ++e) {
    BindingConstraint bc;
    bc.kind = BindingConstraint::Kind::equality;
    bc.index = e;
    bc.multiplier = f.eq_multipliers.size() > e ? f.eq_multipliers[e] : 0.0;
    bc.slack = S.eq.row(e).dot(b) - S.eq_rhs[e];
    f.binding.push_back(bc);
  }
  for (int j = 0; j < S.num_quadratic(); ++j) {
    const auto& qc = S.quadratic[static_cast<std::size_t>(j)];
    const double g = qc.value(b);
    const bool in_qp = active[static_cast<std::size_t>(A.rows() + j)] != 0;
    if (!in_qp && std::abs(g) > tol * std::max(1.0, qc.gradient(b).norm())) continue;
    BindingConstraint bc;
    bc.kind = BindingConstraint::Kind::quadratic;
    bc.index = j;
    bc.multiplier = f.quad_multipliers.size() > j ? f.quad_multipliers[j] : 0.0;
    bc.slack = -g;
    f.binding.push_back(bc);
  }
}

FitResult linear_constrained_fit(const Matrix& X, const Vector& y, const ConstraintSet& S, const FitOptions& opt) {
  const Objective obj = make_objective(X, y, opt.penalty);
  QpProblem qp{obj.H, obj.c, S.eq, S.eq_rhs, S.all_inequalities(), S.all_inequality_rhs()};
  const QpSolution sol = solve_qp(qp);
  FitResult f = finish(X, y, sol.x);
  f.ineq_multipliers = sol.ineq_multipliers;
  f.eq_multipliers = sol.eq_multipliers;
  f.quad_multipliers = Vector::Zero(0);
  f.iterations = sol.iterations;
  collect_binding(S, qp.ineq, qp.ineq_rhs, f, sol.active, opt.binding_tol);
  return f;
}

struct StepQp {
  QpSolution sol;
  bool ok = false;
};

// QP in the step d at b: quadratic constraints linearised, constants optionally overridden.
StepQp solve_step(const Objective& obj, const ConstraintSet& S, const Matrix& A, const Vector& cA, const Matrix& W,
                  const Vector& b, const std::vector<double>* quad_values) {
  const int mq = S.num_quadratic();
  QpProblem qp;
  qp.hessian = W;
  qp.linear = obj.grad(b);
  qp.eq = S.eq;
  qp.eq_rhs = S.eq_rhs - S.eq * b;
  qp.ineq.resize(A.rows() + mq, b.size());
  qp.ineq_rhs.resize(A.rows() + mq);
  if (A.rows() > 0) {
    qp.ineq.topRows(A.rows()) = A;
    qp.ineq_rhs.head(A.rows()) = cA - A * b;
  }
  for (int j = 0; j < mq; ++j) {
    const auto& qc = S.quadratic[static_cast<std::size_t>(j)];
    qp.ineq.row(A.rows() + j) = -qc.gradient(b).transpose();
    qp.ineq_rhs[A.rows() + j] = quad_values ? (*quad_values)[static_cast<std::size_t>(j)] : qc.value(b);
  }
  StepQp out;
  try {
    out.sol = solve_qp(qp);
    out.ok = true;
  } catch (const InfeasibleError&) {
    out.ok = false;
  }
  return out;
}

Matrix lagrangian_hessian(const Objective& obj, const ConstraintSet& S, const Vector& mu) {
  Matrix W = obj.H;
  for (int j = 0; j < S.num_quadratic(); ++j) {
    const auto& Q = S.quadratic[static_cast<std::size_t>(j)].Q;
    W += mu[j] * (Q + Q.transpose());
  }
  W = 0.5 * (W + W.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(W);
  const double floor = 1e-8 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  if (es.eigenvalues().minCoeff() >= floor) return W;
  const Vector ev = es.eigenvalues().cwiseMax(floor);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

FitResult sqp_fit(const Matrix& X, const Vector& y, const ConstraintSet& S, const FitOptions& opt) {
  const Objective obj = make_objective(X, y, opt.penalty);
  const Matrix A = S.all_inequalities();
  const Vector cA = S.all_inequality_rhs();
  const int mA = static_cast<int>(A.rows());
  const int mq = S.num_quadratic();

  Vector b = unconstrained_fit(X, y, opt.penalty).coefficients;
  if (S.max_violation(b) <= opt.feasibility_tol) {
    FitResult f = finish(X, y, b);
    f.ineq_multipliers = Vector::Zero(mA);
    f.eq_multipliers = Vector::Zero(S.num_equalities());
    f.quad_multipliers = Vector::Zero(mq);
    collect_binding(S, A, cA, f, {}, opt.binding_tol);
    return f;
  }

  Vector mu = Vector::Zero(mq);
  StepQp step = solve_step(obj, S, A, cA, obj.H, b, nullptr);
  if (!step.ok) throw InfeasibleError("linearised constraints are infeasible at the unconstrained fit");
  b += step.sol.x;
  mu = step.sol.ineq_multipliers.tail(mq);

  double rho = 1.0;
  int it = 0;
  bool converged = false;
  for (; it < opt.max_sqp_iterations; ++it) {
    const Matrix W = lagrangian_hessian(obj, S, mu);
    step = solve_step(obj, S, A, cA, W, b, nullptr);
    if (!step.ok) throw InfeasibleError("SQP subproblem infeasible");
    const Vector& d = step.sol.x;
    const double viol = violation_sum(S, A, cA, b);
    const double dscale = 1.0 + b.cwiseAbs().maxCoeff();
    if (d.cwiseAbs().maxCoeff() <= 1e-11 * dscale && S.max_violation(b) <= 0.1 * opt.feasibility_tol) {
      converged = true;
      break;
    }
    double mult_max = 0.0;
    if (step.sol.ineq_multipliers.size() > 0) mult_max = step.sol.ineq_multipliers.cwiseAbs().maxCoeff();
    if (step.sol.eq_multipliers.size() > 0)
      mult_max = std::max(mult_max, step.sol.eq_multipliers.cwiseAbs().maxCoeff());
    rho = std::max(rho, 2.0 * mult_max + 1.0);

    auto merit = [&](const Vector& bb) { return obj.f(bb) + rho * violation_sum(S, A, cA, bb); };
    const double phi0 = merit(b);
    const double slope = obj.grad(b).dot(d) - rho * viol;
    const double sufficient = std::min(slope, 0.0);

    Vector next = b + d;
    bool accepted = merit(next) <= phi0 + 1e-4 * sufficient;
    if (!accepted && mq > 0) {
      // Second-order correction for the curvature of the quadratic constraints.
      std::vector<double> corrected(static_cast<std::size_t>(mq));
      for (int j = 0; j < mq; ++j) {
        const auto& qc = S.quadratic[static_cast<std::size_t>(j)];
        corrected[static_cast<std::size_t>(j)] = qc.value(next) - qc.gradient(b).dot(d);
      }
      StepQp soc = solve_step(obj, S, A, cA, W, b, &corrected);
      if (soc.ok) {
        Vector cand = b + soc.sol.x;
        if (merit(cand) <= phi0 + 1e-4 * sufficient) {
          next = cand;
          accepted = true;
        }
      }
    }
    double alpha = 1.0;
    while (!accepted && alpha > 1e-10) {
      alpha *= 0.5;
      next = b + alpha * d;
      accepted = merit(next) <= phi0 + 1e-4 * alpha * sufficient;
    }
    if (!accepted) next = b + alpha * d;
    const double moved = (next - b).cwiseAbs().maxCoeff();
    b = next;
    mu = (1.0 - alpha) * mu + alpha * step.sol.ineq_multipliers.tail(mq);
    if (moved <= 1e-13 * dscale && S.max_violation(b) <= opt.feasibility_tol) {
      converged = true;
      break;
    }
  }
  if (!converged) throw NumericalError("SQP did not converge within the iteration limit");

  // Final multipliers from the converged subproblem.
  FitResult f = finish(X, y, b);
  f.ineq_multipliers = step.sol.ineq_multipliers.head(mA);
  f.eq_multipliers = step.sol.eq_multipliers;
  f.quad_multipliers = step.sol.ineq_multipliers.tail(mq);
  f.iterations = it + 1;
  if (S.max_violation(b) > opt.feasibility_tol) throw NumericalError("SQP ended at an infeasible point");
  collect_binding(S, A, cA, f, step.sol.active, opt.binding_tol);
  return f;
}

}  // namespace

FitResult constrained_fit(const Matrix& X, const Vector& y, const ConstraintSet& S, const FitOptions& options) {
  check_dims(X, y);
  if (S.dim != X.cols()) throw InvalidArgument("constraint dimension does not match the basis");
  FitResult f = S.quadratic.empty() ? linear_constrained_fit(X, y, S, options) : sqp_fit(X, y, S, options);
  f.constrained = true;
  if (options.penalty) f.penalty_lambda = options.penalty->lambda;
  return f;
}

std::pair<int, FitResult> constrained_fit_family(const Matrix& X, const Vector& y,
                                                 const std::vector<ConstraintSet>& family,
                                                 const FitOptions& options) {
  if (family.empty()) throw InvalidArgument("empty constraint family");
  std::vector<std::optional<FitResult>> fits(family.size());
  parallel_for(family.size(), [&](std::size_t i) {
    try {
      fits[i] = constrained_fit(X, y, family[i], options);
    } catch (const InfeasibleError&) {
    }
  });
  int best = -1;
  for (std::size_t i = 0; i < fits.size(); ++i) {
    if (!fits[i]) continue;
    if (best < 0) {
      best = static_cast<int>(i);
      continue;
    }
    const double cur = fits[static_cast<std::size_t>(best)]->sse;
    if (fits[i]->sse < cur - 1e-12 * std::max(1.0, cur)) best = static_cast<int>(i);
  }
  if (best < 0) throw InfeasibleError("every member of the constraint family is infeasible");
  return {best, std::move(*fits[static_cast<std::size_t>(best)])};
}

KktReport kkt_check(const Matrix& X, const Vector& y, const ConstraintSet& S, const FitResult& fit,
                    const std::optional<Penalty>& penalty) {
  const Objective obj = make_objective(X, y, penalty);
  const Vector& b = fit.coefficients;
  const Matrix A = S.all_inequalities();
  const Vector cA = S.all_inequality_rhs();
  Vector r = obj.grad(b);
  if (A.rows() > 0) r -= A.transpose() * fit.ineq_multipliers;
  if (S.eq.rows() > 0) r -= S.eq.transpose() * fit.eq_multipliers;
  for (int j = 0; j < S.num_quadratic(); ++j)
    r += fit.quad_multipliers[j] * S.quadratic[static_cast<std::size_t>(j)].gradient(b);
  KktReport k;
  const double gscale = std::max(1.0, obj.c.cwiseAbs().maxCoeff());
  k.stationarity = r.cwiseAbs().maxCoeff() / gscale;
  k.primal = S.max_violation(b);
  double dual = 0.0;
  double comp = 0.0;
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    dual = std::max(dual, -fit.ineq_multipliers[i]);
    comp = std::max(comp, std::abs(fit.ineq_multipliers[i] * (A.row(i).dot(b) - cA[i])));
  }
  for (int j = 0; j < S.num_quadratic(); ++j) {
    dual = std::max(dual, -fit.quad_multipliers[j]);
    comp = std::max(comp, std::abs(fit.quad_multipliers[j] * S.quadratic[static_cast<std::size_t>(j)].value(b)));
  }
  k.dual = dual;
  k.complementarity = comp / gscale;
  return k;
}

Matrix pspline_penalty(int L, int order) {
  if (order < 1) throw InvalidArgument("difference order must be >= 1");
  if (L <= order) throw InvalidArgument("penalty needs more coefficients than the difference order");
  Matrix Delta = Matrix::Identity(L, L);
  for (int k = 0; k < order; ++k) {
    const Eigen::Index r = Delta.rows();
    Matrix next = Delta.bottomRows(r - 1) - Delta.topRows(r - 1);
    Delta = next;
  }
  return Delta.transpose() * Delta;
}

Matrix pspline_penalty(const SplineBasis& basis, int order) {
  Matrix D = Matrix::Zero(basis.size(), basis.size());
  for (int j = 0; j < basis.num_pieces(); ++j) {
    const int L = basis.piece(j).size();
    D.block(basis.offset(j), basis.offset(j), L, L) = pspline_penalty(L, order);
  }
  return D;
}

std::vector<double> default_lambda_grid() { return {0.0, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3}; }

double loo_criterion(const Matrix& X, const Vector& y, const Matrix& D, double lambda) {
  check_dims(X, y);
  Matrix H = X.transpose() * X;
  if (lambda != 0.0) H += lambda * D;
  Matrix M;
  Eigen::LLT<Matrix> llt(H);
  if (llt.info() == Eigen::Success) M = llt.solve(Matrix::Identity(H.rows(), H.cols()));
  else M = pseudo_inverse_psd(H);
  const Vector b = M * (X.transpose() * y);
  const Vector res = y - X * b;
  double cv = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double h = X.row(i).dot(M * X.row(i).transpose());
    if (1.0 - h <= 1e-10) return std::numeric_limits<double>::infinity();
    const double e = res[i] / (1.0 - h);
    cv += e * e;
  }
  return cv;
}

double cross_validate_lambda(const Matrix& X, const Vector& y, const Matrix& D, std::span<const double> grid) {
  if (grid.empty()) throw InvalidArgument("empty lambda grid");
  std::vector<double> g(grid.begin(), grid.end());
  for (double l : g)
    if (!(l >= 0.0)) throw InvalidArgument("lambda grid values must be >= 0");
  std::sort(g.begin(), g.end());
  double best = std::numeric_limits<double>::infinity();
  double arg = -1.0;
  for (double l : g) {
    const double cv = loo_criterion(X, y, D, l);
    if (cv < best * (1.0 - 1e-12)) {
      best = cv;
      arg = l;
    }
  }
  if (arg < 0.0) throw NumericalError("penalised system is singular for every grid value");
  return arg;
}

double ScedasticFit::variance(double x) const {
  const double s = eval_spline(basis, gamma, x);
  if (form == Form::log_squared) return scale * std::exp(s);
  const double a = std::max(std::abs(s), floor);
  return scale * a * a;
}

ScedasticFit scedastic_fit(std::span<const double> xs, const Vector& residuals, const KnotSystem& ks1,
                           ScedasticFit::Form form) {
  if (static_cast<Eigen::Index>(xs.size()) != residuals.size())
    throw InvalidArgument("residuals and covariates differ in length");
  if (residuals.size() == 0 || residuals.cwiseAbs().maxCoeff() == 0.0)
    throw DataError("scedastic fit needs nonzero residuals");
  const Matrix B = design_matrix(ks1, xs);
  ScedasticFit fit;
  fit.basis = ks1;
  fit.form = form;
  Vector target(residuals.size());
  if (form == ScedasticFit::Form::log_squared) {
    for (Eigen::Index i = 0; i < residuals.size(); ++i)
      target[i] = std::log(std::max(residuals[i] * residuals[i], 1e-12));
  } else {
    target = residuals.cwiseAbs();
    fit.floor = 1e-6 * target.mean();
  }
  fit.gamma = ols_fit(B, target).coefficients;
  // Rescale: the log of a squared residual is biased downwards, so calibrate the level directly.
  double ratio = 0.0;
  for (Eigen::Index i = 0; i < residuals.size(); ++i)
    ratio += residuals[i] * residuals[i] / fit.variance(xs[static_cast<std::size_t>(i)]);
  ratio /= static_cast<double>(residuals.size());
  if (ratio > 0.0 && std::isfinite(ratio)) fit.scale = ratio;
  return fit;
}

}  // namespace shapetest

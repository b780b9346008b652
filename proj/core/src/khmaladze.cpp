#include <shapetest/khmaladze.hpp>
#include <shapetest/linalg.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace shapetest {

int OrderedSample::trimmed_count() const {
  return static_cast<int>(std::count(trimmed.begin(), trimmed.end(), 1));
}

OrderedSample order_and_trim(std::span<const double> xs, std::span<const double> ys, const SplineBasis& basis,
                             std::optional<double> varsigma, Direction direction) {
  const std::size_t n = xs.size();
  if (ys.size() != n) throw InvalidArgument("x and y differ in length");
  if (n == 0) throw DataError("empty sample");
  if (varsigma && !(*varsigma > 0.5 && *varsigma < 1.0)) throw InvalidArgument("varsigma must lie in (1/2, 1)");
  const Interval d = basis.domain();
  const bool right = direction == Direction::right;
  auto key = [&](double x) { return right ? x : d.lo + d.hi - x; };

  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) throw DataError("non-finite observation");
    t[i] = key(xs[i]);
  }
  OrderedSample os;
  os.direction = direction;
  os.perm.resize(n);
  std::iota(os.perm.begin(), os.perm.end(), 0);
  std::stable_sort(os.perm.begin(), os.perm.end(), [&](int a, int b) {
    return t[static_cast<std::size_t>(a)] < t[static_cast<std::size_t>(b)];
  });

  const auto N = static_cast<Eigen::Index>(n);
  os.x_sorted.resize(N);
  os.y_sorted.resize(N);
  std::vector<double> ts(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = static_cast<std::size_t>(os.perm[k]);
    os.x_sorted[static_cast<Eigen::Index>(k)] = xs[i];
    os.y_sorted[static_cast<Eigen::Index>(k)] = ys[i];
    ts[k] = t[i];
  }
  os.P_sorted = basis.design(std::span<const double>(os.x_sorted.data(), n));

  // Knots in sweep coordinates, ascending, together with their x-space values.
  std::vector<double> bp = basis.breakpoints();
  std::vector<double> bp_t(bp.size());
  std::vector<double> bp_x(bp.size());
  for (std::size_t j = 0; j < bp.size(); ++j) {
    const std::size_t src = right ? j : bp.size() - 1 - j;
    bp_t[j] = key(bp[src]);
    bp_x[j] = bp[src];
  }

  const double thr = varsigma ? std::pow(static_cast<double>(n), -*varsigma) : 0.0;
  os.x_tilde.resize(N);
  os.tail_start.resize(n);
  os.trimmed.assign(n, 0);
  for (std::size_t k = 0; k < n; ++k) {
    double tt = ts[k];
    os.x_tilde[static_cast<Eigen::Index>(k)] = os.x_sorted[static_cast<Eigen::Index>(k)];
    if (varsigma) {
      const auto it = std::lower_bound(bp_t.begin(), bp_t.end(), ts[k]);
      if (it != bp_t.end() && ts[k] + thr >= *it) {
        tt = *it;
        os.x_tilde[static_cast<Eigen::Index>(k)] = bp_x[static_cast<std::size_t>(it - bp_t.begin())];
        os.trimmed[k] = 1;
      }
    }
    os.tail_start[k] = static_cast<int>(std::lower_bound(ts.begin(), ts.end(), tt) - ts.begin());
  }
  return os;
}

EffectiveBasis plain_basis(int L) {
  EffectiveBasis e;
  e.mode = EffectiveMode::plain;
  e.transform = Matrix::Identity(L, L);
  return e;
}

namespace {

struct Elimination {
  Matrix N;  // columns span the null space of the rows
  std::vector<int> pivots;
  double worst_inconsistency = 0.0;
};

// Gauss-Jordan with full pivoting per row. Rows that reduce to zero are dependent; their
// reduced right-hand side measures the inconsistency.
Elimination eliminate(const Matrix& rows, const Vector& rhs, const std::vector<int>& forced) {
  const Eigen::Index k = rows.rows();
  const Eigen::Index m = rows.cols();
  Matrix M = rows;
  Vector c = rhs;
  std::vector<char> is_pivot(static_cast<std::size_t>(m), 0);
  std::vector<std::pair<Eigen::Index, int>> pivot_rows;
  Elimination out;
  for (Eigen::Index r = 0; r < k; ++r) {
    const double scale = std::max(rows.row(r).cwiseAbs().maxCoeff(), 1e-300);
    int p = -1;
    double best = 0.0;
    if (static_cast<std::size_t>(r) < forced.size() && forced[static_cast<std::size_t>(r)] >= 0) {
      p = forced[static_cast<std::size_t>(r)];
      if (p >= m || is_pivot[static_cast<std::size_t>(p)]) throw InvalidArgument("invalid pivot coordinate");
      best = std::abs(M(r, p));
    } else {
      for (Eigen::Index j = 0; j < m; ++j) {
        if (is_pivot[static_cast<std::size_t>(j)]) continue;
        if (std::abs(M(r, j)) > best) {
          best = std::abs(M(r, j));
          p = static_cast<int>(j);
        }
      }
    }
    if (p < 0 || best <= 1e-10 * scale) {
      if (static_cast<std::size_t>(r) < forced.size() && forced[static_cast<std::size_t>(r)] >= 0)
        throw NumericalError("zero pivot at the requested coordinate");
      out.worst_inconsistency = std::max(out.worst_inconsistency, std::abs(c[r]) / std::max(1.0, scale));
      M.row(r).setZero();
      c[r] = 0.0;
      continue;
    }
    const double piv = M(r, p);
    M.row(r) /= piv;
    c[r] /= piv;
    M(r, p) = 1.0;
    for (Eigen::Index o = 0; o < k; ++o) {
      if (o == r || M(o, p) == 0.0) continue;
      const double f = M(o, p);
      M.row(o) -= f * M.row(r);
      c[o] -= f * c[r];
      M(o, p) = 0.0;
    }
    is_pivot[static_cast<std::size_t>(p)] = 1;
    pivot_rows.emplace_back(r, p);
    out.pivots.push_back(p);
  }
  std::vector<int> free;
  for (Eigen::Index j = 0; j < m; ++j)
    if (!is_pivot[static_cast<std::size_t>(j)]) free.push_back(static_cast<int>(j));
  out.N = Matrix::Zero(m, static_cast<Eigen::Index>(free.size()));
  for (std::size_t f = 0; f < free.size(); ++f) {
    const auto col = static_cast<Eigen::Index>(f);
    out.N(free[f], col) = 1.0;
    for (const auto& [r, p] : pivot_rows) out.N(p, col) = -M(r, free[f]);
  }
  return out;
}

struct BindingRows {
  Matrix linear;  // rows a' with a'b = rhs
  Vector linear_rhs;
  Matrix tangent;  // gradients of binding quadratic constraints at b_hat
};

BindingRows binding_rows(const ConstraintSet& S, const FitResult& fit) {
  const Matrix A = S.all_inequalities();
  const Vector cA = S.all_inequality_rhs();
  const int mi = S.num_inequalities();
  std::vector<Vector> lin;
  std::vector<double> rhs;
  std::vector<Vector> tan;
  for (const auto& bc : fit.binding) {
    switch (bc.kind) {
      case BindingConstraint::Kind::inequality:
        lin.push_back(A.row(bc.index).transpose());
        rhs.push_back(cA[bc.index]);
        break;
      case BindingConstraint::Kind::positivity:
        lin.push_back(A.row(mi + bc.index).transpose());
        rhs.push_back(cA[mi + bc.index]);
        break;
      case BindingConstraint::Kind::equality:
        lin.push_back(S.eq.row(bc.index).transpose());
        rhs.push_back(S.eq_rhs[bc.index]);
        break;
      case BindingConstraint::Kind::quadratic:
        tan.push_back(S.quadratic[static_cast<std::size_t>(bc.index)].gradient(fit.coefficients));
        break;
    }
  }
  BindingRows out;
  out.linear.resize(static_cast<Eigen::Index>(lin.size()), S.dim);
  out.linear_rhs.resize(static_cast<Eigen::Index>(lin.size()));
  for (std::size_t r = 0; r < lin.size(); ++r) {
    out.linear.row(static_cast<Eigen::Index>(r)) = lin[r].transpose();
    out.linear_rhs[static_cast<Eigen::Index>(r)] = rhs[r];
  }
  out.tangent.resize(static_cast<Eigen::Index>(tan.size()), S.dim);
  for (std::size_t r = 0; r < tan.size(); ++r) out.tangent.row(static_cast<Eigen::Index>(r)) = tan[r].transpose();
  return out;
}

int find_root(std::vector<int>& parent, int a) {
  while (parent[static_cast<std::size_t>(a)] != a) {
    parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
    a = parent[static_cast<std::size_t>(a)];
  }
  return a;
}

// Difference rows b_i = b_j merge groups; everything else is eliminated in the merged coordinates.
EffectiveBasis build_effective(int L, const Matrix& lin, const Vector& lin_rhs, const Matrix& tangent) {
  std::vector<int> parent(static_cast<std::size_t>(L));
  std::iota(parent.begin(), parent.end(), 0);
  std::vector<Eigen::Index> other;
  for (Eigen::Index r = 0; r < lin.rows(); ++r) {
    int a = -1, b = -1, nnz = 0;
    for (int j = 0; j < L; ++j) {
      if (lin(r, j) == 0.0) continue;
      ++nnz;
      (a < 0 ? a : b) = j;
    }
    const bool difference = nnz == 2 && std::abs(lin(r, a) + lin(r, b)) <= 1e-12 * std::abs(lin(r, a)) &&
                            std::abs(lin_rhs[r]) <= 1e-14 * std::abs(lin(r, a));
    if (difference) {
      const int ra = find_root(parent, a);
      const int rb = find_root(parent, b);
      if (ra != rb) parent[static_cast<std::size_t>(std::max(ra, rb))] = std::min(ra, rb);
    } else {
      other.push_back(r);
    }
  }
  // Groups ordered by their smallest member.
  std::vector<int> group_of(static_cast<std::size_t>(L), -1);
  std::vector<std::vector<int>> groups;
  for (int j = 0; j < L; ++j) {
    const int root = find_root(parent, j);
    if (group_of[static_cast<std::size_t>(root)] < 0) {
      group_of[static_cast<std::size_t>(root)] = static_cast<int>(groups.size());
      groups.emplace_back();
    }
    group_of[static_cast<std::size_t>(j)] = group_of[static_cast<std::size_t>(root)];
    groups[static_cast<std::size_t>(group_of[static_cast<std::size_t>(j)])].push_back(j);
  }
  const auto g = static_cast<Eigen::Index>(groups.size());
  Matrix G = Matrix::Zero(L, g);
  for (int j = 0; j < L; ++j) G(j, group_of[static_cast<std::size_t>(j)]) = 1.0;

  const auto k = static_cast<Eigen::Index>(other.size()) + tangent.rows();
  Matrix rows(k, L);
  Vector rhs = Vector::Zero(k);
  for (std::size_t r = 0; r < other.size(); ++r) {
    rows.row(static_cast<Eigen::Index>(r)) = lin.row(other[r]);
    rhs[static_cast<Eigen::Index>(r)] = lin_rhs[other[r]];
  }
  if (tangent.rows() > 0) rows.bottomRows(tangent.rows()) = tangent;

  EffectiveBasis e;
  e.groups = groups;
  if (k == 0) {
    e.transform = G;
  } else {
    const Elimination el = eliminate(rows * G, rhs, {});
    e.transform = G * el.N;
    for (int p : el.pivots) e.eliminated.push_back(groups[static_cast<std::size_t>(p)].front());
  }
  if (lin.rows() == 0 && tangent.rows() == 0) e.mode = EffectiveMode::plain;
  else if (tangent.rows() > 0) e.mode = EffectiveMode::nonlinear_reparameterized;
  else e.mode = EffectiveMode::linear_merged;
  return e;
}

}  // namespace

EffectiveBasis merge_binding_linear(const ConstraintSet& S, const FitResult& fit) {
  const BindingRows br = binding_rows(S, fit);
  if (br.tangent.rows() > 0) throw InvalidArgument("binding set contains nonlinear constraints");
  // Consistency of the linear system at b_hat.
  if (br.linear.rows() > 0) {
    const Vector r = br.linear * fit.coefficients - br.linear_rhs;
    const double scale = std::max(1.0, br.linear.cwiseAbs().maxCoeff() * fit.coefficients.cwiseAbs().maxCoeff());
    const Elimination el = eliminate(br.linear, br.linear_rhs, {});
    if (el.worst_inconsistency > 1e-6 * scale || r.cwiseAbs().maxCoeff() > 1e-6 * scale)
      throw NumericalError("inconsistent binding constraint system");
  }
  return build_effective(S.dim, br.linear, br.linear_rhs, Matrix(0, S.dim));
}

EffectiveBasis reparameterize_nonlinear(const std::vector<SmoothConstraint>& constraints, const Vector& b_hat,
                                        const std::vector<int>& pivots) {
  const auto L = b_hat.size();
  Matrix rows(static_cast<Eigen::Index>(constraints.size()), L);
  for (std::size_t j = 0; j < constraints.size(); ++j) {
    const Vector g = constraints[j].gradient(b_hat);
    if (g.size() != L) throw InvalidArgument("constraint gradient has wrong dimension");
    rows.row(static_cast<Eigen::Index>(j)) = g.transpose();
  }
  if (rows.rows() > 0 && rows.cwiseAbs().maxCoeff() == 0.0) throw NumericalError("zero gradient at every coordinate");
  const Elimination el = eliminate(rows, Vector::Zero(rows.rows()), pivots);
  EffectiveBasis e;
  e.mode = EffectiveMode::nonlinear_reparameterized;
  e.transform = el.N;
  e.eliminated = el.pivots;
  for (Eigen::Index j = 0; j < L; ++j) e.groups.push_back({static_cast<int>(j)});
  return e;
}

EffectiveBasis reparameterize_nonlinear(const SmoothConstraint& constraint, const Vector& b_hat,
                                        std::optional<int> ell0) {
  return reparameterize_nonlinear(std::vector<SmoothConstraint>{constraint}, b_hat,
                                  ell0 ? std::vector<int>{*ell0} : std::vector<int>{});
}

EffectiveBasis effective_basis(const ConstraintSet& S, const FitResult& fit) {
  const BindingRows br = binding_rows(S, fit);
  if (br.tangent.rows() == 0) return merge_binding_linear(S, fit);
  return build_effective(S.dim, br.linear, br.linear_rhs, br.tangent);
}

// ---------------------------------------------------------------------------------------------

namespace {

void check_tail_start(const std::vector<int>& ts, Eigen::Index n) {
  if (static_cast<Eigen::Index>(ts.size()) != n) throw InvalidArgument("tail_start length differs from sample size");
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts[i] < 0 || ts[i] > n) throw InvalidArgument("tail_start out of range");
    if (i > 0 && ts[i] < ts[i - 1]) throw InvalidArgument("tail_start must be nondecreasing");
  }
}

}  // namespace

RecursiveResidualPlan::RecursiveResidualPlan(const Matrix& P, std::vector<int> tail_start)
    : dim_(static_cast<int>(P.cols())), tail_start_(std::move(tail_start)) {
  const Eigen::Index n = P.rows();
  check_tail_start(tail_start_, n);
  rot_begin_.assign(static_cast<std::size_t>(n), 0);
  w_.setZero(n, dim_);
  Matrix R = Matrix::Zero(dim_, dim_);
  Vector p(dim_);
  double rmax = 0.0;
  std::vector<std::size_t> first(static_cast<std::size_t>(n));
  std::vector<std::size_t> count(static_cast<std::size_t>(n));
  Eigen::Index i = n - 1;
  while (i >= 0 && tail_start_[static_cast<std::size_t>(i)] == n) --i;
  for (Eigen::Index s = n - 1; s >= 0; --s) {
    p = P.row(s).transpose();
    first[static_cast<std::size_t>(s)] = rotations_.size();
    for (int j = 0; j < dim_; ++j) {
      const double b = p[j];
      if (b == 0.0) continue;
      const double a = R(j, j);
      const double r = std::hypot(a, b);
      const double c = a / r;
      const double sn = b / r;
      R(j, j) = r;
      p[j] = 0.0;
      for (int k = j + 1; k < dim_; ++k) {
        const double ra = R(j, k);
        const double pb = p[k];
        R(j, k) = c * ra + sn * pb;
        p[k] = -sn * ra + c * pb;
      }
      rotations_.push_back({j, c, sn});
      rmax = std::max(rmax, r);
    }
    count[static_cast<std::size_t>(s)] = rotations_.size() - first[static_cast<std::size_t>(s)];
    const double tol = 1e-13 * rmax;
    while (i >= 0 && tail_start_[static_cast<std::size_t>(i)] == s) {
      // w = R^{-T} P_i by forward substitution; empty directions contribute nothing.
      for (int j = 0; j < dim_; ++j) {
        double acc = P(i, j);
        for (int k = 0; k < j; ++k) acc -= R(k, j) * w_(i, k);
        w_(i, j) = std::abs(R(j, j)) > tol ? acc / R(j, j) : 0.0;
      }
      --i;
    }
  }
  // Re-index rotations so that step s owns a contiguous range in sweep order.
  std::vector<Rotation> ordered;
  ordered.reserve(rotations_.size());
  for (Eigen::Index s = n - 1; s >= 0; --s) {
    rot_begin_[static_cast<std::size_t>(s)] = static_cast<int>(ordered.size());
    for (std::size_t r = 0; r < count[static_cast<std::size_t>(s)]; ++r)
      ordered.push_back(rotations_[first[static_cast<std::size_t>(s)] + r]);
  }
  rotations_ = std::move(ordered);
}

Vector RecursiveResidualPlan::residuals(const Vector& u) const {
  const auto n = static_cast<Eigen::Index>(tail_start_.size());
  if (u.size() != n) throw InvalidArgument("residual vector has wrong length");
  Vector v(n);
  Vector z = Vector::Zero(dim_);
  Eigen::Index i = n - 1;
  while (i >= 0 && tail_start_[static_cast<std::size_t>(i)] == n) {
    v[i] = u[i];
    --i;
  }
  for (Eigen::Index s = n - 1; s >= 0; --s) {
    double t = u[s];
    const int stop = s > 0 ? rot_begin_[static_cast<std::size_t>(s - 1)] : static_cast<int>(rotations_.size());
    for (int r = rot_begin_[static_cast<std::size_t>(s)]; r < stop; ++r) {
      const Rotation& rot = rotations_[static_cast<std::size_t>(r)];
      const double zj = z[rot.j];
      z[rot.j] = rot.c * zj + rot.s * t;
      t = -rot.s * zj + rot.c * t;
    }
    while (i >= 0 && tail_start_[static_cast<std::size_t>(i)] == s) {
      v[i] = u[i] - w_.row(i).dot(z);
      --i;
    }
  }
  return v;
}

PseudoInverseSweep::PseudoInverseSweep(const Matrix& P_sorted, std::vector<int> tail_start, double harville_tol,
                                       double condition_guard)
    : P_(P_sorted), tail_start_(std::move(tail_start)), harville_tol_(harville_tol),
      condition_guard_(condition_guard) {
  check_tail_start(tail_start_, P_.rows());
}

Vector PseudoInverseSweep::residuals(const Vector& u, const std::function<void(const SweepStep&)>& observer) const {
  const Eigen::Index n = P_.rows();
  const Eigen::Index L = P_.cols();
  if (u.size() != n) throw InvalidArgument("residual vector has wrong length");
  const double nd = static_cast<double>(n);
  const double range_tol = 1e-10;
  const double rank_tol = 1e-12;
  Matrix A = Matrix::Zero(L, L);
  Matrix Ap = Matrix::Zero(L, L);
  Vector C = Vector::Zero(L);
  Vector b = Vector::Zero(L);
  Vector v(n);
  bool can_recurse = false;
  fallbacks_ = 0;
  Eigen::Index i = n - 1;
  while (i >= 0 && tail_start_[static_cast<std::size_t>(i)] == n) {
    v[i] = u[i];
    --i;
  }
  for (Eigen::Index s = n - 1; s >= 0; --s) {
    const Vector p = P_.row(s).transpose();
    bool recursive = false;
    if (can_recurse) {
      // p must lie in the current range, otherwise the rank grows and the update is invalid.
      const Vector w = Ap * p;
      const double out_of_range = (p - A * w).norm();
      if (out_of_range <= range_tol * p.norm()) {
        Matrix next = pinv_downdate(Ap, p, nd);
        const Matrix A_next = A + p * p.transpose() / nd;
        const double h = (p.transpose() * next * A_next - p.transpose()).cwiseAbs().maxCoeff();
        if (h <= harville_tol_ * std::max(1.0, p.cwiseAbs().maxCoeff())) {
          recursive = true;
          A = A_next;
          Ap = std::move(next);
          C += p * u[s] / nd;
          b += Ap * p * (u[s] - p.dot(b)) / nd;
        }
      }
    }
    if (!recursive) {
      if (can_recurse) ++fallbacks_;
      A += p * p.transpose() / nd;
      C += p * u[s] / nd;
      // SVD of the tail rows: small directions survive that an eigensolver on A would lose.
      Eigen::BDCSVD<Matrix> svd(P_.bottomRows(n - s) / std::sqrt(nd), Eigen::ComputeThinV);
      const Vector& sv = svd.singularValues();
      const double smax = sv.size() ? sv[0] : 0.0;
      Vector inv = Vector::Zero(sv.size());
      double kept_min = std::numeric_limits<double>::infinity();
      for (Eigen::Index k = 0; k < sv.size(); ++k) {
        if (sv[k] > rank_tol * smax && sv[k] > 0.0) {
          inv[k] = 1.0 / (sv[k] * sv[k]);
          kept_min = std::min(kept_min, sv[k] * sv[k]);
        }
      }
      Ap = svd.matrixV() * inv.asDiagonal() * svd.matrixV().transpose();
      Ap = 0.5 * (Ap + Ap.transpose());
      b = Ap * C;
      can_recurse = smax > 0.0 && kept_min * condition_guard_ >= smax * smax;
    }
    if (observer) observer(SweepStep{static_cast<int>(s), recursive, &A, &Ap});
    while (i >= 0 && tail_start_[static_cast<std::size_t>(i)] == s) {
      v[i] = u[i] - P_.row(i).dot(b);
      --i;
    }
  }
  return v;
}

namespace {

Vector run_method(const Matrix& P, std::vector<int> ts, const Vector& u, RecursionMethod method) {
  if (method == RecursionMethod::givens) return RecursiveResidualPlan(P, std::move(ts)).residuals(u);
  return PseudoInverseSweep(P, std::move(ts)).residuals(u);
}

}  // namespace

Vector recursive_residuals(const OrderedSample& os, const EffectiveBasis& eff, const Vector& u_sorted,
                           RecursionMethod method) {
  if (eff.transform.rows() != os.P_sorted.cols()) throw InvalidArgument("effective basis does not match the design");
  return run_method(eff.apply_rows(os.P_sorted), os.tail_start, u_sorted, method);
}

Vector recursive_residuals_forward(const Matrix& P_sorted, const Vector& u_sorted, RecursionMethod method) {
  const Eigen::Index n = P_sorted.rows();
  if (u_sorted.size() != n) throw InvalidArgument("residual vector has wrong length");
  const Matrix Prev = P_sorted.colwise().reverse();
  const Vector urev = u_sorted.reverse();
  std::vector<int> ts(static_cast<std::size_t>(n));
  std::iota(ts.begin(), ts.end(), 0);
  return run_method(Prev, std::move(ts), urev, method).reverse();
}

Vector partial_sum_path(const Vector& v) {
  Vector path(v.size());
  const double scale = 1.0 / std::sqrt(static_cast<double>(v.size()));
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    acc += v[i];
    path[i] = acc * scale;
  }
  return path;
}

TransformOutput transform(std::span<const double> xs, std::span<const double> ys, const SplineBasis& basis,
                          const ConstraintSet& S, const TransformOptions& options) {
  if (xs.size() != ys.size()) throw InvalidArgument("x and y differ in length");
  const Matrix X = basis.design(xs);
  const Vector y = Eigen::Map<const Vector>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  TransformOutput out;
  out.fit = constrained_fit(X, y, S, options.fit);
  out.effective = options.merge_binding ? effective_basis(S, out.fit) : plain_basis(basis.size());
  out.ordered = order_and_trim(xs, ys, basis, options.varsigma, options.direction);
  const auto n = static_cast<Eigen::Index>(xs.size());
  out.u_sorted.resize(n);
  out.scale_sorted = Vector::Ones(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const int i = out.ordered.perm[static_cast<std::size_t>(k)];
    double u = out.fit.residuals[i];
    if (options.scedastic) {
      out.scale_sorted[k] = options.scedastic->sigma(out.ordered.x_sorted[k]);
      u /= out.scale_sorted[k];
    }
    out.u_sorted[k] = u;
  }
  const Matrix P_eff = out.effective.apply_rows(out.ordered.P_sorted);
  if (options.method == RecursionMethod::givens) {
    auto plan = std::make_shared<RecursiveResidualPlan>(P_eff, out.ordered.tail_start);
    out.v = plan->residuals(out.u_sorted);
    out.plan = std::move(plan);
  } else {
    out.v = PseudoInverseSweep(P_eff, out.ordered.tail_start).residuals(out.u_sorted);
  }
  out.path = partial_sum_path(out.v);
  out.sigma_hat = std::sqrt(out.u_sorted.squaredNorm() / static_cast<double>(n));
  out.n_tilde = static_cast<int>(n) - basis.size() - 2;
  return out;
}

}  // namespace shapetest

#include <shapetest/qp.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace shapetest {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct ActiveEntry {
  bool equality;
  int row;
  double u;
};

class DualActiveSet {
 public:
  DualActiveSet(const QpProblem& p) : p_(p), n_(static_cast<int>(p.hessian.rows())) {
    Matrix G = 0.5 * (p.hessian + p.hessian.transpose());
    const double dmax = std::max(1.0, G.diagonal().cwiseAbs().maxCoeff());
    Eigen::LLT<Matrix> llt(G);
    bool ok = llt.info() == Eigen::Success;
    if (ok) {
      const Vector d = llt.matrixL().toDenseMatrix().diagonal();
      ok = d.minCoeff() * d.minCoeff() > 1e-13 * dmax;
    }
    if (!ok) {
      ridge_ = 1e-12 * dmax;
      for (int attempt = 0; attempt < 8 && !ok; ++attempt) {
        G.diagonal().array() += ridge_;
        llt.compute(G);
        ok = llt.info() == Eigen::Success;
        if (!ok) ridge_ *= 100.0;
      }
      if (!ok) throw NumericalError("QP Hessian is not positive semidefinite");
    }
    G_ = G;
    J0_ = llt.matrixU().solve(Matrix::Identity(n_, n_));  // L^{-T}
    x_ = llt.solve(-p.linear);
  }

  QpSolution solve() {
    const int me = static_cast<int>(p_.eq.rows());
    const int mi = static_cast<int>(p_.ineq.rows());
    const int max_iter = 20 * (me + mi + n_) + 100;
    std::vector<double> norms(static_cast<std::size_t>(mi));
    for (int i = 0; i < mi; ++i) norms[static_cast<std::size_t>(i)] = std::max(p_.ineq.row(i).norm(), 1e-300);

    for (int e = 0; e < me; ++e) add_equality(e);

    int iterations = 0;
    std::vector<char> is_active(static_cast<std::size_t>(mi), 0);
    for (;;) {
      if (++iterations > max_iter) throw NumericalError("QP iteration limit reached");
      std::fill(is_active.begin(), is_active.end(), 0);
      for (const auto& a : active_)
        if (!a.equality) is_active[static_cast<std::size_t>(a.row)] = 1;
      int pick = -1;
      double worst = -violation_tol();
      for (int i = 0; i < mi; ++i) {
        if (is_active[static_cast<std::size_t>(i)]) continue;
        const double s = (p_.ineq.row(i).dot(x_) - p_.ineq_rhs[i]) / norms[static_cast<std::size_t>(i)];
        if (s < worst) {
          worst = s;
          pick = i;
        }
      }
      if (pick < 0) break;
      add_inequality(pick, iterations, max_iter);
    }

    QpSolution out;
    out.x = x_;
    out.eq_multipliers = Vector::Zero(me);
    out.ineq_multipliers = Vector::Zero(mi);
    for (const auto& a : active_) {
      if (a.equality) {
        out.eq_multipliers[a.row] = a.u;
      } else {
        out.ineq_multipliers[a.row] = std::max(0.0, a.u);
        out.active.push_back(a.row);
      }
    }
    std::sort(out.active.begin(), out.active.end());
    out.iterations = iterations;
    out.objective = 0.5 * x_.dot(p_.hessian * x_) + p_.linear.dot(x_);
    out.ridge = ridge_;
    return out;
  }

 private:
  Vector normal(const ActiveEntry& a) const {
    return a.equality ? Vector(p_.eq.row(a.row).transpose()) : Vector(p_.ineq.row(a.row).transpose());
  }

  double violation_tol() const { return 1e-12 * std::max(1.0, x_.cwiseAbs().maxCoeff()); }

  // J = J0 Q and R from the QR factorisation of J0' N.
  void factor() {
    const int q = static_cast<int>(active_.size());
    if (q == 0) {
      J_ = J0_;
      R_.resize(0, 0);
      return;
    }
    Matrix N(n_, q);
    for (int j = 0; j < q; ++j) N.col(j) = normal(active_[static_cast<std::size_t>(j)]);
    Eigen::HouseholderQR<Matrix> qr(J0_.transpose() * N);
    J_ = J0_ * Matrix(qr.householderQ());
    R_ = qr.matrixQR().topLeftCorner(q, q).triangularView<Eigen::Upper>();
  }

  // Primal direction z and dual direction r for a candidate normal np.
  void directions(const Vector& np, Vector& z, Vector& r, double& dnorm2) {
    factor();
    const int q = static_cast<int>(active_.size());
    const Vector d = J_.transpose() * np;
    dnorm2 = d.squaredNorm();
    z = J_.rightCols(n_ - q) * d.tail(n_ - q);
    if (q > 0) r = R_.triangularView<Eigen::Upper>().solve(d.head(q));
    else r.resize(0);
  }

  bool dependent(const Vector& z, const Vector& np, double dnorm2) const {
    return z.dot(np) <= 1e-22 * std::max(dnorm2, 1e-300) || z.norm() == 0.0;
  }

  void add_equality(int e) {
    const Vector np = p_.eq.row(e).transpose();
    const double b = p_.eq_rhs[e];
    Vector z, r;
    double dn2;
    directions(np, z, r, dn2);
    const double s = np.dot(x_) - b;
    if (dependent(z, np, dn2)) {
      const double scale = std::max({1.0, std::abs(b), np.cwiseAbs().maxCoeff() * x_.cwiseAbs().maxCoeff()});
      if (std::abs(s) > 1e-9 * scale) throw InfeasibleError("equality constraints are inconsistent");
      return;  // redundant row
    }
    const double t = -s / z.dot(np);
    x_ += t * z;
    for (std::size_t j = 0; j < active_.size(); ++j) active_[j].u -= t * r[static_cast<Eigen::Index>(j)];
    active_.push_back({true, e, t});
  }

  void add_inequality(int pick, int& iterations, int max_iter) {
    const Vector np = p_.ineq.row(pick).transpose();
    const double b = p_.ineq_rhs[pick];
    double up = 0.0;
    for (;;) {
      if (++iterations > max_iter) throw NumericalError("QP iteration limit reached");
      Vector z, r;
      double dn2;
      directions(np, z, r, dn2);
      const double s = np.dot(x_) - b;
      // Largest dual step keeping the multipliers of active inequalities nonnegative.
      double t1 = kInf;
      int drop = -1;
      for (std::size_t j = 0; j < active_.size(); ++j) {
        const double rj = r[static_cast<Eigen::Index>(j)];
        if (active_[j].equality || rj <= 0.0) continue;
        const double ratio = active_[j].u / rj;
        if (ratio < t1) {
          t1 = ratio;
          drop = static_cast<int>(j);
        }
      }
      const bool dep = dependent(z, np, dn2);
      const double t2 = dep ? kInf : -s / z.dot(np);
      if (t1 == kInf && t2 == kInf) throw InfeasibleError("inequality constraints are infeasible");
      const double t = std::min(t1, t2);
      if (!dep) x_ += t * z;
      for (std::size_t j = 0; j < active_.size(); ++j) active_[j].u -= t * r[static_cast<Eigen::Index>(j)];
      up += t;
      if (t2 <= t1) {
        active_.push_back({false, pick, up});
        return;
      }
      active_.erase(active_.begin() + drop);
    }
  }

  const QpProblem& p_;
  int n_;
  double ridge_ = 0.0;
  Matrix G_;
  Matrix J0_;
  Matrix J_;
  Matrix R_;
  Vector x_;
  std::vector<ActiveEntry> active_;
};

}  // namespace

QpSolution solve_qp(const QpProblem& problem) {
  const auto n = problem.hessian.rows();
  if (problem.hessian.cols() != n || problem.linear.size() != n) throw InvalidArgument("QP dimension mismatch");
  if (problem.eq.rows() > 0 && (problem.eq.cols() != n || problem.eq_rhs.size() != problem.eq.rows()))
    throw InvalidArgument("QP equality dimension mismatch");
  if (problem.ineq.rows() > 0 && (problem.ineq.cols() != n || problem.ineq_rhs.size() != problem.ineq.rows()))
    throw InvalidArgument("QP inequality dimension mismatch");
  DualActiveSet solver(problem);
  return solver.solve();
}

}  // namespace shapetest

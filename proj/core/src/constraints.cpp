#include <shapetest/constraints.hpp>

#include <algorithm>
#include <cmath>

namespace shapetest {

double QuadraticConstraint::value(const Vector& b) const {
  double v = b.dot(Q * b) + constant;
  if (linear.size() > 0) v += linear.dot(b);
  return v;
}

Vector QuadraticConstraint::gradient(const Vector& b) const {
  Vector g = (Q + Q.transpose()) * b;
  if (linear.size() > 0) g += linear;
  return g;
}

ConstraintSet::ConstraintSet(int d) : dim(d), ineq(0, d), ineq_rhs(0), eq(0, d), eq_rhs(0) {
  if (d < 0) throw InvalidArgument("constraint dimension must be >= 0");
}

namespace {

void append_row(Matrix& M, Vector& rhs, const Vector& row, double value) {
  const Eigen::Index r = M.rows();
  M.conservativeResize(r + 1, Eigen::NoChange);
  rhs.conservativeResize(r + 1);
  M.row(r) = row.transpose();
  rhs[r] = value;
}

void append_block(Matrix& M, Vector& rhs, const Matrix& rows, const Vector& values) {
  if (rows.rows() == 0) return;
  const Eigen::Index r = M.rows();
  M.conservativeResize(r + rows.rows(), Eigen::NoChange);
  rhs.conservativeResize(r + rows.rows());
  M.bottomRows(rows.rows()) = rows;
  rhs.tail(rows.rows()) = values;
}

}  // namespace

void ConstraintSet::add_inequality(const Vector& row, double rhs) {
  if (row.size() != dim) throw InvalidArgument("constraint row has wrong dimension");
  append_row(ineq, ineq_rhs, row, rhs);
}

void ConstraintSet::add_equality(const Vector& row, double rhs) {
  if (row.size() != dim) throw InvalidArgument("constraint row has wrong dimension");
  append_row(eq, eq_rhs, row, rhs);
}

void ConstraintSet::add_quadratic(QuadraticConstraint qc) {
  if (qc.Q.rows() != dim || qc.Q.cols() != dim) throw InvalidArgument("quadratic constraint has wrong dimension");
  if (qc.linear.size() == 0) qc.linear = Vector::Zero(dim);
  if (qc.linear.size() != dim) throw InvalidArgument("quadratic constraint has wrong dimension");
  quadratic.push_back(std::move(qc));
}

Matrix ConstraintSet::all_inequalities() const {
  if (!positivity) return ineq;
  Matrix A(ineq.rows() + dim, dim);
  A << ineq, Matrix::Identity(dim, dim);
  return A;
}

Vector ConstraintSet::all_inequality_rhs() const {
  if (!positivity) return ineq_rhs;
  Vector c(ineq_rhs.size() + dim);
  c << ineq_rhs, Vector::Constant(dim, positivity_margin);
  return c;
}

ConstraintSet ConstraintSet::embedded(int offset, int total_dim) const {
  if (offset < 0 || offset + dim > total_dim) throw InvalidArgument("embedding out of range");
  ConstraintSet out(total_dim);
  out.label = label;
  out.ineq = Matrix::Zero(ineq.rows(), total_dim);
  out.ineq.middleCols(offset, dim) = ineq;
  out.ineq_rhs = ineq_rhs;
  out.eq = Matrix::Zero(eq.rows(), total_dim);
  out.eq.middleCols(offset, dim) = eq;
  out.eq_rhs = eq_rhs;
  for (const auto& qc : quadratic) {
    QuadraticConstraint e;
    e.Q = Matrix::Zero(total_dim, total_dim);
    e.Q.block(offset, offset, dim, dim) = qc.Q;
    e.linear = Vector::Zero(total_dim);
    e.linear.segment(offset, dim) = qc.linear;
    e.constant = qc.constant;
    out.quadratic.push_back(std::move(e));
  }
  if (positivity) {
    // Positivity of a sub-block only: express as explicit rows.
    for (int j = 0; j < dim; ++j) {
      Vector row = Vector::Zero(total_dim);
      row[offset + j] = 1.0;
      out.add_inequality(row, positivity_margin);
    }
  }
  return out;
}

ConstraintSet& ConstraintSet::append(const ConstraintSet& other) {
  if (other.dim != dim) throw InvalidArgument("cannot append constraint sets of different dimension");
  append_block(ineq, ineq_rhs, other.ineq, other.ineq_rhs);
  append_block(eq, eq_rhs, other.eq, other.eq_rhs);
  quadratic.insert(quadratic.end(), other.quadratic.begin(), other.quadratic.end());
  if (other.positivity) {
    positivity_margin = positivity ? std::max(positivity_margin, other.positivity_margin) : other.positivity_margin;
    positivity = true;
  }
  return *this;
}

double ConstraintSet::max_violation(const Vector& b) const {
  if (b.size() != dim) throw InvalidArgument("coefficient vector has wrong dimension");
  double v = 0.0;
  if (ineq.rows() > 0) v = std::max(v, (ineq_rhs - ineq * b).maxCoeff());
  if (eq.rows() > 0) v = std::max(v, (eq * b - eq_rhs).cwiseAbs().maxCoeff());
  for (const auto& qc : quadratic) v = std::max(v, qc.value(b));
  if (positivity && dim > 0) v = std::max(v, (Vector::Constant(dim, positivity_margin) - b).maxCoeff());
  return v;
}

namespace {

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

void check_sign(int sign) {
  if (sign != 1 && sign != -1) throw InvalidArgument("derivative sign must be +1 or -1");
}

}  // namespace

ConstraintSet derivative_sign_constraints(const KnotSystem& ks, int r, int sign, double bound,
                                          bool boundary_refinement) {
  check_sign(sign);
  const int q = ks.degree();
  const int L = ks.size();
  if (r < 1) throw InvalidArgument("derivative order must be >= 1");
  // A step function (q = 0) is monotone iff its coefficients are.
  if (r > q && !(r == 1 && bound == 0.0)) throw InvalidArgument("derivative order exceeds spline degree");
  ConstraintSet S(L);
  S.label = "derivsign:r=" + std::to_string(r) + ",d=" + (sign > 0 ? "+1" : "-1");

  if (bound == 0.0 && r == 1) {
    // Differences of adjacent coefficients; exact for monotonicity.
    for (int l = 0; l + 1 < L; ++l) {
      Vector row = Vector::Zero(L);
      row[l] = -sign;
      row[l + 1] = sign;
      S.add_inequality(row, 0.0);
    }
    return S;
  }

  if (bound == 0.0 && r == 2) {
    if (L < 2 * q + r)
      throw InvalidArgument("closed-form second-difference rows need L >= 2q + 2 basis functions");
    // 1-based l = q, ..., L - q + 1 - r; stored 0-based.
    for (int l = q - 1; l <= L - q - r; ++l) {
      Vector row = Vector::Zero(L);
      for (int k = 0; k <= r; ++k) row[l + k] = sign * ((r - k) % 2 == 0 ? 1.0 : -1.0) * binomial(r, k);
      S.add_inequality(row, 0.0);
    }
    if (boundary_refinement) {
      // diff(k) = b_k - b_{k-1} with 1-based k; rows (k-1) diff(k+1) >= k diff(k) and the mirror image.
      auto diff = [L](int k) {
        Vector d = Vector::Zero(L);
        d[k - 1] = 1.0;
        d[k - 2] = -1.0;
        return d;
      };
      for (int k = q; k >= 2; --k) {
        Vector row = (k - 1) * diff(k + 1) - k * diff(k);
        S.add_inequality(sign * row, 0.0);
      }
      for (int k = q; k >= 2; --k) {
        Vector row = k * diff(L - k + 2) - (k - 1) * diff(L - k + 1);
        S.add_inequality(sign * row, 0.0);
      }
    }
    return S;
  }

  // Knot enforcement: sign * m^(r)(z) >= bound at every distinct knot.
  for (double z : ks.unique_knots()) S.add_inequality(sign * eval_basis_derivative(ks, z, r), bound);
  S.label += ",c=" + std::to_string(bound);
  return S;
}

ConstraintSet partition_constraints(const std::vector<IntervalShape>& pieces, Join join) {
  if (pieces.empty()) throw InvalidArgument("partition needs at least one interval");
  int total = 0;
  for (std::size_t j = 0; j < pieces.size(); ++j) {
    if (j > 0) {
      const double a = pieces[j - 1].knots.domain().hi;
      const double b = pieces[j].knots.domain().lo;
      if (std::abs(a - b) > 1e-12 * std::max(1.0, std::abs(a)))
        throw InvalidArgument(b < a ? "partition intervals overlap" : "partition intervals leave a gap");
    }
    total += pieces[j].knots.size();
  }
  ConstraintSet S(total);
  int offset = 0;
  std::vector<int> offsets;
  for (const auto& p : pieces) {
    offsets.push_back(offset);
    S.append(derivative_sign_constraints(p.knots, p.order, p.sign).embedded(offset, total));
    offset += p.knots.size();
  }
  for (std::size_t j = 0; j + 1 < pieces.size() && join != Join::none; ++j) {
    const KnotSystem& a = pieces[j].knots;
    const KnotSystem& b = pieces[j + 1].knots;
    const int last = offsets[j] + a.size() - 1;
    const int first = offsets[j + 1];
    Vector row = Vector::Zero(total);
    row[last] = 1.0;
    row[first] = -1.0;
    S.add_equality(row, 0.0);
    if (join == Join::smooth) {
      if (a.degree() < 1 || b.degree() < 1) throw InvalidArgument("smooth join needs degree >= 1");
      // One-sided first derivatives at the join; equal to the plain difference form for equal spacings.
      const double wa = a.degree() / a.spacing();
      const double wb = b.degree() / b.spacing();
      const double scale = a.spacing() / a.degree();
      Vector s = Vector::Zero(total);
      s[last] = wa * scale;
      s[last - 1] = -wa * scale;
      s[first + 1] = -wb * scale;
      s[first] = wb * scale;
      S.add_equality(s, 0.0);
    }
  }
  S.label = "partition";
  return S;
}

ConstraintSet symmetry_constraints(const KnotSystem& left, const KnotSystem& right, double s0) {
  const Interval a = left.domain();
  const Interval b = right.domain();
  const double tol = 1e-12 * std::max({1.0, std::abs(a.lo), std::abs(b.hi)});
  if (left.size() != right.size() || left.degree() != right.degree() || left.l_prime() != right.l_prime())
    throw InvalidArgument("symmetry needs mirror-image knot systems of equal size");
  if (std::abs(a.hi - s0) > tol || std::abs(b.lo - s0) > tol)
    throw InvalidArgument("knot systems must meet at the symmetry point");
  if (std::abs((s0 - a.lo) - (b.hi - s0)) > tol) throw InvalidArgument("knot systems are not symmetric about s0");
  const int L = left.size();
  ConstraintSet S(2 * L);
  for (int l = 0; l < L; ++l) {
    Vector row = Vector::Zero(2 * L);
    row[l] = 1.0;
    row[L + (L - 1 - l)] = -1.0;
    S.add_equality(row, 0.0);
  }
  S.label = "symmetric";
  return S;
}

std::string to_string(MeanPair p) {
  switch (p) {
    case MeanPair::AG: return "AG";
    case MeanPair::AH: return "AH";
    case MeanPair::GA: return "GA";
    case MeanPair::GG: return "GG";
    case MeanPair::GH: return "GH";
    case MeanPair::HA: return "HA";
    case MeanPair::HG: return "HG";
    case MeanPair::HH: return "HH";
  }
  return "?";
}

std::optional<MeanPair> mean_pair_from_string(const std::string& s) {
  for (MeanPair p : {MeanPair::AG, MeanPair::AH, MeanPair::GA, MeanPair::GG, MeanPair::GH, MeanPair::HA,
                     MeanPair::HG, MeanPair::HH})
    if (to_string(p) == s) return p;
  return std::nullopt;
}

std::string to_string(const QuadraticShape& s) {
  switch (s.kind) {
    case QuadraticShape::Kind::r_convex: return "rconvex:r=" + std::to_string(s.parameter);
    case QuadraticShape::Kind::rho_convex: return "rhoconvex:rho=" + std::to_string(s.parameter);
    case QuadraticShape::Kind::mn_convex: return "mnconvex:" + to_string(s.pair);
  }
  return "?";
}

double r_convex_expression(double, double d1, double d2, double r) { return r * d1 * d1 + d2; }

double rho_convex_expression(double v, double d1, double d2, double rho) { return v * d2 + (rho - 1.0) * d1 * d1; }

double mn_convex_expression(MeanPair p, double x, double v, double d1, double d2) {
  switch (p) {
    case MeanPair::AG: return v * d2 - d1 * d1;
    case MeanPair::AH: return v * d2 - 2.0 * d1 * d1;
    case MeanPair::GA: return d1 + x * d2;
    case MeanPair::GG: return v * d1 + x * (v * d2 - d1 * d1);
    case MeanPair::GH: return v * (d1 + x * d2) - 2.0 * x * d1 * d1;
    case MeanPair::HA: return 2.0 * x * d1 + x * x * d2;
    case MeanPair::HG: return 2.0 * x * v * d1 + x * x * (v * d2 - d1 * d1);
    case MeanPair::HH: return (2.0 * x * d1 + x * x * d2) * v - 2.0 * x * x * d1 * d1;
  }
  return 0.0;
}

namespace {

Matrix sym_outer(const Vector& a, const Vector& b) { return 0.5 * (a * b.transpose() + b * a.transpose()); }

// Expression E(b) = sum c_ij (a_i'b)(a_j'b) + sum c_i a_i'b, with a_0, a_1, a_2 the value and
// derivative rows at a knot. Returned as the "<= 0" form of E >= 0.
struct KnotRows {
  Vector a0, a1, a2;
};

QuadraticConstraint from_terms(const KnotRows& k, double c00, double c01, double c02, double c11, double c12,
                               double c22, double l0, double l1, double l2) {
  const Eigen::Index L = k.a0.size();
  Matrix M = Matrix::Zero(L, L);
  if (c00 != 0.0) M += c00 * k.a0 * k.a0.transpose();
  if (c01 != 0.0) M += c01 * sym_outer(k.a0, k.a1);
  if (c02 != 0.0) M += c02 * sym_outer(k.a0, k.a2);
  if (c11 != 0.0) M += c11 * k.a1 * k.a1.transpose();
  if (c12 != 0.0) M += c12 * sym_outer(k.a1, k.a2);
  if (c22 != 0.0) M += c22 * k.a2 * k.a2.transpose();
  Vector lin = Vector::Zero(L);
  if (l0 != 0.0) lin += l0 * k.a0;
  if (l1 != 0.0) lin += l1 * k.a1;
  if (l2 != 0.0) lin += l2 * k.a2;
  return QuadraticConstraint{-M, -lin, 0.0};
}

}  // namespace

ConstraintSet quadratic_shape_constraints(const KnotSystem& ks, const QuadraticShape& shape, double margin) {
  using Kind = QuadraticShape::Kind;
  const int L = ks.size();
  const int q = ks.degree();
  const bool linear_mn =
      shape.kind == Kind::mn_convex && (shape.pair == MeanPair::GA || shape.pair == MeanPair::HA);
  if (linear_mn ? q < 1 : q < 2) throw InvalidArgument("shape needs a spline degree of at least 2");
  if (margin < 0.0) throw InvalidArgument("positivity margin must be >= 0");

  ConstraintSet S(L);
  S.label = to_string(shape);
  const auto knots = ks.unique_knots();

  // Both reduce to m'' >= 0 at the knots.
  if ((shape.kind == Kind::r_convex && shape.parameter == 0.0) || (shape.kind == Kind::rho_convex && shape.parameter == 1.0)) {
    for (double z : knots) S.add_inequality(eval_basis_derivative(ks, z, 2), 0.0);
    return S;
  }

  if (linear_mn) {
    // x m'(x) (GA) or x^2 m'(x) (HA) nondecreasing across consecutive knots.
    const double power = shape.pair == MeanPair::GA ? 1.0 : 2.0;
    auto w = [&](double z) -> Vector { return std::pow(z, power) * eval_basis_derivative(ks, z, 1); };
    for (std::size_t k = 0; k + 1 < knots.size(); ++k) S.add_inequality(w(knots[k + 1]) - w(knots[k]), 0.0);
    S.positivity = true;
    S.positivity_margin = margin;
    return S;
  }

  for (double z : knots) {
    KnotRows k{eval_basis(ks, z), eval_basis_derivative(ks, z, 1), eval_basis_derivative(ks, z, 2)};
    QuadraticConstraint qc;
    if (shape.kind == Kind::r_convex) {
      qc = from_terms(k, 0, 0, 0, shape.parameter, 0, 0, 0, 0, 1);
    } else if (shape.kind == Kind::rho_convex) {
      qc = from_terms(k, 0, 0, 1, shape.parameter - 1.0, 0, 0, 0, 0, 0);
    } else {
      const double x = z;
      switch (shape.pair) {
        case MeanPair::AG: qc = from_terms(k, 0, 0, 1, -1, 0, 0, 0, 0, 0); break;
        case MeanPair::AH: qc = from_terms(k, 0, 0, 1, -2, 0, 0, 0, 0, 0); break;
        case MeanPair::GG: qc = from_terms(k, 0, 1, x, -x, 0, 0, 0, 0, 0); break;
        case MeanPair::GH: qc = from_terms(k, 0, 1, x, -2 * x, 0, 0, 0, 0, 0); break;
        case MeanPair::HG: qc = from_terms(k, 0, 2 * x, x * x, -x * x, 0, 0, 0, 0, 0); break;
        case MeanPair::HH: qc = from_terms(k, 0, 2 * x, x * x, -2 * x * x, 0, 0, 0, 0, 0); break;
        default: throw InvalidArgument("unsupported mean pair");
      }
    }
    S.add_quadratic(std::move(qc));
  }
  if (shape.kind != Kind::r_convex) {
    S.positivity = true;
    S.positivity_margin = margin;
  }
  return S;
}

std::vector<ConstraintSet> quasiconvexity_candidates(const KnotSystem& ks) {
  const int L = ks.size();
  const Interval d = ks.domain();
  std::vector<ConstraintSet> out;
  std::vector<double> xi;
  if (ks.degree() >= 1) xi = make_knot_system(ks.degree() - 1, ks.l_prime(), d).greville();
  else xi = std::vector<double>(static_cast<std::size_t>(L - 1), 0.0);
  for (int l = 0; l + 1 < L && ks.degree() == 0; ++l) xi[static_cast<std::size_t>(l)] = ks.knot(l + 1);

  for (double u : ks.unique_knots()) {
    ConstraintSet S(L);
    for (int l = 0; l + 1 < L; ++l) {
      const double g = xi[static_cast<std::size_t>(l)];
      int sign = 0;
      if (u == d.lo) sign = 1;
      else if (u == d.hi) sign = -1;
      else if (g < u) sign = -1;
      else if (g > u) sign = 1;
      if (sign == 0) continue;
      Vector row = Vector::Zero(L);
      row[l] = -sign;
      row[l + 1] = sign;
      S.add_inequality(row, 0.0);
    }
    S.label = "ushape:s0=" + std::to_string(u);
    out.push_back(std::move(S));
  }
  return out;
}

}  // namespace shapetest

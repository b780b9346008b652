#include <shapetest/bspline.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace shapetest {

KnotSystem::KnotSystem(int degree, int l_prime, Interval domain)
    : degree_(degree), l_prime_(l_prime), domain_(domain) {
  if (degree < 0) throw InvalidArgument("spline degree must be >= 0");
  if (l_prime < 1) throw InvalidArgument("number of knot intervals must be >= 1");
  if (!(domain.lo < domain.hi) || !std::isfinite(domain.lo) || !std::isfinite(domain.hi))
    throw InvalidArgument("spline domain must satisfy lo < hi");
  knots_.reserve(static_cast<std::size_t>(l_prime + 2 * degree + 1));
  for (int i = 0; i < degree; ++i) knots_.push_back(domain.lo);
  for (int k = 0; k <= l_prime; ++k) {
    double z = domain.lo + domain.length() * static_cast<double>(k) / l_prime;
    if (k == l_prime) z = domain.hi;
    knots_.push_back(z);
  }
  for (int i = 0; i < degree; ++i) knots_.push_back(domain.hi);
}

std::vector<double> KnotSystem::unique_knots() const {
  return {knots_.begin() + degree_, knots_.begin() + degree_ + l_prime_ + 1};
}

int KnotSystem::span_index(double x) const {
  const int first = degree_;
  const int last = size() - 1;
  double t = (x - domain_.lo) / spacing();
  int k = first + static_cast<int>(std::floor(std::clamp(t, 0.0, static_cast<double>(l_prime_))));
  k = std::clamp(k, first, last);
  while (k > first && x < knot(k)) --k;
  while (k < last && x >= knot(k + 1)) ++k;
  return k;
}

std::vector<double> KnotSystem::greville() const {
  std::vector<double> g(static_cast<std::size_t>(size()));
  for (int j = 0; j < size(); ++j) {
    if (degree_ == 0) {
      g[static_cast<std::size_t>(j)] = 0.5 * (knot(j) + knot(j + 1));
      continue;
    }
    double s = 0.0;
    for (int i = 1; i <= degree_; ++i) s += knot(j + i);
    g[static_cast<std::size_t>(j)] = s / degree_;
  }
  return g;
}

KnotSystem make_knot_system(int degree, int l_prime, Interval domain) {
  return KnotSystem(degree, l_prime, domain);
}

namespace {

double checked_point(const KnotSystem& ks, double x) {
  const Interval d = ks.domain();
  if (!std::isfinite(x)) throw DataError("non-finite evaluation point");
  const double slack = 1e-12 * d.length();
  if (x < d.lo - slack || x > d.hi + slack)
    throw DataError("evaluation point " + std::to_string(x) + " outside spline domain");
  return std::clamp(x, d.lo, d.hi);
}

}  // namespace

int eval_basis_nonzero(const KnotSystem& ks, double x, double* out) {
  x = checked_point(ks, x);
  const int q = ks.degree();
  const int k = ks.span_index(x);
  // Triangular Cox-de Boor scheme; denominators are positive inside a valid span.
  double left[32];
  double right[32];
  if (q >= 31) throw InvalidArgument("spline degree too large");
  out[0] = 1.0;
  for (int j = 1; j <= q; ++j) {
    left[j] = x - ks.knot(k + 1 - j);
    right[j] = ks.knot(k + j) - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double den = right[r + 1] + left[j - r];
      const double tmp = den > 0.0 ? out[r] / den : 0.0;
      out[r] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    out[j] = saved;
  }
  return k - q;
}

Vector eval_basis(const KnotSystem& ks, double x) {
  Vector b = Vector::Zero(ks.size());
  double vals[32];
  const int first = eval_basis_nonzero(ks, x, vals);
  for (int i = 0; i <= ks.degree(); ++i) b[first + i] = vals[i];
  return b;
}

Matrix design_matrix(const KnotSystem& ks, std::span<const double> xs) {
  Matrix X = Matrix::Zero(static_cast<Eigen::Index>(xs.size()), ks.size());
  double vals[32];
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const int first = eval_basis_nonzero(ks, xs[i], vals);
    for (int j = 0; j <= ks.degree(); ++j) X(static_cast<Eigen::Index>(i), first + j) = vals[j];
  }
  return X;
}

double eval_spline(const KnotSystem& ks, const Vector& coef, double x) {
  if (coef.size() != ks.size()) throw InvalidArgument("coefficient length does not match basis size");
  double vals[32];
  const int first = eval_basis_nonzero(ks, x, vals);
  double s = 0.0;
  for (int j = 0; j <= ks.degree(); ++j) s += vals[j] * coef[first + j];
  return s;
}

namespace {

// One derivative step: maps coefficients of degree q to degree q - 1.
Matrix derivative_step(const KnotSystem& ks) {
  const int q = ks.degree();
  const int L = ks.size();
  Matrix D = Matrix::Zero(L - 1, L);
  for (int j = 0; j < L - 1; ++j) {
    const double w = q / (ks.knot(j + 1 + q) - ks.knot(j + 1));
    D(j, j) = -w;
    D(j, j + 1) = w;
  }
  return D;
}

void check_order(const KnotSystem& ks, int r) {
  if (r < 0) throw InvalidArgument("derivative order must be >= 0");
  if (r > ks.degree()) throw InvalidArgument("derivative order exceeds spline degree");
}

}  // namespace

Matrix derivative_operator(const KnotSystem& ks, int r) {
  check_order(ks, r);
  Matrix D = Matrix::Identity(ks.size(), ks.size());
  KnotSystem cur = ks;
  for (int s = 0; s < r; ++s) {
    D = derivative_step(cur) * D;
    cur = make_knot_system(cur.degree() - 1, cur.l_prime(), cur.domain());
  }
  return D;
}

std::pair<KnotSystem, Vector> derivative_coefficients(const KnotSystem& ks, const Vector& coef, int r) {
  if (coef.size() != ks.size()) throw InvalidArgument("coefficient length does not match basis size");
  check_order(ks, r);
  KnotSystem cur = ks;
  Vector c = coef;
  for (int s = 0; s < r; ++s) {
    c = derivative_step(cur) * c;
    cur = make_knot_system(cur.degree() - 1, cur.l_prime(), cur.domain());
  }
  return {cur, c};
}

Vector eval_basis_derivative(const KnotSystem& ks, double x, int r) {
  check_order(ks, r);
  if (r == 0) return eval_basis(ks, x);
  const KnotSystem low = make_knot_system(ks.degree() - r, ks.l_prime(), ks.domain());
  return derivative_operator(ks, r).transpose() * eval_basis(low, x);
}

double eval_spline_derivative(const KnotSystem& ks, const Vector& coef, double x, int r) {
  auto [low, c] = derivative_coefficients(ks, coef, r);
  return eval_spline(low, c, x);
}

SplineBasis::SplineBasis(KnotSystem single) : SplineBasis(std::vector<KnotSystem>{std::move(single)}) {}

SplineBasis::SplineBasis(std::vector<KnotSystem> pieces) : pieces_(std::move(pieces)) {
  if (pieces_.empty()) throw InvalidArgument("spline basis needs at least one piece");
  for (std::size_t j = 0; j < pieces_.size(); ++j) {
    if (j > 0) {
      const double a = pieces_[j - 1].domain().hi;
      const double b = pieces_[j].domain().lo;
      if (std::abs(a - b) > 1e-12 * std::max(1.0, std::abs(a)))
        throw InvalidArgument("spline pieces must cover consecutive intervals");
    }
    offsets_.push_back(size_);
    size_ += pieces_[j].size();
  }
}

Interval SplineBasis::domain() const noexcept {
  return {pieces_.front().domain().lo, pieces_.back().domain().hi};
}

int SplineBasis::piece_of(double x) const {
  for (std::size_t j = 0; j + 1 < pieces_.size(); ++j)
    if (x <= pieces_[j].domain().hi) return static_cast<int>(j);
  return num_pieces() - 1;
}

Vector SplineBasis::eval(double x) const {
  Vector b = Vector::Zero(size_);
  const int j = piece_of(x);
  b.segment(offset(j), piece(j).size()) = eval_basis(piece(j), x);
  return b;
}

Matrix SplineBasis::design(std::span<const double> xs) const {
  Matrix X = Matrix::Zero(static_cast<Eigen::Index>(xs.size()), size_);
  double vals[32];
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const int j = piece_of(xs[i]);
    const int first = eval_basis_nonzero(piece(j), xs[i], vals);
    for (int k = 0; k <= piece(j).degree(); ++k)
      X(static_cast<Eigen::Index>(i), offset(j) + first + k) = vals[k];
  }
  return X;
}

double SplineBasis::value(const Vector& coef, double x) const {
  if (coef.size() != size_) throw InvalidArgument("coefficient length does not match basis size");
  const int j = piece_of(x);
  return eval_spline(piece(j), coef.segment(offset(j), piece(j).size()), x);
}

std::vector<double> SplineBasis::breakpoints() const {
  std::vector<double> out;
  for (const auto& p : pieces_) {
    auto u = p.unique_knots();
    out.insert(out.end(), u.begin(), u.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end(),
                        [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)); }),
            out.end());
  return out;
}

}  // namespace shapetest

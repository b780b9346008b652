#pragma once

#include <shapetest/errors.hpp>

#include <Eigen/Dense>

#include <span>
#include <utility>
#include <vector>

namespace shapetest {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct Interval {
  double lo = 0.0;
  double hi = 1.0;

  double length() const { return hi - lo; }
  bool contains(double x) const { return x >= lo && x <= hi; }
  bool operator==(const Interval&) const = default;
};

/// Clamped knot sequence with equidistant interior knots.
///
/// Degree q, L' interior intervals: L = L' + q basis functions and
/// L' + 2q + 1 knots, the two boundary knots repeated q + 1 times.
class KnotSystem {
 public:
  KnotSystem(int degree, int l_prime, Interval domain);

  int degree() const noexcept { return degree_; }
  int l_prime() const noexcept { return l_prime_; }
  int size() const noexcept { return l_prime_ + degree_; }
  Interval domain() const noexcept { return domain_; }
  double spacing() const noexcept { return domain_.length() / l_prime_; }

  std::span<const double> knots() const noexcept { return knots_; }
  double knot(int j) const { return knots_[static_cast<std::size_t>(j)]; }
  // The L' + 1 distinct knots, lo first.
  std::vector<double> unique_knots() const;
  // Index k with knots[k] <= x < knots[k+1]; the right end belongs to the last span.
  int span_index(double x) const;
  // Knot averages of the basis functions.
  std::vector<double> greville() const;

  bool operator==(const KnotSystem& other) const = default;

 private:
  int degree_;
  int l_prime_;
  Interval domain_;
  std::vector<double> knots_;
};

KnotSystem make_knot_system(int degree, int l_prime, Interval domain = {});

// Values of all L basis functions at x.
Vector eval_basis(const KnotSystem& ks, double x);
// Only the q + 1 possibly nonzero values; returns the index of the first one.
int eval_basis_nonzero(const KnotSystem& ks, double x, double* out);
Matrix design_matrix(const KnotSystem& ks, std::span<const double> xs);

double eval_spline(const KnotSystem& ks, const Vector& coef, double x);

// Coefficients of the r-th derivative, expressed in the degree q - r system.
std::pair<KnotSystem, Vector> derivative_coefficients(const KnotSystem& ks, const Vector& coef, int r);
// (L - r) x L matrix D with derivative coefficients = D * coef.
Matrix derivative_operator(const KnotSystem& ks, int r);
// Vector a with m^(r)(x) = a' coef. Zero entries are exact.
Vector eval_basis_derivative(const KnotSystem& ks, double x, int r);
double eval_spline_derivative(const KnotSystem& ks, const Vector& coef, double x, int r);

/// Several knot systems glued side by side on consecutive intervals, the
/// coefficient vector being the concatenation of the per-piece vectors.
/// A point on a shared breakpoint belongs to the piece on its left.
class SplineBasis {
 public:
  explicit SplineBasis(KnotSystem single);
  explicit SplineBasis(std::vector<KnotSystem> pieces);

  int size() const noexcept { return size_; }
  int num_pieces() const noexcept { return static_cast<int>(pieces_.size()); }
  const KnotSystem& piece(int j) const { return pieces_[static_cast<std::size_t>(j)]; }
  const std::vector<KnotSystem>& pieces() const noexcept { return pieces_; }
  int offset(int j) const { return offsets_[static_cast<std::size_t>(j)]; }
  Interval domain() const noexcept;

  int piece_of(double x) const;
  Vector eval(double x) const;
  Matrix design(std::span<const double> xs) const;
  double value(const Vector& coef, double x) const;
  // Sorted distinct knots of all pieces.
  std::vector<double> breakpoints() const;

 private:
  std::vector<KnotSystem> pieces_;
  std::vector<int> offsets_;
  int size_ = 0;
};

}  // namespace shapetest

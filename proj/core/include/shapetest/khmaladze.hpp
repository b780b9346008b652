#pragma once

#include <shapetest/bspline.hpp>
#include <shapetest/constraints.hpp>
#include <shapetest/estimation.hpp>

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace shapetest {

// right: tails are {x_k >= x_i} (transform from the right end of the support); left: mirror image.
enum class Direction { right, left };

struct OrderedSample {
  std::vector<int> perm;  // perm[k] = original index of the k-th point in sweep order
  Vector x_sorted;
  Vector y_sorted;
  Matrix P_sorted;  // basis rows in sweep order
  Vector x_tilde;
  // First sweep index whose point is in the tail of x_tilde[i]; n when that tail is empty.
  std::vector<int> tail_start;
  std::vector<char> trimmed;  // 1 where the trimming rule moved (or kept, at a knot) x_tilde to a knot
  Direction direction = Direction::right;

  int size() const { return static_cast<int>(perm.size()); }
  int trimmed_count() const;
};

// Sorts by x (ascending for right, descending for left; ties by original index) and applies the
// optional trimming x -> next knot when x + n^-varsigma >= that knot.
OrderedSample order_and_trim(std::span<const double> xs, std::span<const double> ys, const SplineBasis& basis,
                             std::optional<double> varsigma = std::nullopt, Direction direction = Direction::right);

enum class EffectiveMode { plain, linear_merged, nonlinear_reparameterized };

/// Basis after enforcing the binding constraints: P_eff(x) = transform' P(x).
struct EffectiveBasis {
  EffectiveMode mode = EffectiveMode::plain;
  Matrix transform;                      // L x dim
  std::vector<std::vector<int>> groups;  // coefficient groups merged by difference rows
  std::vector<int> eliminated;           // coordinates solved for by the remaining binding rows

  int dim() const { return static_cast<int>(transform.cols()); }
  Vector apply(const Vector& p) const { return transform.transpose() * p; }
  Matrix apply_rows(const Matrix& P) const { return P * transform; }
};

EffectiveBasis plain_basis(int L);

EffectiveBasis merge_binding_linear(const ConstraintSet& S, const FitResult& fit);

struct SmoothConstraint {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
};

// Implicit-function elimination of one coordinate per constraint, linearised at b_hat.
// Pivots default to the largest remaining gradient entry.
EffectiveBasis reparameterize_nonlinear(const std::vector<SmoothConstraint>& constraints, const Vector& b_hat,
                                        const std::vector<int>& pivots = {});
EffectiveBasis reparameterize_nonlinear(const SmoothConstraint& constraint, const Vector& b_hat,
                                        std::optional<int> ell0 = std::nullopt);

// Dispatches on the binding set: plain, linear merge, or nonlinear reparameterisation.
EffectiveBasis effective_basis(const ConstraintSet& S, const FitResult& fit);

/// Recursive residuals v_i = u_i - P_i' A+_{n,i} C_{n,i} for arbitrary u, with the tail
/// least-squares problems updated by Givens rotations. Built once per design, then reused.
class RecursiveResidualPlan {
 public:
  RecursiveResidualPlan(const Matrix& P_sorted, std::vector<int> tail_start);

  Vector residuals(const Vector& u_sorted) const;
  int size() const { return static_cast<int>(tail_start_.size()); }
  int dim() const { return dim_; }

 private:
  struct Rotation {
    int j;
    double c;
    double s;
  };
  int dim_ = 0;
  std::vector<int> tail_start_;
  std::vector<int> rot_begin_;  // step s owns [rot_begin_[s], rot_begin_[s-1]); the last step runs to the end
  std::vector<Rotation> rotations_;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w_;  // row i: R^{-T} P_i
};

struct SweepStep {
  int index = 0;
  bool recursive = false;  // pseudo-inverse obtained by the rank-one update rather than an SVD
  const Matrix* A = nullptr;
  const Matrix* A_plus = nullptr;
};

/// The same residuals through explicitly maintained pseudo-inverses: rank-one downdates with
/// a Harville-identity check, falling back to an SVD when the update is not valid.
class PseudoInverseSweep {
 public:
  PseudoInverseSweep(const Matrix& P_sorted, std::vector<int> tail_start, double harville_tol = 1e-6,
                     double condition_guard = 1e8);

  Vector residuals(const Vector& u_sorted, const std::function<void(const SweepStep&)>& observer = {}) const;
  int fallbacks() const { return fallbacks_; }

 private:
  Matrix P_;
  std::vector<int> tail_start_;
  double harville_tol_;
  double condition_guard_;
  mutable int fallbacks_ = 0;
};

enum class RecursionMethod { givens, pseudo_inverse };

Vector recursive_residuals(const OrderedSample& os, const EffectiveBasis& eff, const Vector& u_sorted,
                           RecursionMethod method = RecursionMethod::givens);

// Head-sum form: v_k = u_k - P_k' Abar+_k Cbar_k over {j : x_j <= x_k}, rows in ascending order.
Vector recursive_residuals_forward(const Matrix& P_sorted, const Vector& u_sorted,
                                   RecursionMethod method = RecursionMethod::pseudo_inverse);

// n^{-1/2} * cumulative sums.
Vector partial_sum_path(const Vector& v);

struct TransformOptions {
  FitOptions fit;
  std::optional<double> varsigma;
  Direction direction = Direction::right;
  std::optional<ScedasticFit> scedastic;
  bool merge_binding = true;
  RecursionMethod method = RecursionMethod::givens;
};

struct TransformOutput {
  Vector v;
  Vector path;
  double sigma_hat = 0.0;
  int n_tilde = 0;
  FitResult fit;
  EffectiveBasis effective;
  OrderedSample ordered;
  Vector u_sorted;       // residuals fed to the recursion (normalised when heteroscedastic)
  Vector scale_sorted;   // sigma(x) in sweep order; ones when homoscedastic
  std::shared_ptr<const RecursiveResidualPlan> plan;
};

TransformOutput transform(std::span<const double> xs, std::span<const double> ys, const SplineBasis& basis,
                          const ConstraintSet& S, const TransformOptions& options = {});

}  // namespace shapetest

#include <shapetest/linalg.hpp>

#include <algorithm>
#include <limits>

namespace shapetest {

Matrix pseudo_inverse(const Matrix& A, std::optional<double> cutoff, int n_hint) {
  if (A.size() == 0) return Matrix::Zero(A.cols(), A.rows());
  Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double smax = s.size() > 0 ? s[0] : 0.0;
  const double m = static_cast<double>(std::max<Eigen::Index>({A.rows(), A.cols(), n_hint}));
  const double cut = cutoff ? *cutoff : m * std::numeric_limits<double>::epsilon() * smax;
  Vector inv = Vector::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] > cut && s[i] > 0.0) inv[i] = 1.0 / s[i];
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Matrix pseudo_inverse_psd(const Matrix& A, std::optional<double> cutoff, int n_hint) {
  if (A.size() == 0) return A;
  Eigen::SelfAdjointEigenSolver<Matrix> es(A);
  const Vector& ev = es.eigenvalues();
  const double emax = ev.cwiseAbs().maxCoeff();
  const double m = static_cast<double>(std::max<Eigen::Index>(A.rows(), n_hint));
  const double cut = cutoff ? *cutoff : m * std::numeric_limits<double>::epsilon() * emax;
  Vector inv = Vector::Zero(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev[i] > cut && ev[i] > 0.0) inv[i] = 1.0 / ev[i];
  const Matrix& V = es.eigenvectors();
  Matrix P = V * inv.asDiagonal() * V.transpose();
  return 0.5 * (P + P.transpose());
}

Matrix pinv_downdate(const Matrix& A_plus, const Vector& p, double n) {
  const Vector w = A_plus * p;
  const double den = n + p.dot(w);
  if (!(den > 0.0)) return A_plus;
  return A_plus - (w * w.transpose()) / den;
}

}  // namespace shapetest

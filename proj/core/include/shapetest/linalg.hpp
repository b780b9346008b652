#pragma once

#include <shapetest/bspline.hpp>

#include <optional>

namespace shapetest {

// Moore-Penrose inverse via SVD; singular values below the cutoff are dropped.
// Default cutoff: max(rows, cols, n_hint) * eps * sigma_max.
Matrix pseudo_inverse(const Matrix& A, std::optional<double> cutoff = std::nullopt, int n_hint = 0);

// Same for a symmetric positive semidefinite matrix, through its eigendecomposition.
Matrix pseudo_inverse_psd(const Matrix& A, std::optional<double> cutoff = std::nullopt, int n_hint = 0);

// A_plus - A_plus p p' A_plus / (n + p' A_plus p): pseudo-inverse of A + p p'/n
// when p lies in the range of A.
Matrix pinv_downdate(const Matrix& A_plus, const Vector& p, double n);

}  // namespace shapetest

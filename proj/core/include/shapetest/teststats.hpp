#pragma once

#include <shapetest/bspline.hpp>

namespace shapetest {

struct TransformOutput;

struct TestStatistics {
  double ks = 0.0;
  double cvm = 0.0;
  double ad = 0.0;
  int n_tilde = 0;
  bool degenerate = false;  // sigma_hat was zero; all statistics set to 0
};

// KS, CvM and AD over the first n_tilde points of the path; the AD weight uses x^q = q/n.
TestStatistics compute_statistics(const Vector& path, double sigma_hat, int n_tilde);
TestStatistics compute_statistics(const TransformOutput& t);

}  // namespace shapetest

#include <shapetest/khmaladze.hpp>
#include <shapetest/teststats.hpp>

#include <algorithm>
#include <cmath>

namespace shapetest {

TestStatistics compute_statistics(const Vector& path, double sigma_hat, int n_tilde) {
  if (n_tilde < 1) throw InvalidArgument("need n_tilde >= 1 (more observations than basis functions + 2)");
  if (n_tilde > path.size()) throw InvalidArgument("n_tilde exceeds the path length");
  if (!(sigma_hat >= 0.0) || !std::isfinite(sigma_hat)) throw NumericalError("invalid residual scale");
  TestStatistics t;
  t.n_tilde = n_tilde;
  if (sigma_hat == 0.0) {
    t.degenerate = true;
    return t;
  }
  const double n = static_cast<double>(path.size());
  const double s2 = sigma_hat * sigma_hat;
  double ks = 0.0, cvm = 0.0, ad = 0.0;
  for (int q = 1; q <= n_tilde; ++q) {
    const double m = path[q - 1];
    const double xq = q / n;
    ks = std::max(ks, std::abs(m));
    cvm += m * m;
    ad += m * m / (xq * (1.0 - xq));
  }
  t.ks = ks / sigma_hat;
  t.cvm = cvm / (s2 * n_tilde);
  t.ad = ad / (s2 * n_tilde);
  return t;
}

TestStatistics compute_statistics(const TransformOutput& t) { return compute_statistics(t.path, t.sigma_hat, t.n_tilde); }

}  // namespace shapetest

#pragma once

#include <cmath>

#include "pinncw/common.hpp"

namespace pinncw {

struct GaussHermite {
  Vec nodes;    // ascending
  Vec weights;  // for integrals against exp(-s^2)
};

// Golub-Welsch: nodes are eigenvalues of the Jacobi matrix of the Hermite
// recurrence, weights come from the first component of each eigenvector.
inline GaussHermite gauss_hermite(int n) {
  check(n >= 1, "gauss_hermite: need at least one node");
  Mat jacobi = Mat::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = std::sqrt(k / 2.0);
    jacobi(k, k - 1) = b;
    jacobi(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(jacobi);
  GaussHermite out;
  out.nodes = es.eigenvalues();
  const double sqrt_pi = 1.7724538509055160272981674833411;
  out.weights = sqrt_pi * es.eigenvectors().row(0).array().square();
  return out;
}

}  // namespace pinncw

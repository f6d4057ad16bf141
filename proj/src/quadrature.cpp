#include "qbound/quadrature.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "qbound/numerics.hpp"

namespace qbound {

GaussRule gauss_legendre(int n, double a, double b) {
  if (n < 1) throw InputError("quadrature needs at least one node");
  RMatrix jac = RMatrix::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double beta = k / std::sqrt(4.0 * k * k - 1.0);
    jac(k, k - 1) = beta;
    jac(k - 1, k) = beta;
  }
  Eigen::SelfAdjointEigenSolver<RMatrix> es(jac);
  GaussRule rule;
  const double half = 0.5 * (b - a);
  for (int k = 0; k < n; ++k) {
    const double v0 = es.eigenvectors()(0, k);
    rule.nodes.push_back(a + half * (es.eigenvalues()(k) + 1.0));
    rule.weights.push_back(half * 2.0 * v0 * v0);
  }
  return rule;
}

}  // namespace qbound

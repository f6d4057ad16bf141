#pragma once

#include <vector>

namespace qbound {

struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [a, b] (Golub-Welsch).
GaussRule gauss_legendre(int n, double a = -1.0, double b = 1.0);

}  // namespace qbound

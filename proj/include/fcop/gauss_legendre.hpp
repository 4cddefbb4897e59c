#pragma once

#include <vector>

namespace fcop {

/// m-point Gauss-Legendre rule on [-1, 1], nodes ascending.
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

GaussRule gauss_legendre(int m);

}  // namespace fcop

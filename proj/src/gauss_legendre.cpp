#include "fcop/gauss_legendre.hpp"

#include <cmath>
#include <numbers>

#include "fcop/errors.hpp"

namespace fcop {

GaussRule gauss_legendre(int m) {
  if (m < 1) throw DomainError("gauss_legendre: m >= 1 violated");
  GaussRule rule{std::vector<double>(m), std::vector<double>(m)};
  const int half = (m + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Newton on P_m from the Tricomi initial guess.
    double z = std::cos(std::numbers::pi * (i + 0.75) / (m + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 1; j <= m; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      dp = m * (z * p1 - p2) / (z * z - 1.0);
      const double step = p1 / dp;
      z -= step;
      if (std::abs(step) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.nodes[i] = -z;
    rule.nodes[m - 1 - i] = z;
    rule.weights[i] = w;
    rule.weights[m - 1 - i] = w;
  }
  if (m % 2 == 1) rule.nodes[m / 2] = 0.0;
  return rule;
}

}  // namespace fcop

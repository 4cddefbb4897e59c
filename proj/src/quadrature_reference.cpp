#include <cmath>
#include <numbers>
#include <vector>

#include "fcop/errors.hpp"
#include "fcop/quadrature.hpp"

namespace fcop::reference {

FourierInverter::LevelValue integrate(const MgfModel& model, const DampingVector& r, KernelKind kernel,
                                      std::span<const AxisRule> axes, std::span<const double> x) {
  const int n = model.dimension();
  if (static_cast<int>(axes.size()) != n || static_cast<int>(x.size()) != n) {
    throw DomainError("reference::integrate: dimension mismatch");
  }
  std::vector<std::size_t> idx(n, 0);
  std::vector<Complex> z(n);
  Complex sum = 0.0;
  for (;;) {
    double weight = 1.0;
    Complex exponent = 0.0;
    Complex denom = 1.0;
    for (int i = 0; i < n; ++i) {
      z[i] = Complex(r[i], axes[i].nodes[idx[i]]);
      weight *= axes[i].weights[idx[i]];
      exponent -= z[i] * x[i];
      denom *= z[i];
    }
    Complex term = std::exp(model.log_mgf(z) + exponent);
    if (kernel == KernelKind::cdf) term /= denom;
    sum += weight * term;

    int a = n - 1;
    while (a >= 0 && ++idx[a] == axes[a].nodes.size()) {
      idx[a] = 0;
      --a;
    }
    if (a < 0) break;
  }
  // cdf: (1/(2pi)^n) * (-1)^n from the transform of the indicator.
  double scale = std::pow(2.0 * std::numbers::pi, -n);
  if (kernel == KernelKind::cdf && n % 2 == 1) scale = -scale;
  return {scale * sum.real(), std::abs(scale * sum.imag())};
}

}  // namespace fcop::reference
